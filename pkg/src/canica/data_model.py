"""Core matrix types and the CNIC1 on-disk format.

Every stage of the pipeline works on dense ``rows x voxels`` matrices of
64-bit floats. Voxels are an unordered flat axis; no spatial structure is
attached. All types are immutable after construction and safe to share
across threads.

CNIC1 format, little-endian throughout::

    bytes 0..3   magic "CNIC"
    byte  4      version, 0x01
    bytes 5..12  u64 rows
    bytes 13..20 u64 cols
    byte  21     row-semantics code (0 frames, 1 patterns, 2 components)
    then rows*cols IEEE-754 f64 values, row-major

A write/read round trip is bit-exact.
"""

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadDimension,
    BadMagic,
    EmptyMatrix,
    NonFiniteValue,
    ShapeOverflow,
    TruncatedPayload,
)

MAGIC = b"CNIC"
VERSION = 1
_HEADER = struct.Struct("<QQB")
_HEADER_SIZE = len(MAGIC) + 1 + _HEADER.size
MAX_ELEMENTS = 1 << 32


class RowKind(enum.IntEnum):
    """What one row of a DataMatrix means. Columns are always voxels."""

    FRAMES = 0
    PATTERNS = 1
    COMPONENTS = 2


@dataclass(frozen=True)
class DataMatrix:
    """Immutable 2-D float64 matrix with row semantics.

    All entries are finite; the array is made C-contiguous and read-only
    at construction.
    """

    values: np.ndarray
    row_kind: RowKind = RowKind.PATTERNS

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise BadDimension(f"expected a 2-D matrix, got ndim={arr.ndim}")
        if arr.size and not np.isfinite(arr).all():
            raise NonFiniteValue("matrix contains NaN or infinite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "row_kind", RowKind(self.row_kind))

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SubjectSeries:
    """One subject's frames-by-voxels observation matrix."""

    subject_id: str
    data: DataMatrix
    # Voxels with no variation, flagged by standardize(); None before.
    zero_variance: np.ndarray | None = None

    def __post_init__(self):
        if self.data.row_kind != RowKind.FRAMES:
            raise BadDimension("subject data must have frame rows")
        if self.data.rows < 2 or self.data.cols < 2:
            raise BadDimension(
                f"subject {self.subject_id!r} needs at least 2 frames and "
                f"2 voxels, got {self.data.rows}x{self.data.cols}"
            )
        if self.zero_variance is not None:
            mask = np.asarray(self.zero_variance, dtype=bool)
            if mask.shape != (self.data.cols,):
                raise BadDimension("zero-variance mask must have one entry per voxel")
            mask.setflags(write=False)
            object.__setattr__(self, "zero_variance", mask)

    @property
    def n_frames(self) -> int:
        return self.data.rows

    @property
    def n_voxels(self) -> int:
        return self.data.cols


@dataclass(frozen=True)
class GroupDataset:
    """Ordered collection of subjects sharing one voxel axis."""

    subjects: tuple[SubjectSeries, ...]
    mask_id: str | None = None

    def __post_init__(self):
        subjects = tuple(self.subjects)
        object.__setattr__(self, "subjects", subjects)
        if not subjects:
            raise EmptyMatrix("a group dataset needs at least one subject")
        voxels = {s.n_voxels for s in subjects}
        if len(voxels) != 1:
            raise BadDimension(f"subjects disagree on voxel count: {sorted(voxels)}")
        ids = [s.subject_id for s in subjects]
        if len(set(ids)) != len(ids):
            raise BadDimension("subject ids must be unique")

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    @property
    def n_voxels(self) -> int:
        return self.subjects[0].n_voxels


def standardize(series: SubjectSeries) -> SubjectSeries:
    """Center every voxel and scale it to unit sample variance.

    Columns with no variation are left at zero and flagged in the returned
    series so voxel indexing stays stable across subjects. Sample variance
    uses the n-1 denominator. Idempotent to within rounding.
    """
    x = series.data.values
    if x.shape[0] == 0 or x.shape[1] == 0:
        raise EmptyMatrix("cannot standardize an empty matrix")
    centered = x - x.mean(axis=0)
    flat = np.ptp(x, axis=0) == 0.0
    std = centered.std(axis=0, ddof=1)
    std[flat] = 1.0
    out = centered / std
    out[:, flat] = 0.0
    return SubjectSeries(
        subject_id=series.subject_id,
        data=DataMatrix(out, RowKind.FRAMES),
        zero_variance=flat,
    )


def write_matrix(matrix: DataMatrix, path) -> None:
    """Write a matrix in CNIC1 format."""
    if matrix.rows == 0 or matrix.cols == 0:
        raise EmptyMatrix("refusing to write a matrix with no rows or columns")
    payload = matrix.values.astype("<f8", copy=False)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([VERSION]))
        fh.write(_HEADER.pack(matrix.rows, matrix.cols, int(matrix.row_kind)))
        fh.write(payload.tobytes())


def read_matrix(path) -> DataMatrix:
    """Read a CNIC1 file, validating header and payload."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER_SIZE:
        raise BadMagic(f"{path}: file shorter than a CNIC1 header")
    if blob[:4] != MAGIC or blob[4] != VERSION:
        raise BadMagic(f"{path}: not a CNIC1 file")
    rows, cols, kind_code = _HEADER.unpack_from(blob, 5)
    try:
        kind = RowKind(kind_code)
    except ValueError:
        raise BadMagic(f"{path}: unknown row-semantics code {kind_code}") from None
    if rows == 0 or cols == 0:
        raise EmptyMatrix(f"{path}: declared shape {rows}x{cols} is empty")
    if rows * cols > MAX_ELEMENTS:
        raise ShapeOverflow(f"{path}: {rows}x{cols} exceeds the element limit")
    expected = _HEADER_SIZE + 8 * rows * cols
    if len(blob) != expected:
        raise TruncatedPayload(
            f"{path}: expected {expected} bytes for {rows}x{cols}, got {len(blob)}"
        )
    values = np.frombuffer(blob, dtype="<f8", offset=_HEADER_SIZE).reshape(rows, cols)
    if not np.isfinite(values).all():
        raise NonFiniteValue(f"{path}: payload contains non-finite values")
    return DataMatrix(values.copy(), kind)


def read_csv_matrix(path, row_kind: RowKind = RowKind.PATTERNS) -> DataMatrix:
    """Read a small comma-separated matrix; a non-numeric header row is skipped."""
    with open(path) as fh:
        first = fh.readline()
    skip = 0
    try:
        [float(tok) for tok in first.strip().split(",") if tok != ""]
    except ValueError:
        skip = 1
    values = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    return DataMatrix(values, row_kind)
