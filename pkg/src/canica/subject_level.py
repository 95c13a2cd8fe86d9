"""Per-subject separation of signal patterns from observation noise.

A truncated SVD splits each subject's series into orthonormal whitened
patterns (the retained right singular vectors) and a noise residual. The
retained order is chosen by comparing bootstrap stability of the leading
right-singular subspace against the same statistic on a matching pure
noise matrix.

Stability statistic. For a candidate order m, one bootstrap draw resamples
frames with replacement and the overlap matrix O[i, j] = <v_boot_i, v_ref_j>
between the draw's and the original data's leading right singular vectors
is formed. The per-draw statistic at order m is the increment of the
subspace overlap energy

    gain(m) = sum_{i<=m} O[i, m]^2 + sum_{j<m} O[m, j]^2,

i.e. how much energy the m-th direction adds to the matched subspace. A
signal direction that survives resampling contributes about 1; a noise
direction contributes what an equally-placed direction of an i.i.d.
standard normal matrix would. The cumulative form (1/m)||P_boot P_ref^T||^2
cannot be used directly for the stopping rule: once real directions are
present they inflate the average at every order beyond them, so selection
never stops; the increment isolates each direction's own stability.

The selected order is the largest n such that for every m <= n the mean
gain over bootstrap draws strictly exceeds the chosen quantile of the
null distribution of per-draw gains at order m, with candidates beyond
the numerical rank of the data failing automatically. Everything is
computed from frame-by-frame Gram matrices, so each draw costs O(f^3)
independent of the voxel count.
"""

from dataclasses import dataclass

import numpy as np

from . import streams
from .data_model import DataMatrix, RowKind, SubjectSeries
from .errors import BadDimension, NumericalFailure

DEFAULT_N_BOOT = 100
DEFAULT_QUANTILE = 0.95


@dataclass(frozen=True)
class OrderSelectionCurve:
    """Per-candidate-order diagnostics from one select_order run."""

    orders: np.ndarray  # candidate orders, 1..max_order
    data_stability: np.ndarray  # mean bootstrap gain of the data
    null_quantile: np.ndarray  # quantile of the null gain distribution
    passed: np.ndarray  # strict comparison outcome per order
    selected: int


@dataclass(frozen=True)
class SubjectReduction:
    """Whitened retained patterns and the discarded noise residual."""

    subject_id: str
    whitened_patterns: DataMatrix  # n x n_voxels, orthonormal rows
    noise_residual: DataMatrix  # n_frames x n_voxels
    selected_order: int
    singular_values: np.ndarray  # full spectrum, nonincreasing
    stability_curve: OrderSelectionCurve | None = None

    @property
    def n_voxels(self) -> int:
        return self.whitened_patterns.cols


def nearest_rank_quantile(values: np.ndarray, q: float) -> float:
    """Empirical quantile with the nearest-rank rule, ceil(q * n)."""
    values = np.sort(np.asarray(values, dtype=float))
    idx = max(int(np.ceil(q * values.size)) - 1, 0)
    return float(values[idx])


def _signed_svd(x: np.ndarray):
    """SVD with each right singular vector's largest-magnitude entry positive."""
    try:
        u, s, vt = np.linalg.svd(x, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    peaks = np.argmax(np.abs(vt), axis=1)
    flip = vt[np.arange(vt.shape[0]), peaks] < 0
    vt[flip] *= -1.0
    u[:, flip] *= -1.0
    return u, s, vt


def svd_reduce(series: SubjectSeries, order: int) -> SubjectReduction:
    """Split a series into its top-``order`` whitened patterns and residual."""
    y = series.data.values
    if not 1 <= order <= min(y.shape):
        raise BadDimension(
            f"order must be in [1, {min(y.shape)}], got {order}"
        )
    u, s, vt = _signed_svd(y)
    patterns = vt[:order]
    residual = y - (u[:, :order] * s[:order]) @ patterns
    return SubjectReduction(
        subject_id=series.subject_id,
        whitened_patterns=DataMatrix(patterns, RowKind.PATTERNS),
        noise_residual=DataMatrix(residual, RowKind.FRAMES),
        selected_order=order,
        singular_values=s,
    )


def _descending_eigh(h: np.ndarray):
    evals, evecs = np.linalg.eigh(h)
    return np.clip(evals[::-1], 0.0, None), evecs[:, ::-1]


def _bootstrap_gains(
    gram: np.ndarray,
    ref_vals: np.ndarray,
    ref_vecs: np.ndarray,
    max_order: int,
    rank_tol: float,
    n_boot: int,
    seed: int,
    purpose: int,
) -> np.ndarray:
    """Per-draw subspace-energy gains, shape (n_boot, max_order)."""
    n_frames = gram.shape[0]
    ref_scale = np.sqrt(np.maximum(ref_vals[:max_order], rank_tol))
    ref_top = ref_vecs[:, :max_order]
    ref_dead = ref_vals[:max_order] <= rank_tol
    gains = np.empty((n_boot, max_order))
    for b in range(n_boot):
        rng = streams.substream(seed, purpose, b)
        idx = rng.integers(0, n_frames, size=n_frames)
        boot_vals, boot_vecs = _descending_eigh(gram[np.ix_(idx, idx)])
        boot_scale = np.sqrt(np.maximum(boot_vals[:max_order], rank_tol))
        overlap = (boot_vecs[:, :max_order].T @ gram[idx, :] @ ref_top) / np.outer(
            boot_scale, ref_scale
        )
        overlap[boot_vals[:max_order] <= rank_tol, :] = 0.0
        overlap[:, ref_dead] = 0.0
        energy = (overlap**2).cumsum(axis=0).cumsum(axis=1).diagonal()
        gains[b] = np.diff(energy, prepend=0.0)
    return gains


def order_stability(
    series: SubjectSeries,
    max_order: int,
    n_boot: int = DEFAULT_N_BOOT,
    quantile: float = DEFAULT_QUANTILE,
    seed: int = 0,
) -> OrderSelectionCurve:
    """Bootstrap stability curve and the resulting selected order."""
    y = series.data.values
    n_frames, n_voxels = y.shape
    if not 1 <= max_order <= min(n_frames, n_voxels) // 2:
        raise BadDimension(
            f"max_order must be in [1, {min(n_frames, n_voxels) // 2}], "
            f"got {max_order}"
        )
    if n_boot < 20:
        raise BadDimension(f"need n_boot >= 20, got {n_boot}")
    if not 0.0 < quantile < 1.0:
        raise ValueError(f"quantile must be in (0, 1), got {quantile}")
    orders = np.arange(1, max_order + 1)
    if np.ptp(y) == 0.0:
        # Constant data carries no subspace at all; report order 0 rather
        # than erroring out of the bootstrap internals.
        zeros = np.zeros(max_order)
        return OrderSelectionCurve(orders, zeros, zeros.copy(),
                                   np.zeros(max_order, bool), 0)

    gram = y @ y.T
    ref_vals, ref_vecs = _descending_eigh(gram)
    rank_tol = ref_vals[0] * max(y.shape) * np.finfo(float).eps
    rank = int((ref_vals > rank_tol).sum())
    data_gains = _bootstrap_gains(
        gram, ref_vals, ref_vecs, max_order, rank_tol, n_boot, seed,
        streams.ORDER_DATA_BOOT,
    )

    null = streams.substream(seed, streams.ORDER_NULL_MATRIX).standard_normal(y.shape)
    null_gram = null @ null.T
    null_vals, null_vecs = _descending_eigh(null_gram)
    null_tol = null_vals[0] * max(y.shape) * np.finfo(float).eps
    null_gains = _bootstrap_gains(
        null_gram, null_vals, null_vecs, max_order, null_tol, n_boot, seed,
        streams.ORDER_NULL_BOOT,
    )

    stability = data_gains.mean(axis=0)
    thresholds = np.array(
        [nearest_rank_quantile(null_gains[:, m], quantile) for m in range(max_order)]
    )
    passed = (stability > thresholds) & (orders <= rank)
    selected = 0
    for m in range(max_order):
        if not passed[m]:
            break
        selected = m + 1
    return OrderSelectionCurve(orders, stability, thresholds, passed, selected)


def select_order(
    series: SubjectSeries,
    max_order: int,
    n_boot: int = DEFAULT_N_BOOT,
    quantile: float = DEFAULT_QUANTILE,
    seed: int = 0,
) -> int:
    """Largest order whose every direction beats the null stability quantile."""
    return order_stability(series, max_order, n_boot, quantile, seed).selected
