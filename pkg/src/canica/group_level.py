"""Group-reproducible subspace via SVD of concatenated whitened patterns.

Stacking every subject's orthonormal whitened patterns and taking the SVD
generalizes canonical correlation analysis to many subjects (it reduces to
standard CCA for two). The singular values measure between-subject
reproducibility of each direction: since each subject's block has
orthonormal rows, one subject can contribute at most 1 to a squared
singular value, so values lie in (0, sqrt(S)].

Directions are kept when their singular value strictly exceeds a
noise-calibrated threshold: the bootstrap distribution of the maximum
singular value obtained by re-whitening frame-resampled copies of each
subject's noise residual and stacking those instead.
"""

from dataclasses import dataclass

import numpy as np

from . import streams
from .data_model import DataMatrix, RowKind
from .errors import BadDimension, EmptyGroup, EmptyNoise, NumericalFailure
from .subject_level import SubjectReduction, _signed_svd, nearest_rank_quantile

DEFAULT_N_BOOT = 100
DEFAULT_ALPHA = 0.05


@dataclass(frozen=True)
class GroupDecomposition:
    """Full SVD of the stacked whitened patterns, before selection."""

    loading_basis: np.ndarray  # (sum n_s) x r, orthonormal columns
    correlations: np.ndarray  # r singular values, nonincreasing
    pattern_basis: np.ndarray  # r x n_voxels, orthonormal rows
    subject_ids: tuple[str, ...]
    subject_slices: tuple[tuple[int, int], ...]  # row range per subject

    @property
    def n_voxels(self) -> int:
        return self.pattern_basis.shape[1]


@dataclass(frozen=True)
class GroupSubspace:
    """Retained group patterns with their loadings and selection context."""

    group_patterns: DataMatrix  # k x n_voxels, orthonormal rows
    canonical_correlations: np.ndarray  # retained values, nonincreasing
    loadings: np.ndarray  # (sum n_s) x k, partitioned by subject_slices
    threshold: float
    residual_ss: float  # energy of the discarded directions
    subject_ids: tuple[str, ...]
    subject_slices: tuple[tuple[int, int], ...]

    @property
    def k(self) -> int:
        return self.group_patterns.rows


def group_cca(reductions: list[SubjectReduction]) -> GroupDecomposition:
    """SVD of the concatenated whitened subject patterns."""
    usable = [r for r in reductions if r.whitened_patterns.rows > 0]
    if len(usable) < 2:
        raise EmptyGroup("group CCA needs at least 2 subjects with patterns")
    voxels = {r.n_voxels for r in usable}
    if len(voxels) != 1:
        raise BadDimension(f"subjects disagree on voxel count: {sorted(voxels)}")
    stacked = np.vstack([r.whitened_patterns.values for r in usable])
    upsilon, z, theta_t = _signed_svd(stacked)
    n_subjects = len(usable)
    if z.size and z[0] > np.sqrt(n_subjects) + 1e-6:
        raise NumericalFailure(
            "stacked singular value exceeds the sqrt(S) bound; "
            "whitened patterns are not orthonormal"
        )
    slices, start = [], 0
    for r in usable:
        stop = start + r.whitened_patterns.rows
        slices.append((start, stop))
        start = stop
    return GroupDecomposition(
        loading_basis=upsilon,
        correlations=z,
        pattern_basis=theta_t,
        subject_ids=tuple(r.subject_id for r in usable),
        subject_slices=tuple(slices),
    )


def bootstrap_max_correlations(
    reductions: list[SubjectReduction],
    n_boot: int = DEFAULT_N_BOOT,
    seed: int = 0,
) -> np.ndarray:
    """Maximum stack singular value of re-whitened resampled noise residuals.

    One draw resamples each subject's residual frames with replacement,
    whitens the resample to its top n_s right singular directions, stacks
    across subjects, and records the largest singular value. All linear
    algebra runs on frame-by-frame Gram matrices, so the cost per draw is
    independent of the voxel count.
    """
    if len(reductions) < 2:
        raise EmptyGroup("noise bootstrap needs at least 2 subjects")
    if n_boot < 20:
        raise BadDimension(f"need n_boot >= 20, got {n_boot}")
    residuals = [r.noise_residual.values for r in reductions]
    orders = [r.whitened_patterns.rows for r in reductions]
    for r in reductions:
        if not r.noise_residual.values.any():
            raise EmptyNoise(
                f"subject {r.subject_id!r} has an all-zero noise residual"
            )
    n_subjects = len(reductions)
    frames = [e.shape[0] for e in residuals]
    grams = {}
    for a in range(n_subjects):
        for b in range(a, n_subjects):
            grams[a, b] = residuals[a] @ residuals[b].T
    offsets = np.concatenate([[0], np.cumsum(orders)])
    total = int(offsets[-1])
    maxima = np.empty(n_boot)
    for draw in range(n_boot):
        rng = streams.substream(seed, streams.CCA_NOISE_BOOT, draw)
        idx = [rng.integers(0, frames[s], size=frames[s]) for s in range(n_subjects)]
        basis, scale = [], []
        for s in range(n_subjects):
            gram_b = grams[s, s][np.ix_(idx[s], idx[s])]
            evals, evecs = np.linalg.eigh(gram_b)
            evals = np.clip(evals[::-1], 0.0, None)
            evecs = evecs[:, ::-1]
            tol = max(evals[0], 1e-300) * gram_b.shape[0] * np.finfo(float).eps
            basis.append(evecs[:, : orders[s]])
            scale.append(np.sqrt(np.maximum(evals[: orders[s]], tol)))
        stack_gram = np.empty((total, total))
        for a in range(n_subjects):
            ra = slice(offsets[a], offsets[a + 1])
            for b in range(a, n_subjects):
                rb = slice(offsets[b], offsets[b + 1])
                cross = grams[a, b][np.ix_(idx[a], idx[b])]
                block = (basis[a].T @ cross @ basis[b]) / np.outer(scale[a], scale[b])
                stack_gram[ra, rb] = block
                if a != b:
                    stack_gram[rb, ra] = block.T
        top = np.linalg.eigvalsh(stack_gram)[-1]
        maxima[draw] = np.sqrt(max(top, 0.0))
    return maxima


def noise_threshold(
    reductions: list[SubjectReduction],
    n_boot: int = DEFAULT_N_BOOT,
    alpha: float = DEFAULT_ALPHA,
    seed: int = 0,
) -> float:
    """(1 - alpha) nearest-rank quantile of the bootstrap noise maxima."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    maxima = bootstrap_max_correlations(reductions, n_boot=n_boot, seed=seed)
    return nearest_rank_quantile(maxima, 1.0 - alpha)


def select_group_subspace(
    decomposition: GroupDecomposition, threshold: float
) -> GroupSubspace:
    """Keep directions whose singular value strictly exceeds the threshold.

    An empty selection (k = 0) is a legal result; ties at the threshold
    are rejected.
    """
    if not threshold > 0.0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    z = decomposition.correlations
    keep = z > threshold
    k = int(keep.sum())
    patterns = decomposition.pattern_basis[:k]
    loadings = decomposition.loading_basis[:, :k] * z[:k]
    residual_ss = float((z[k:] ** 2).sum())
    return GroupSubspace(
        group_patterns=DataMatrix(patterns.copy(), RowKind.PATTERNS),
        canonical_correlations=z[:k].copy(),
        loadings=loadings,
        threshold=float(threshold),
        residual_ss=residual_ss,
        subject_ids=decomposition.subject_ids,
        subject_slices=decomposition.subject_slices,
    )
