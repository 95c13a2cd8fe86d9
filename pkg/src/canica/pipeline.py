"""End-to-end estimation: orders, whitening, group subspace, ICA, maps.

This module owns the run configuration and the ``fit_group`` orchestration
used both by the command line and by the split-half harness. Per-subject
work fans out over a thread pool (the heavy lifting happens inside LAPACK,
which releases the GIL); results are keyed by subject index and all
randomness is derived from the configured seed, so output is identical
regardless of worker count. ``CANICA_THREADS`` caps the pool.
"""

import dataclasses
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import streams
from .data_model import GroupDataset, standardize
from .errors import BadDimension, ConfigError
from .group_level import (
    GroupSubspace,
    group_cca,
    noise_threshold,
    select_group_subspace,
)
from .source_separation import IcaDecomposition, fastica
from .subject_level import (
    OrderSelectionCurve,
    SubjectReduction,
    order_stability,
    svd_reduce,
)
from .thresholding import NullFit, ThresholdedMap, fit_empirical_null, threshold_map

NO_SUBSPACE_MESSAGE = "no reproducible subspace"


@dataclass
class PipelineConfig:
    """Flat, file-round-trippable configuration for every stage.

    Simulation keys use the external spelling (S, n_frames, n_voxels,
    k_true, sparsity, sigma_E, sigma_R, seed) so config files read the
    same as the CLI documentation.
    """

    # simulation
    S: int = 12
    n_frames: int = 200
    n_voxels: int = 5000
    k_true: int = 10
    sparsity: float = 0.05
    sigma_E: float = 0.5
    sigma_R: float = 0.1
    seed: int = 0
    # subject-level order selection
    max_order: int = 20
    order_n_boot: int = 100
    order_quantile: float = 0.95
    fixed_order: int | None = None
    # group-level selection
    cca_n_boot: int = 100
    cca_alpha: float = 0.05
    # source separation
    ica_nonlinearity: str = "logcosh"
    ica_tol: float = 1e-6
    ica_max_iter: int = 200
    ica_restarts: int = 5
    # map thresholding
    p_two_sided: float = 1e-3
    # split-half
    repeats: int = 1
    # paths
    input_dir: str | None = None
    output_dir: str | None = None

    def validate(self) -> "PipelineConfig":
        counts = {
            "S": self.S,
            "n_frames": self.n_frames,
            "n_voxels": self.n_voxels,
            "max_order": self.max_order,
            "order_n_boot": self.order_n_boot,
            "cca_n_boot": self.cca_n_boot,
            "ica_max_iter": self.ica_max_iter,
            "ica_restarts": self.ica_restarts,
            "repeats": self.repeats,
        }
        for name, value in counts.items():
            if not (isinstance(value, int) and value >= 1):
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        fractions = {
            "order_quantile": self.order_quantile,
            "cca_alpha": self.cca_alpha,
            "p_two_sided": self.p_two_sided,
        }
        for name, value in fractions.items():
            if not (isinstance(value, (int, float)) and 0.0 < value < 1.0):
                raise ConfigError(f"{name} must lie in (0, 1), got {value!r}")
        if not 0.0 < self.sparsity <= 1.0:
            raise ConfigError(f"sparsity must lie in (0, 1], got {self.sparsity!r}")
        if self.k_true < 0:
            raise ConfigError(f"k_true must be nonnegative, got {self.k_true!r}")
        if self.sigma_E < 0 or self.sigma_R < 0:
            raise ConfigError("sigma_E and sigma_R must be nonnegative")
        if self.seed < 0:
            raise ConfigError(f"seed must be nonnegative, got {self.seed!r}")
        if self.fixed_order is not None and self.fixed_order < 1:
            raise ConfigError("fixed_order must be a positive integer or null")
        if self.ica_nonlinearity not in ("logcosh", "cube"):
            raise ConfigError(
                f"ica_nonlinearity must be 'logcosh' or 'cube', "
                f"got {self.ica_nonlinearity!r}"
            )
        if not self.ica_tol > 0:
            raise ConfigError(f"ica_tol must be positive, got {self.ica_tol!r}")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data).validate()

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)


@dataclass
class FitResult:
    """Everything one end-to-end fit produced, plus diagnostics."""

    subject_ids: tuple[str, ...]
    selected_orders: tuple[int, ...]
    stability_curves: tuple[OrderSelectionCurve | None, ...]
    n_voxels: int
    reductions: tuple[SubjectReduction, ...] = ()
    correlations_full: np.ndarray | None = None
    threshold: float | None = None
    subspace: GroupSubspace | None = None
    ica: IcaDecomposition | None = None
    null_fits: tuple[NullFit, ...] = ()
    thresholded_maps: tuple[ThresholdedMap, ...] = ()
    message: str = ""
    config: PipelineConfig = field(default_factory=PipelineConfig)

    @property
    def k(self) -> int:
        return 0 if self.subspace is None else self.subspace.k


def worker_count(n_tasks: int) -> int:
    """Pool size for per-subject fan-out, capped by CANICA_THREADS."""
    env = os.environ.get("CANICA_THREADS")
    if env is None:
        cap = os.cpu_count() or 1
    else:
        try:
            cap = int(env)
        except ValueError:
            raise ConfigError(f"CANICA_THREADS must be an integer, got {env!r}")
        if cap < 1:
            raise ConfigError(f"CANICA_THREADS must be >= 1, got {cap}")
    return max(1, min(cap, n_tasks))


def fit_group(dataset: GroupDataset, config: PipelineConfig) -> FitResult:
    """Run the full estimation pipeline on one group of subjects."""
    config.validate()
    subjects = [standardize(s) for s in dataset.subjects]
    n_voxels = dataset.n_voxels

    def subject_stage(index):
        series = subjects[index]
        limit = min(series.n_frames, series.n_voxels) // 2
        if config.fixed_order is not None:
            order = min(config.fixed_order, min(series.n_frames, series.n_voxels))
            curve = None
        else:
            max_order = min(config.max_order, limit)
            if max_order < 1:
                raise BadDimension(
                    f"subject {series.subject_id!r} is too small for order selection"
                )
            curve = order_stability(
                series,
                max_order,
                n_boot=config.order_n_boot,
                quantile=config.order_quantile,
                seed=streams.derive_seed(config.seed, streams.SUBJECT_ORDER_SEED, index),
            )
            order = curve.selected
        reduction = svd_reduce(series, order) if order >= 1 else None
        if reduction is not None and curve is not None:
            reduction = dataclasses.replace(reduction, stability_curve=curve)
        return order, curve, reduction

    with ThreadPoolExecutor(max_workers=worker_count(len(subjects))) as pool:
        staged = list(pool.map(subject_stage, range(len(subjects))))
    orders = tuple(s[0] for s in staged)
    curves = tuple(s[1] for s in staged)
    reductions = tuple(s[2] for s in staged if s[2] is not None)

    base = FitResult(
        subject_ids=tuple(s.subject_id for s in subjects),
        selected_orders=orders,
        stability_curves=curves,
        n_voxels=n_voxels,
        reductions=reductions,
        config=config,
    )
    if len(reductions) < 2:
        base.message = NO_SUBSPACE_MESSAGE
        return base

    decomposition = group_cca(list(reductions))
    threshold = noise_threshold(
        list(reductions),
        n_boot=config.cca_n_boot,
        alpha=config.cca_alpha,
        seed=streams.derive_seed(config.seed, streams.PIPELINE_CCA_SEED),
    )
    subspace = select_group_subspace(decomposition, threshold)
    base.correlations_full = decomposition.correlations
    base.threshold = threshold
    base.subspace = subspace
    if subspace.k == 0:
        base.message = NO_SUBSPACE_MESSAGE
        return base

    ica = fastica(
        subspace.group_patterns,
        nonlinearity=config.ica_nonlinearity,
        tol=config.ica_tol,
        max_iter=config.ica_max_iter,
        seed=streams.derive_seed(config.seed, streams.PIPELINE_ICA_SEED),
        restarts=config.ica_restarts,
    )
    fits, maps = [], []
    for i, row in enumerate(ica.components.values):
        fit = fit_empirical_null(row, p_two_sided=config.p_two_sided)
        fits.append(fit)
        maps.append(threshold_map(row, fit, component_index=i))
    base.ica = ica
    base.null_fits = tuple(fits)
    base.thresholded_maps = tuple(maps)
    return base
