"""Command-line entry points.

Subcommands: ``simulate`` (synthetic dataset to disk), ``fit`` (full
estimation run), ``split-half`` (repeated reproducibility analyses),
``threshold`` (standalone re-thresholding of a component matrix), and
``report`` (re-render a manifest). Every run writes a manifest carrying
the exact configuration and input digests, and identical configuration
plus inputs produce byte-identical outputs.

Exit codes: 0 success (including an empty selected subspace), 1 usage or
configuration error, 2 data error, 3 numerical failure.
"""

import argparse
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .data_model import (
    DataMatrix,
    GroupDataset,
    RowKind,
    SubjectSeries,
    read_matrix,
    write_matrix,
)
from .errors import BadDimension, CanicaError, ConfigError, DataError, exit_code
from .pipeline import FitResult, PipelineConfig, fit_group
from .reproducibility import overlap_histogram, split_half
from .simulate import simulate_group
from .thresholding import fit_empirical_null, threshold_map

SUBJECT_GLOB = "subject_*.cnic"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(c) if isinstance(c, (int, bool)) else _fmt(c)
                              for c in row))
    path.write_text("\n".join(lines) + "\n")


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on usage errors; route through ConfigError
    # so usage problems map to exit code 1 like other config problems.
    def error(self, message):
        raise ConfigError(message)


def _config_from_args(args) -> PipelineConfig:
    if getattr(args, "config", None):
        config = PipelineConfig.load(args.config)
    else:
        config = PipelineConfig()
    overrides = {
        "subjects": "S",
        "frames": "n_frames",
        "voxels": "n_voxels",
        "k_true": "k_true",
        "sparsity": "sparsity",
        "sigma_e": "sigma_E",
        "sigma_r": "sigma_R",
        "seed": "seed",
        "max_order": "max_order",
        "order_boots": "order_n_boot",
        "order_quantile": "order_quantile",
        "fixed_order": "fixed_order",
        "cca_boots": "cca_n_boot",
        "alpha": "cca_alpha",
        "nonlinearity": "ica_nonlinearity",
        "tol": "ica_tol",
        "max_iter": "ica_max_iter",
        "restarts": "ica_restarts",
        "p_value": "p_two_sided",
        "repeats": "repeats",
        "input": "input_dir",
        "out": "output_dir",
    }
    updates = {}
    for flag, field in overrides.items():
        value = getattr(args, flag, None)
        if value is not None:
            updates[field] = value
    if updates:
        config = dataclasses.replace(config, **updates)
    return config.validate()


def _load_subjects(input_dir: str | None) -> tuple[GroupDataset, dict[str, str]]:
    if not input_dir:
        raise ConfigError("an input directory is required (--input)")
    root = Path(input_dir)
    if not root.exists():
        raise DataError(f"input path {root} does not exist")
    paths = sorted(root.glob(SUBJECT_GLOB)) if root.is_dir() else [root]
    if not paths:
        raise DataError(f"no {SUBJECT_GLOB} files under {root}")
    subjects, digests = [], {}
    for path in paths:
        matrix = read_matrix(path)
        if matrix.row_kind != RowKind.FRAMES:
            raise BadDimension(f"{path}: subject files must contain frame rows")
        subjects.append(SubjectSeries(subject_id=path.stem, data=matrix))
        digests[path.name] = _sha256(path)
    return GroupDataset(tuple(subjects)), digests


def _digest_outputs(out: Path, names) -> dict[str, str]:
    return {name: _sha256(out / name) for name in sorted(names)}


def cmd_simulate(args) -> int:
    config = _config_from_args(args)
    if not config.output_dir:
        raise ConfigError("an output directory is required (--out)")
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = simulate_group(
        config.S,
        config.n_frames,
        config.n_voxels,
        config.k_true,
        config.sparsity,
        config.sigma_E,
        config.sigma_R,
        config.seed,
    )
    written = []
    for i, subject in enumerate(data.dataset.subjects):
        name = f"subject_{i:03d}.cnic"
        write_matrix(subject.data, out / name)
        written.append(name)
    truth_file = None
    if config.k_true >= 1:
        truth_file = "truth_patterns.cnic"
        write_matrix(data.truth.group_patterns, out / truth_file)
        written.append(truth_file)
    _write_json(
        out / "manifest.json",
        {
            "command": "simulate",
            "config": config.to_dict(),
            "outputs": _digest_outputs(out, written),
            "truth": {"k_true": config.k_true, "patterns_file": truth_file},
        },
    )
    print(f"simulate: wrote {config.S} subjects to {out}")
    return 0


def _write_fit_outputs(out: Path, result: FitResult) -> dict:
    written = []

    def emit_matrix(name, values, kind):
        write_matrix(DataMatrix(values, kind), out / name)
        written.append(name)

    for curve, subject_id in zip(result.stability_curves, result.subject_ids):
        if curve is None:
            continue
        name = f"order_curve_{subject_id}.csv"
        _write_csv(
            out / name,
            ["order", "data_stability", "null_quantile", "passed"],
            zip(curve.orders.tolist(), curve.data_stability,
                curve.null_quantile, curve.passed.tolist()),
        )
        written.append(name)

    summary = {
        "subjects": list(result.subject_ids),
        "selected_orders": list(result.selected_orders),
        "k": result.k,
        "threshold": result.threshold,
        "message": result.message,
    }
    if result.correlations_full is not None:
        thr = result.threshold
        _write_csv(
            out / "scree.csv",
            ["index", "correlation", "correlation_squared", "threshold"],
            (
                (i, z, z * z, thr)
                for i, z in enumerate(result.correlations_full.tolist())
            ),
        )
        written.append("scree.csv")
    if result.subspace is not None and result.k >= 1:
        emit_matrix("group_patterns.cnic", result.subspace.group_patterns.values,
                    RowKind.PATTERNS)
        emit_matrix("loadings.cnic", result.subspace.loadings, RowKind.PATTERNS)
        summary["correlations"] = result.subspace.canonical_correlations.tolist()
        summary["residual_ss"] = result.subspace.residual_ss
    if result.ica is not None:
        emit_matrix("components.cnic", result.ica.components.values,
                    RowKind.COMPONENTS)
        emit_matrix("mixing.cnic", result.ica.mixing, RowKind.PATTERNS)
        summary["ica"] = {
            "converged": result.ica.converged,
            "n_iterations": result.ica.n_iterations,
            "nonlinearity": result.ica.nonlinearity,
        }
        components = result.ica.components.values
        comp_summaries = []
        for tmap, fit in zip(result.thresholded_maps, result.null_fits):
            i = tmap.component_index
            name = f"component_{i:03d}.csv"
            row = components[i]
            zscores = (row - fit.mu) / fit.sigma
            _write_csv(
                out / name,
                ["voxel", "value", "z", "selected"],
                zip(range(row.size), row, zscores, tmap.selected.tolist()),
            )
            written.append(name)
            comp_summaries.append(
                {
                    "component": i,
                    "mu": fit.mu,
                    "sigma": fit.sigma,
                    "z_threshold": fit.z_threshold,
                    "p_two_sided": fit.p_two_sided,
                    "n_selected": tmap.n_selected,
                }
            )
        summary["components"] = comp_summaries
    return {"summary": summary, "written": written}


def cmd_fit(args) -> int:
    config = _config_from_args(args)
    if not config.output_dir:
        raise ConfigError("an output directory is required (--out)")
    dataset, input_digests = _load_subjects(config.input_dir)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = fit_group(dataset, config)
    emitted = _write_fit_outputs(out, result)
    _write_json(
        out / "manifest.json",
        {
            "command": "fit",
            "config": config.to_dict(),
            "inputs": input_digests,
            "outputs": _digest_outputs(out, emitted["written"]),
            "result": emitted["summary"],
        },
    )
    if result.k == 0:
        print(f"fit: {result.message or 'no reproducible subspace'} (k=0)")
    else:
        print(f"fit: retained k={result.k} components, "
              f"threshold={result.threshold:.4f}")
    return 0


def _report_payload(report) -> dict:
    return {
        "mode": report.mode,
        "e": report.e,
        "t": report.t,
        "d": report.d,
        "matched_pairs": [list(p) for p in report.matching.pairs],
        "max_overlap": report.max_overlap.tolist(),
    }


def cmd_split_half(args) -> int:
    config = _config_from_args(args)
    if not config.output_dir:
        raise ConfigError("an output directory is required (--out)")
    dataset, input_digests = _load_subjects(config.input_dir)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    repeats = []
    for r in range(config.repeats):
        result = split_half(dataset, seed=config.seed + r, config=config)
        rep_dir = out / f"repeat_{r:03d}"
        rep_dir.mkdir(exist_ok=True)
        for mode, report in (("raw", result.raw),
                             ("thresholded", result.thresholded)):
            c = report.cross_correlation
            if c.size:
                name = f"repeat_{r:03d}/c_{mode}.cnic"
                write_matrix(DataMatrix(c, RowKind.PATTERNS), out / name)
                written.append(name)
            counts, edges = overlap_histogram(report)
            name = f"repeat_{r:03d}/histogram_{mode}.csv"
            _write_csv(out / name, ["bin_low", "bin_high", "count"],
                       zip(edges[:-1], edges[1:], counts.tolist()))
            written.append(name)
        payload = {
            "half_a": list(result.half_a_ids),
            "half_b": list(result.half_b_ids),
            "k_a": result.fit_a.k,
            "k_b": result.fit_b.k,
            "raw": _report_payload(result.raw),
            "thresholded": _report_payload(result.thresholded),
        }
        name = f"repeat_{r:03d}/summary.json"
        _write_json(out / name, payload)
        written.append(name)
        repeats.append(payload)

    def aggregate(mode):
        es = np.array([rep[mode]["e"] for rep in repeats])
        ts = np.array([rep[mode]["t"] for rep in repeats])
        n = len(repeats)
        sdom = lambda v: float(v.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        return {
            "e_mean": float(es.mean()),
            "e_sdom": sdom(es),
            "t_mean": float(ts.mean()),
            "t_sdom": sdom(ts),
        }

    k_values = sorted(
        set(rep["k_a"] for rep in repeats) | set(rep["k_b"] for rep in repeats)
    )
    k_counts = {
        str(k): sum((rep["k_a"] == k) + (rep["k_b"] == k) for rep in repeats)
        for k in k_values
    }
    summary = {
        "repeats": config.repeats,
        "raw": aggregate("raw"),
        "thresholded": aggregate("thresholded"),
        "component_count_histogram": k_counts,
    }
    _write_json(out / "aggregate.json", summary)
    written.append("aggregate.json")
    _write_json(
        out / "manifest.json",
        {
            "command": "split-half",
            "config": config.to_dict(),
            "inputs": input_digests,
            "outputs": _digest_outputs(out, written),
            "result": summary,
        },
    )
    agg = summary["raw"]
    print(
        f"split-half: {config.repeats} repeats, raw e={agg['e_mean']:.3f} "
        f"({agg['e_sdom']:.3f}), t={agg['t_mean']:.3f} ({agg['t_sdom']:.3f})"
    )
    return 0


def cmd_threshold(args) -> int:
    components_path = Path(args.components)
    matrix = read_matrix(components_path)
    p = args.p_value if args.p_value is not None else 1e-3
    if not 0.0 < p < 1.0:
        raise ConfigError(f"p must be in (0, 1), got {p}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    summaries = []
    for i, row in enumerate(matrix.values):
        fit = fit_empirical_null(row, p_two_sided=p)
        tmap = threshold_map(row, fit, component_index=i)
        name = f"component_{i:03d}.csv"
        zscores = (row - fit.mu) / fit.sigma
        _write_csv(
            out / name,
            ["voxel", "value", "z", "selected"],
            zip(range(row.size), row, zscores, tmap.selected.tolist()),
        )
        written.append(name)
        summaries.append(
            {
                "component": i,
                "mu": fit.mu,
                "sigma": fit.sigma,
                "z_threshold": fit.z_threshold,
                "p_two_sided": fit.p_two_sided,
                "n_selected": tmap.n_selected,
            }
        )
    _write_json(
        out / "manifest.json",
        {
            "command": "threshold",
            "inputs": {components_path.name: _sha256(components_path)},
            "p_two_sided": p,
            "components": summaries,
            "outputs": _digest_outputs(out, written),
        },
    )
    print(f"threshold: processed {matrix.rows} components at p={p}")
    return 0


def cmd_report(args) -> int:
    path = Path(args.manifest)
    if not path.exists():
        raise DataError(f"manifest {path} does not exist")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON: {exc}") from exc
    command = manifest.get("command", "?")
    print(f"command: {command}")
    if "config" in manifest:
        config = manifest["config"]
        print(f"seed: {config.get('seed')}")
    result = manifest.get("result", {})
    if command == "fit":
        print(f"subjects: {len(result.get('subjects', []))}")
        print(f"selected orders: {result.get('selected_orders')}")
        print(f"k: {result.get('k')}")
        print(f"threshold: {result.get('threshold')}")
        if result.get("message"):
            print(f"note: {result['message']}")
        for comp in result.get("components", []):
            print(
                f"  component {comp['component']}: "
                f"n_selected={comp['n_selected']} "
                f"(mu={comp['mu']:.4f}, sigma={comp['sigma']:.4f})"
            )
    elif command == "split-half":
        for mode in ("raw", "thresholded"):
            agg = result.get(mode, {})
            print(
                f"{mode}: e={agg.get('e_mean'):.3f} ({agg.get('e_sdom'):.3f}) "
                f"t={agg.get('t_mean'):.3f} ({agg.get('t_sdom'):.3f})"
            )
        print(f"component counts: {result.get('component_count_histogram')}")
    elif command in ("simulate", "threshold"):
        for name in sorted(manifest.get("outputs", {})):
            print(f"  output: {name}")
    return 0


def _add_common_flags(sub):
    sub.add_argument("--config", help="JSON config file; flags override it")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--out", help="output directory")


def _add_sim_flags(sub):
    sub.add_argument("--subjects", type=int, help="number of subjects (S)")
    sub.add_argument("--frames", type=int)
    sub.add_argument("--voxels", type=int)
    sub.add_argument("--k-true", dest="k_true", type=int)
    sub.add_argument("--sparsity", type=float)
    sub.add_argument("--sigma-e", dest="sigma_e", type=float)
    sub.add_argument("--sigma-r", dest="sigma_r", type=float)


def _add_fit_flags(sub):
    sub.add_argument("--input", help="directory of subject_*.cnic files")
    sub.add_argument("--max-order", dest="max_order", type=int)
    sub.add_argument("--order-boots", dest="order_boots", type=int)
    sub.add_argument("--order-quantile", dest="order_quantile", type=float)
    sub.add_argument("--fixed-order", dest="fixed_order", type=int)
    sub.add_argument("--cca-boots", dest="cca_boots", type=int)
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--nonlinearity", choices=["logcosh", "cube"])
    sub.add_argument("--tol", type=float)
    sub.add_argument("--max-iter", dest="max_iter", type=int)
    sub.add_argument("--restarts", type=int)
    sub.add_argument("--p-value", dest="p_value", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="canica", description=__doc__)
    subs = parser.add_subparsers(dest="subcommand", required=True)

    sim = subs.add_parser("simulate", help="write a synthetic dataset")
    _add_common_flags(sim)
    _add_sim_flags(sim)
    sim.set_defaults(func=cmd_simulate)

    fit = subs.add_parser("fit", help="run the full estimation pipeline")
    _add_common_flags(fit)
    _add_fit_flags(fit)
    fit.set_defaults(func=cmd_fit)

    sh = subs.add_parser("split-half", help="repeated split-half analyses")
    _add_common_flags(sh)
    _add_fit_flags(sh)
    sh.add_argument("--repeats", type=int)
    sh.set_defaults(func=cmd_split_half)

    thr = subs.add_parser("threshold", help="re-threshold a component matrix")
    thr.add_argument("--components", required=True, help="CNIC1 component file")
    thr.add_argument("--p-value", dest="p_value", type=float)
    thr.add_argument("--out", required=True)
    thr.set_defaults(func=cmd_threshold)

    rep = subs.add_parser("report", help="render a manifest summary")
    rep.add_argument("--manifest", required=True)
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    subcommand = "cli"
    try:
        args = parser.parse_args(argv)
        subcommand = args.subcommand
        return args.func(args)
    except ConfigError as exc:
        print(f"error [{subcommand}/config]: {exc}", file=sys.stderr)
        return 1
    except CanicaError as exc:
        print(f"error [{subcommand}]: {exc}", file=sys.stderr)
        return exit_code(exc)
    except OSError as exc:
        print(f"error [{subcommand}/io]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
