"""Command-line interface.

Subcommands: simulate (Monte Carlo batches), decompose (full pipeline on
externally supplied weight files), detect, refine, and tune (small grid
search for the penalty constants). All runs are deterministic given their
flags; CLAIR_SEED provides the seed when --seed is absent.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import textio
from .contrast import all_pairs, build_contrast
from .decomposition import estimate_rank_largest_gap, row_projector
from .detection import DetectionConfig, vote_set
from .exceptions import (
    ClairError,
    ConfigError,
    InsufficientClientsError,
    MatrixFormatError,
)
from .metrics import summarize_method
from .pipeline import ClairConfig, run_pipeline
from .refinement import refine
from .simulation import METHODS, ReplicateReport, SimConfig, run_batch
from .solver import solve

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}")


def _parse_tau(text: str) -> float | None:
    if text == "gap":
        return None
    if text.startswith("fixed:"):
        try:
            return float(text.split(":", 1)[1])
        except ValueError:
            pass
    raise argparse.ArgumentTypeError(f"expected 'gap' or 'fixed:<value>', got {text!r}")


def _parse_omega(text: str) -> np.ndarray | None:
    if text == "uniform":
        return None
    return np.asarray(_parse_float_list(text))


def _parse_rank(text: str) -> int | str:
    if text == "auto":
        return "auto"
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {text!r}")


def _parse_formats(text: str) -> tuple[str, ...]:
    formats = tuple(v.strip() for v in text.split(",") if v.strip())
    bad = [f for f in formats if f not in ("csv", "json")]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown report format(s): {bad}")
    return formats or ("csv", "json")


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("CLAIR_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"CLAIR_SEED must be an integer, got {env!r}")
    return 0


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lambda-l-c1", type=float, default=1.0,
                        help="constant c1 in lambda_l = c1/sqrt(K)")
    parser.add_argument("--lambda-s-c2", type=float, default=1.0,
                        help="constant c2 in lambda_s = c2*K^-1.5")
    parser.add_argument("--omega", type=_parse_omega, default=None,
                        help="'uniform' (1/K) or comma-separated block weights")
    parser.add_argument("--step", default="auto",
                        help="step size, or 'auto' for 1/(2 max omega)")
    parser.add_argument("--max-iters", type=int, default=2000)
    parser.add_argument("--tol", type=float, default=1e-9)
    parser.add_argument("--rank", type=_parse_rank, default=2,
                        help="subspace rank; decompose also accepts 'auto' "
                             "(largest-relative-gap heuristic)")
    parser.add_argument("--alpha", type=float, default=0.5)
    parser.add_argument("--tau", type=_parse_tau, default=None,
                        help="'gap' (default) or 'fixed:<value>'")


def _clair_config(args: argparse.Namespace) -> ClairConfig:
    step = args.step
    if step != "auto":
        step = float(step)
    c1, c2 = args.lambda_l_c1, args.lambda_s_c2
    tuned = getattr(args, "tuned", None)
    if tuned:
        chosen = json.loads(Path(tuned).read_text())
        c1, c2 = float(chosen["lambda_c1"]), float(chosen["lambda_c2"])
    rank = args.rank
    if rank == "auto":
        if args.command != "decompose":
            raise ConfigError("--rank auto is only supported by decompose")
        rank = 1  # placeholder; decompose estimates the rank before the run
    return ClairConfig(
        lambda_c1=c1,
        lambda_c2=c2,
        omega=args.omega,
        step=step,
        max_iters=args.max_iters,
        tol=args.tol,
        rank=rank,
        alpha=args.alpha,
        tau=args.tau,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clair",
        description="Collaborative low-rank refinement of client weight matrices",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run Monte Carlo replicates")
    sim.add_argument("--p", type=int, default=10)
    sim.add_argument("--q", type=int, default=10)
    sim.add_argument("--n", type=int, default=100)
    sim.add_argument("--K", dest="clients", type=_parse_int_list, default=[10],
                     help="client count, or comma-separated counts to sweep")
    sim.add_argument("--reps", type=int, default=100)
    sim.add_argument("--contamination-frac", type=float, default=0.4)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--jobs", type=int, default=1)
    sim.add_argument("--out", type=Path, required=True)
    sim.add_argument("--format", type=_parse_formats, default=("csv", "json"))
    sim.add_argument("--tuned", type=Path, default=None,
                     help="JSON file with tuned lambda constants")
    _add_solver_flags(sim)

    dec = sub.add_parser("decompose", help="run the pipeline on weight files")
    dec.add_argument("--input", type=Path, required=True,
                     help="directory with client_<k>.mat files")
    dec.add_argument("--out", type=Path, required=True)
    _add_solver_flags(dec)

    det = sub.add_parser("detect", help="vote on a stacked orthogonal component")
    det.add_argument("--input", type=Path, required=True,
                     help="stacked matrix file with the orthogonal component")
    det.add_argument("--out", type=Path, required=True)
    det.add_argument("--alpha", type=float, default=0.5)
    det.add_argument("--tau", type=_parse_tau, default=None)

    ref = sub.add_parser("refine", help="refine weights with a known projector and set")
    ref.add_argument("--input", type=Path, required=True,
                     help="directory with client_<k>.mat files")
    ref.add_argument("--projector", type=Path, required=True)
    ref.add_argument("--set", dest="set_file", type=Path, required=True,
                     help="detection JSON naming the collaborative set")
    ref.add_argument("--out", type=Path, required=True)

    tune = sub.add_parser("tune", help="grid-search the penalty constants")
    tune.add_argument("--p", type=int, default=10)
    tune.add_argument("--q", type=int, default=10)
    tune.add_argument("--n", type=int, default=100)
    tune.add_argument("--K", dest="clients", type=int, default=10)
    tune.add_argument("--pilot-reps", type=int, default=10)
    tune.add_argument("--contamination-frac", type=float, default=0.4)
    tune.add_argument("--grid-c1", type=_parse_float_list, default=None)
    tune.add_argument("--grid-c2", type=_parse_float_list, default=None)
    tune.add_argument("--seed", type=int, default=None)
    tune.add_argument("--jobs", type=int, default=1)
    tune.add_argument("--out", type=Path, required=True)
    _add_solver_flags(tune)
    return parser


def _load_client_weights(directory: Path) -> list[np.ndarray]:
    files = sorted(directory.glob("client_*.mat"))
    if not files:
        raise ConfigError(f"no client_<k>.mat files found in {directory}")
    by_id: dict[int, Path] = {}
    for path in files:
        stem = path.stem.removeprefix("client_")
        try:
            by_id[int(stem)] = path
        except ValueError:
            raise ConfigError(f"unexpected client file name {path.name}")
    expected = list(range(len(by_id)))
    if sorted(by_id) != expected:
        raise ConfigError(
            f"client files must be numbered 0..{len(by_id) - 1}, got {sorted(by_id)}"
        )
    weights = [textio.load_matrix(by_id[k]) for k in expected]
    shapes = {w.shape for w in weights}
    if len(shapes) > 1:
        raise ConfigError(f"client files disagree on shape: {sorted(shapes)}")
    return weights


def _replicate_row(n_clients: int, report: ReplicateReport) -> dict:
    row = {
        "K": n_clients,
        "replicate": report.replicate,
        "failed": int(report.error is not None),
        "failure": report.error or "",
        "contamination_scale": _fmt(report.contamination_scale),
        "tau_used": _fmt(report.tau_used),
        "projector_error": _fmt(report.projector_error),
        "detection_accuracy": _fmt(report.detection_accuracy),
        "contamination_recall": _fmt(report.contamination_recall),
        "solver_iterations": report.solver_iterations,
        "solver_converged": int(report.solver_converged),
    }
    for method in METHODS:
        ok = report.error is None
        row[f"{method}_mean"] = _fmt(report.mean_error(method)) if ok else ""
        row[f"{method}_benign_mean"] = (
            _fmt(report.benign_mean_error(method)) if ok else ""
        )
    return row


def _summaries(reports: list[ReplicateReport]) -> dict:
    good = [r for r in reports if r.error is None]
    out: dict = {"replicates": len(reports), "failed": len(reports) - len(good)}
    if not good:
        return out
    methods = {}
    for method in METHODS:
        summary = summarize_method(
            method,
            [np.asarray(r.method_errors[method]) for r in good],
            [r.benign for r in good],
        )
        methods[method] = summary.to_json_dict()
    out["methods"] = methods
    out["detection_accuracy_mean"] = float(
        np.mean([r.detection_accuracy for r in good])
    )
    out["contamination_recall_mean"] = float(
        np.mean([r.contamination_recall for r in good])
    )
    out["projector_error_median"] = float(
        np.median([r.projector_error for r in good])
    )
    return out


def _cmd_simulate(args: argparse.Namespace) -> int:
    clair_cfg = _clair_config(args)
    seed = _resolve_seed(args.seed)
    out_dir: Path = args.out
    out_dir.mkdir(parents=True, exist_ok=True)

    all_rows: list[dict] = []
    proj_rows: list[dict] = []
    summary: dict = {
        "seed": seed,
        "regime": {"p": args.p, "q": args.q, "n": args.n},
        "clients": {},
    }
    total = 0
    failed = 0
    for n_clients in args.clients:
        sim_cfg = SimConfig(
            p=args.p,
            q=args.q,
            n=args.n,
            n_clients=n_clients,
            rank=args.rank,
            contamination_frac=args.contamination_frac,
            replicates=args.reps,
            base_seed=seed,
        )
        reports = run_batch(sim_cfg, clair_cfg, jobs=args.jobs)
        total += len(reports)
        failed += sum(1 for r in reports if r.error is not None)
        for report in reports:
            all_rows.append(_replicate_row(n_clients, report))
            if report.error is None:
                proj_rows.append(
                    {
                        "K": n_clients,
                        "replicate": report.replicate,
                        "projector_error": _fmt(report.projector_error),
                    }
                )
        summary["clients"][str(n_clients)] = _summaries(reports)

    if "csv" in args.format:
        with open(out_dir / "replicates.csv", "w", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=list(all_rows[0].keys()))
            writer.writeheader()
            writer.writerows(all_rows)
        with open(out_dir / "projector_by_k.csv", "w", newline="") as handle:
            writer = csv.DictWriter(
                handle, fieldnames=["K", "replicate", "projector_error"]
            )
            writer.writeheader()
            writer.writerows(proj_rows)
        _write_long_summary(out_dir / "summary.csv", args, summary)
    if "json" in args.format:
        with open(out_dir / "summary.json", "w") as handle:
            json.dump(summary, handle, indent=2, sort_keys=True)
            handle.write("\n")

    for n_clients in args.clients:
        block = summary["clients"][str(n_clients)]
        print(f"K={n_clients} ({block['replicates']} replicates, "
              f"{block['failed']} failed)")
        if "methods" in block:
            for method in METHODS:
                stats = block["methods"][method]
                print(f"  {method:>14}: mean {stats['mean_all']:.3f} "
                      f"(benign {stats['mean_benign']:.3f})")
            print(f"  detection accuracy {block['detection_accuracy_mean']:.3f}, "
                  f"recall {block['contamination_recall_mean']:.3f}")
    if total and failed / total > 0.1:
        print(f"error: {failed}/{total} replicates failed", file=sys.stderr)
        return RUNTIME_ERROR
    return 0


def _write_long_summary(path: Path, args: argparse.Namespace, summary: dict) -> None:
    regime = f"p{args.p}_q{args.q}_n{args.n}"
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["regime", "K", "method", "stat", "value"])
        for n_clients, block in summary["clients"].items():
            if "methods" not in block:
                continue
            for method in METHODS:
                stats = block["methods"][method]
                for stat in ("mean_all", "median_all", "sd_all",
                             "mean_benign", "median_benign", "sd_benign"):
                    writer.writerow(
                        [regime, n_clients, method, stat, _fmt(stats[stat])]
                    )
            for stat in ("detection_accuracy_mean", "contamination_recall_mean",
                         "projector_error_median"):
                writer.writerow([regime, n_clients, "detection", stat,
                                 _fmt(block[stat])])


def _cmd_decompose(args: argparse.Namespace) -> int:
    clair_cfg = _clair_config(args)
    weights = _load_client_weights(args.input)
    if args.rank == "auto":
        d_hat = build_contrast(weights)
        l_hat, _, _ = solve(d_hat, clair_cfg.solver_config(len(weights)))
        spectrum = np.linalg.svd(l_hat.data, compute_uv=False)
        clair_cfg = replace(clair_cfg, rank=estimate_rank_largest_gap(spectrum))
        print(f"estimated rank: {clair_cfg.rank}")
    result = run_pipeline(weights, clair_cfg)
    out_dir: Path = args.out
    out_dir.mkdir(parents=True, exist_ok=True)

    textio.save_stacked(out_dir / "l_hat.mat", result.decomposition.l_hat)
    textio.save_stacked(out_dir / "s_hat.mat", result.decomposition.s_hat)
    textio.save_stacked(out_dir / "s_orth.mat", result.decomposition.d_orthogonal)
    textio.save_matrix(out_dir / "projector.mat", result.decomposition.projector.matrix)
    with open(out_dir / "orthogonal_block_norms.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["flat", "j", "k", "norm"])
        norms = result.detection.block_norms
        for pair in all_pairs(result.contrast.n_clients):
            writer.writerow([pair.flat, pair.j, pair.k, _fmt(norms[pair.flat])])
    with open(out_dir / "detection.json", "w") as handle:
        json.dump(result.detection.to_json_dict(), handle, indent=2, sort_keys=True)
        handle.write("\n")
    trace = result.decomposition.trace
    with open(out_dir / "trace.json", "w") as handle:
        json.dump(
            {
                "iterations": trace.iterations,
                "converged": trace.converged,
                "residual_norm": trace.residual_norm,
                "objectives": trace.objectives.tolist(),
            },
            handle,
            indent=2,
            sort_keys=True,
        )
        handle.write("\n")
    refined_dir = out_dir / "refined"
    refined_dir.mkdir(exist_ok=True)
    for k in range(len(weights)):
        textio.save_matrix(
            refined_dir / f"client_{k}.mat", result.refinement.weight(k)
        )
    kept = ", ".join(str(k) for k in result.detection.collaborative_set) or "(none)"
    print(f"collaborative set: {kept}")
    print(f"solver iterations: {trace.iterations} (converged: {trace.converged})")
    return 0


def _cmd_detect(args: argparse.Namespace) -> int:
    stacked = textio.load_stacked(args.input)
    cfg = DetectionConfig(alpha=args.alpha, tau=args.tau)
    result = vote_set(stacked, cfg)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w") as handle:
        json.dump(result.to_json_dict(), handle, indent=2, sort_keys=True)
        handle.write("\n")
    kept = ", ".join(str(k) for k in result.collaborative_set) or "(none)"
    print(f"collaborative set: {kept} (tau={result.tau_used:.6g})")
    return 0


def _cmd_refine(args: argparse.Namespace) -> int:
    weights = _load_client_weights(args.input)
    proj_matrix = textio.load_matrix(args.projector)
    detection = json.loads(args.set_file.read_text())
    members = [int(k) for k in detection["collaborative_set"]]
    rank = int(round(float(np.trace(proj_matrix))))
    projector = row_projector(proj_matrix, max(rank, 1))
    d_hat = build_contrast(weights)
    result = refine(weights, d_hat, projector, members)
    out_dir: Path = args.out
    out_dir.mkdir(parents=True, exist_ok=True)
    for k in range(len(weights)):
        textio.save_matrix(out_dir / f"client_{k}.mat", result.weight(k))
    return 0


def _cmd_tune(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args.seed)
    grid_c1 = args.grid_c1 or [0.5, 1.0, 2.0]
    grid_c2 = args.grid_c2 or [2.5, 5.0, 10.0]
    sim_cfg = SimConfig(
        p=args.p,
        q=args.q,
        n=args.n,
        n_clients=args.clients,
        rank=args.rank,
        contamination_frac=args.contamination_frac,
        replicates=args.pilot_reps,
        base_seed=seed,
    )
    base_cfg = _clair_config(args)
    rows = []
    for c1 in grid_c1:
        for c2 in grid_c2:
            reports = run_batch(sim_cfg, base_cfg.with_constants(c1, c2), args.jobs)
            good = [r for r in reports if r.error is None]
            if not good:
                continue
            accuracy = float(np.mean([r.detection_accuracy for r in good]))
            clair_err = float(np.mean([r.mean_error("clair") for r in good]))
            rows.append({
                "lambda_c1": c1,
                "lambda_c2": c2,
                "detection_accuracy": accuracy,
                "clair_mean_error": clair_err,
                "failed": len(reports) - len(good),
            })
    if not rows:
        print("error: every grid point failed", file=sys.stderr)
        return RUNTIME_ERROR
    best = min(rows, key=lambda r: (-r["detection_accuracy"], r["clair_mean_error"]))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w") as handle:
        json.dump({"grid": rows, **best}, handle, indent=2, sort_keys=True)
        handle.write("\n")
    print(f"selected c1={best['lambda_c1']:g} c2={best['lambda_c2']:g} "
          f"(accuracy {best['detection_accuracy']:.3f}, "
          f"clair error {best['clair_mean_error']:.3f})")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "decompose": _cmd_decompose,
    "detect": _cmd_detect,
    "refine": _cmd_refine,
    "tune": _cmd_tune,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (
        ConfigError,
        MatrixFormatError,
        InsufficientClientsError,
        FileNotFoundError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except ClairError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
