"""Command-line pipeline: load or generate a bundle, train, cluster, report.

Subcommands:
    cluster      one full run in the selected mode
    sweep        one run per value along a hyperparameter axis
    ablate       content-only vs fused comparison with identical seeds
    make-bundle  materialize a synthetic bundle directory

Every run writes its artifacts under a directory named by a hash of the
run configuration, so re-running identical flags reproduces identical
files.  Output files never contain timestamps; wall-clock goes to stdout.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from dualssc import __version__
from dualssc.feature_io import FeatureBundle, load_bundle
from dualssc.knn_graph import write_edge_list
from dualssc.metrics import acc, format_neighbor_report, metrics_report, neighbor_report, nmi
from dualssc.report import render_affinity_heatmap, render_loss_curves
from dualssc.self_expressive import TrainConfig, train
from dualssc.spectral import build_affinity, spectral_cluster, write_affinity_csv, write_affinity_pgm
from dualssc.synthetic import parse_spec_string, write_bundle

SWEEP_DEFAULTS = {
    "K": [3, 5, 8, 10, 15, 20],
    "lambda1": [0.01, 0.1, 1.0, 10.0, 100.0],
    "lambda2": [0.01, 0.1, 1.0, 10.0, 100.0],
}


def _add_source_flags(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--features", metavar="DIR", help="feature bundle directory")
    source.add_argument(
        "--synthetic",
        metavar="SPEC",
        help="synthetic bundle: 'default' or d=..,r=..,clusters=..,per=..,sigma=..,corruption=..",
    )


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, default=10, help="KNN neighbor count (default 10)")
    parser.add_argument("--lambda1", type=float, default=1.0, help="content reconstruction weight")
    parser.add_argument("--lambda2", type=float, default=1.0, help="structure reconstruction weight")
    parser.add_argument("--lr", type=float, default=1e-5, help="Adam learning rate (default 1e-5)")
    parser.add_argument("--epochs", type=int, default=2000, help="training epochs (default 2000)")
    parser.add_argument("--clusters", type=int, default=10, help="target cluster count")
    parser.add_argument("--seed", type=int, default=0, help="run seed (also seeds synthetic data)")
    parser.add_argument(
        "--mode",
        choices=["fused", "content_only", "raw_baseline"],
        default="fused",
        help="pipeline mode",
    )
    parser.add_argument("--out", metavar="DIR", default="runs", help="output base directory")
    parser.add_argument("--emit-affinity", action="store_true", help="write affinity PGM/CSV/PNG")
    parser.add_argument("--emit-edges", action="store_true", help="write per-stream KNN edge lists")
    parser.add_argument("--neighbors", type=int, default=5, help="top/bottom size in neighbors.txt")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualssc",
        description="Subspace clustering from fused content and graph-structure self-expression.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    cluster = sub.add_parser("cluster", help="run the full pipeline once")
    _add_source_flags(cluster)
    _add_run_flags(cluster)

    sweep = sub.add_parser("sweep", help="run the pipeline along one hyperparameter axis")
    _add_source_flags(sweep)
    _add_run_flags(sweep)
    sweep.add_argument("--axis", choices=["K", "lambda1", "lambda2"], required=True)
    sweep.add_argument(
        "--values",
        help="comma-separated axis values (defaults to the reference grid)",
    )

    ablate = sub.add_parser("ablate", help="content_only vs fused with identical seeds")
    _add_source_flags(ablate)
    _add_run_flags(ablate)

    make = sub.add_parser("make-bundle", help="write a synthetic bundle directory")
    make.add_argument("--synthetic", metavar="SPEC", required=True)
    make.add_argument("--seed", type=int, default=None, help="override the generator seed")
    make.add_argument("--out", metavar="DIR", required=True)
    return parser


def _resolve_bundle(args) -> tuple[FeatureBundle, dict]:
    if args.features:
        bundle = load_bundle(args.features)
        source = {"features": args.features}
    else:
        spec = parse_spec_string(args.synthetic)
        if "seed=" not in args.synthetic:
            from dataclasses import replace

            spec = replace(spec, seed=args.seed)
        from dualssc.synthetic import generate

        bundle = generate(spec)
        source = {"synthetic": args.synthetic, "synthetic_seed": spec.seed}
    return bundle, source


def _config_payload(source: dict, config: TrainConfig, extras: dict) -> dict:
    payload = {
        "source": source,
        "k": config.k,
        "lambda1": config.lambda1,
        "lambda2": config.lambda2,
        "lr": config.lr,
        "epochs": config.epochs,
        "clusters": config.clusters,
        "seed": config.seed,
        "mode": config.mode,
    }
    payload.update(extras)
    return payload


def _run_dir(out: str, payload: dict) -> Path:
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:12]
    return Path(out) / f"run-{digest}"


def _execute_run(bundle: FeatureBundle, source: dict, config: TrainConfig, args) -> dict:
    """Train, cluster, evaluate and write one run directory; returns the report."""
    payload = _config_payload(
        source,
        config,
        {"emit_affinity": bool(args.emit_affinity), "neighbors": int(args.neighbors)},
    )
    run_dir = _run_dir(args.out, payload)
    run_dir.mkdir(parents=True, exist_ok=True)
    report = {"config": payload, "status": "ok", "artifacts": {}, "acc": None, "nmi": None}

    def fail(exc: Exception) -> dict:
        report["status"] = "error"
        report["error"] = f"{type(exc).__name__}: {exc}"
        (run_dir / "run_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        raise exc

    result = train(bundle, config)
    try:
        fused_coeffs = result.state.c_fused
        affinity = build_affinity(fused_coeffs)
        clustering = spectral_cluster(affinity, config.clusters, config.seed)

        acc_value = nmi_value = None
        if bundle.labels is not None:
            acc_value = acc(bundle.labels, clustering.assignments)
            nmi_value = nmi(bundle.labels, clustering.assignments)

        lines = ["index,label"] + [
            f"{i},{int(label)}" for i, label in enumerate(clustering.assignments)
        ]
        (run_dir / "assignments.csv").write_text("\n".join(lines) + "\n")
        report["artifacts"]["assignments"] = "assignments.csv"

        (run_dir / "metrics.json").write_text(
            metrics_report(acc_value, nmi_value, config.clusters, bundle.n, config.mode)
        )
        report["artifacts"]["metrics"] = "metrics.json"

        result.trace.to_csv(run_dir / "loss.csv")
        report["artifacts"]["loss_trace"] = "loss.csv"
        render_loss_curves(result.trace, run_dir / "loss_curve.png")
        report["artifacts"]["loss_curve"] = "loss_curve.png"

        n = bundle.n
        anchors = sorted(set([0, n // 2, n - 1]))
        records = neighbor_report(fused_coeffs, anchors, args.neighbors)
        (run_dir / "neighbors.txt").write_text(format_neighbor_report(records))
        report["artifacts"]["neighbors"] = "neighbors.txt"

        if args.emit_affinity:
            write_affinity_pgm(affinity, run_dir / "affinity.pgm")
            write_affinity_csv(affinity, run_dir / "affinity.csv")
            render_affinity_heatmap(affinity, run_dir / "affinity.png")
            report["artifacts"]["affinity_pgm"] = "affinity.pgm"
            report["artifacts"]["affinity_csv"] = "affinity.csv"
            report["artifacts"]["affinity_png"] = "affinity.png"

        if args.emit_edges and result.graphs is not None:
            for idx, graph in zip(bundle.layers, result.graphs):
                name = f"edges_layer_{idx}.txt"
                write_edge_list(graph.adjacency, run_dir / name)
                report["artifacts"][f"edges_layer_{idx}"] = name

        report["acc"] = acc_value
        report["nmi"] = nmi_value
        report["degenerate_embedding"] = bool(clustering.degenerate)
        (run_dir / "run_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    except Exception as exc:  # training succeeded: still emit the report
        fail(exc)
    report["run_dir"] = str(run_dir)
    return report


def cmd_cluster(args) -> int:
    if args.clusters < 2:
        print("error: clusters must be >= 2", file=sys.stderr)
        return 2
    bundle, source = _resolve_bundle(args)
    config = TrainConfig(
        k=args.k,
        lambda1=args.lambda1,
        lambda2=args.lambda2,
        lr=args.lr,
        epochs=args.epochs,
        seed=args.seed,
        clusters=args.clusters,
        mode=args.mode,
    )
    started = time.perf_counter()
    report = _execute_run(bundle, source, config, args)
    elapsed = time.perf_counter() - started
    print(f"run dir: {report['run_dir']}")
    if report["acc"] is not None:
        print(f"acc={report['acc']:.4f} nmi={report['nmi']:.4f} mode={config.mode}")
    print(f"completed in {elapsed:.2f}s")
    return 0


def cmd_sweep(args) -> int:
    if args.clusters < 2:
        print("error: clusters must be >= 2", file=sys.stderr)
        return 2
    if args.values is not None:
        raw = [v for v in args.values.split(",") if v.strip()]
        if not raw:
            print("error: empty axis value list", file=sys.stderr)
            return 2
        values = [float(v) for v in raw]
    else:
        values = list(SWEEP_DEFAULTS[args.axis])
    bundle, source = _resolve_bundle(args)

    rows = []
    started = time.perf_counter()
    for value in values:
        config = TrainConfig(
            k=int(value) if args.axis == "K" else args.k,
            lambda1=value if args.axis == "lambda1" else args.lambda1,
            lambda2=value if args.axis == "lambda2" else args.lambda2,
            lr=args.lr,
            epochs=args.epochs,
            seed=args.seed,
            clusters=args.clusters,
            mode=args.mode,
        )
        report = _execute_run(bundle, source, config, args)
        rows.append((value, report["acc"], report["nmi"]))
        print(f"{args.axis}={value:g}: acc={_fmt(report['acc'])} nmi={_fmt(report['nmi'])}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["axis,value,acc,nmi"]
    for value, a, m in rows:
        lines.append(f"{args.axis},{value:g},{_fmt(a)},{_fmt(m)}")
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    print(f"sweep table: {out / 'sweep.csv'}")
    print(f"completed in {time.perf_counter() - started:.2f}s")
    return 0


def cmd_ablate(args) -> int:
    if args.clusters < 2:
        print("error: clusters must be >= 2", file=sys.stderr)
        return 2
    bundle, source = _resolve_bundle(args)
    rows = []
    started = time.perf_counter()
    for mode in ("content_only", "fused"):
        config = TrainConfig(
            k=args.k,
            lambda1=args.lambda1,
            lambda2=args.lambda2,
            lr=args.lr,
            epochs=args.epochs,
            seed=args.seed,
            clusters=args.clusters,
            mode=mode,
        )
        report = _execute_run(bundle, source, config, args)
        rows.append((mode, report["acc"], report["nmi"]))
        print(f"{mode}: acc={_fmt(report['acc'])} nmi={_fmt(report['nmi'])}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["mode,acc,nmi"] + [f"{mode},{_fmt(a)},{_fmt(m)}" for mode, a, m in rows]
    (out / "ablation.csv").write_text("\n".join(lines) + "\n")
    print(f"ablation table: {out / 'ablation.csv'}")
    print(f"completed in {time.perf_counter() - started:.2f}s")
    return 0


def cmd_make_bundle(args) -> int:
    spec = parse_spec_string(args.synthetic)
    if args.seed is not None:
        from dataclasses import replace

        spec = replace(spec, seed=args.seed)
    bundle = write_bundle(spec, args.out)
    print(f"wrote bundle: n={bundle.n} d={bundle.d_content} t={bundle.t} -> {args.out}")
    return 0


def _fmt(value) -> str:
    return "" if value is None else f"{value:.6f}"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "cluster": cmd_cluster,
        "sweep": cmd_sweep,
        "ablate": cmd_ablate,
        "make-bundle": cmd_make_bundle,
    }
    try:
        return handlers[args.command](args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
