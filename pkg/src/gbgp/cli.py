"""Command-line front end: synth, detect, eval, bench, gridsearch.

Every command honors --seed and produces byte-identical non-timing
output files on rerun. Exit codes: 0 success, 2 validation error,
3 solver stopped on its iteration cap, 4 I/O error.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .datagen import (
    NonInstance,
    SyntheticSpec,
    TemporalInstance,
    expand_temporal,
    generate_non,
    generate_temporal,
    read_bundle,
    read_metadata,
    read_truth,
    write_bundle,
)
from .evaluation import (
    RESULT_HEADER,
    precision_recall_f1,
    run_experiment,
    scaling_bench,
    solve_instance,
)
from .graph import load_graph, load_partition, load_signal, save_signal, BlockSignal
from .objectives import ObjectiveSpec
from .solver import SolverConfig, gbgp_solve

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NO_CONVERGENCE = 3
EXIT_IO = 4

DEFAULT_LAMBDA_GRID = (0.0005, 0.001, 0.005, 0.01, 0.05, 0.1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gbgp",
        description="Block-structured subgraph detection in interdependent networks",
    )
    parser.add_argument("--config", help="key=value config file; flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="runs", help="output directory")
        p.add_argument("--parallel", type=int, default=0, help="worker count tau")

    p = sub.add_parser("synth", help="generate a synthetic instance bundle")
    add_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--T", type=int, default=1)
    p.add_argument("--mu", type=float, default=5.0)
    p.add_argument("--overlap", type=float, default=0.5)
    p.add_argument("--size", type=float, default=0.1, help="truth size (int) or fraction")
    p.add_argument("--kind", choices=["temporal", "non"], default="temporal")
    p.add_argument("--blocks", type=int, default=4, help="block count (non only)")

    p = sub.add_parser("detect", help="run detection on a bundle or explicit files")
    add_common(p)
    p.add_argument("--bundle", help="instance bundle directory")
    p.add_argument("--graph", help="edge-list file (alternative to --bundle)")
    p.add_argument("--signal", action="append", default=None,
                   help="signal file; repeat per timestamp for temporal data")
    p.add_argument("--partition", help="partition file (non objective)")
    p.add_argument("--blocks", type=int, help="block count for --partition")
    p.add_argument("--objective", choices=["temporal", "non", "ems"], default=None)
    p.add_argument("--budget", type=int, required=True, help="per-block sparsity budget")
    p.add_argument("--lambda", dest="lam", type=float, default=0.01)
    p.add_argument("--outer-tol", type=float, default=1e-3)
    p.add_argument("--inner-tol", type=float, default=1e-3)
    p.add_argument("--max-outer-iters", type=int, default=30)
    p.add_argument("--step-mode", choices=["fixed", "backtracking"], default="backtracking")
    p.add_argument("--step-size", type=float, default=1.0)
    p.add_argument("--head-capacity", choices=["s", "2s"], default="2s")
    p.add_argument("--components", type=int, default=1)
    p.add_argument("--normalize-signal", action="store_true",
                   help="min-max normalize each block signal to [0,1]")

    p = sub.add_parser("eval", help="score a detection against ground truth")
    add_common(p)
    p.add_argument("--detected", required=True, help="support file (t<TAB>node)")
    p.add_argument("--truth", required=True, help="truth file (t<TAB>node)")

    p = sub.add_parser("bench", help="runtime scaling benchmark")
    add_common(p)
    p.add_argument("--sizes", default="2500,5000,10000", help="comma-separated node counts")
    p.add_argument("--taus", default="0", help="comma-separated worker counts")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--lambda", dest="lam", type=float, default=0.01)

    p = sub.add_parser("gridsearch", help="grid search budget and lambda on a bundle")
    add_common(p)
    p.add_argument("--bundle", required=True)
    p.add_argument("--budgets", required=True, help="comma-separated budgets")
    p.add_argument("--lambdas", default=",".join(str(v) for v in DEFAULT_LAMBDA_GRID))
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Fold --config key=value pairs in as defaults; flags still win."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    try:
        path = argv[idx + 1]
    except IndexError:
        parser.error("--config needs a file path")
    known = set()
    for action in parser._subparsers._group_actions[0].choices.values():  # type: ignore[union-attr]
        for sub_action in action._actions:
            known.add(sub_action.dest)
    defaults = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            dest = key.strip().replace("-", "_")
            if dest == "lambda":
                dest = "lam"
            if dest not in known:
                raise ValueError(f"{path}:{lineno}: unknown config key {key.strip()!r}")
            defaults[dest] = value.strip()
    parser.set_defaults(**defaults)
    return argv[:idx] + argv[idx + 2:]


def _write_manifest(out_dir: str, entries: list[str]) -> None:
    with open(os.path.join(out_dir, "manifest.txt"), "w", encoding="utf-8") as fh:
        for entry in sorted(entries):
            fh.write(entry + "\n")


def cmd_synth(args) -> int:
    size = args.size if args.size < 1 else int(args.size)
    spec = SyntheticSpec(
        n=args.n, m=args.m, T=args.T, subgraph_size=size,
        overlap=args.overlap, mu=args.mu, seed=args.seed,
    )
    if args.kind == "temporal":
        instance = generate_temporal(spec)
    else:
        instance = generate_non(spec, args.blocks)
    out_dir = os.path.join(args.out, "instance")
    write_bundle(instance, out_dir)
    _write_manifest(out_dir, sorted(os.listdir(out_dir)))
    print(out_dir)
    return EXIT_OK


def _load_detect_inputs(args):
    """Resolve (objective kind, partition, signal, base graph, T)."""
    if args.bundle:
        meta = read_metadata(os.path.join(args.bundle, "metadata.txt"))
        instance = read_bundle(args.bundle)
        kind = args.objective or meta["kind"]
        if isinstance(instance, TemporalInstance):
            signals = instance.signals
            graph, partition, signal = instance.expand()
            return kind, graph, partition, signal, instance.base_graph, len(signals)
        return kind, instance.graph, instance.partition, instance.signal, instance.graph, 1
    if not args.graph or not args.signal:
        raise ValueError("detect needs --bundle, or --graph with --signal")
    graph = load_graph(args.graph)
    signals = [load_signal(path, graph.node_count) for path in args.signal]
    kind = args.objective or ("temporal" if len(signals) > 1 else "non")
    if kind == "temporal":
        big, partition, signal = expand_temporal(graph, signals)
        return kind, big, partition, signal, graph, len(signals)
    if args.partition:
        if not args.blocks:
            raise ValueError("--partition needs --blocks")
        partition = load_partition(args.partition, graph, args.blocks)
    else:
        from .graph import partition_contiguous

        partition = partition_contiguous(graph, args.blocks or 4)
    return kind, graph, partition, signals[0], graph, 1


def _normalize_blocks(signal, partition):
    values = signal.values.copy()
    for nodes in partition.block_nodes:
        block = values[nodes]
        span = block.max() - block.min()
        if span > 0:
            values[nodes] = (block - block.min()) / span
    return BlockSignal(values)


def cmd_detect(args) -> int:
    kind, graph, partition, signal, base_graph, T = _load_detect_inputs(args)
    if args.normalize_signal:
        signal = _normalize_blocks(signal, partition)
    objective = ObjectiveSpec(kind, partition, signal, lam=args.lam)
    config = SolverConfig(
        budgets=args.budget,
        outer_tol=args.outer_tol,
        inner_tol=args.inner_tol,
        max_outer_iters=args.max_outer_iters,
        step_mode=args.step_mode,
        step_size=args.step_size,
        head_capacity_mode=args.head_capacity,
        num_components=args.components,
        parallel=args.parallel,
        seed=args.seed,
    )
    result = gbgp_solve(objective, config)

    out_dir = os.path.join(args.out, "detect")
    os.makedirs(out_dir, exist_ok=True)
    n_base = base_graph.node_count
    with open(os.path.join(out_dir, "supports.txt"), "w", encoding="utf-8") as fh:
        for support in result.supports:
            for node in support.nodes:
                local = node - support.block_id * n_base if kind == "temporal" else node
                fh.write(f"{support.block_id if kind == 'temporal' else 0}\t{local}\n")
    save_signal(BlockSignal(result.x_final), os.path.join(out_dir, "x.txt"))
    with open(os.path.join(out_dir, "trace.txt"), "w", encoding="utf-8") as fh:
        for iteration, delta, objective_value, wall_ms in result.history:
            fh.write(f"{iteration}\t{delta!r}\t{objective_value!r}\t{wall_ms:.3f}\n")
    _write_manifest(out_dir, ["supports.txt", "x.txt", "trace.txt"])
    print(out_dir)
    return EXIT_OK if result.converged else EXIT_NO_CONVERGENCE


def cmd_eval(args) -> int:
    detected = read_truth(args.detected)
    truth = read_truth(args.truth)
    row = precision_recall_f1(detected, truth)
    out_dir = os.path.join(args.out, "eval")
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"precision={row.precision:.6f}\n")
        fh.write(f"recall={row.recall:.6f}\n")
        fh.write(f"f1={row.f_measure:.6f}\n")
    _write_manifest(out_dir, ["summary.txt"])
    print(f"precision={row.precision:.6f} recall={row.recall:.6f} f1={row.f_measure:.6f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    sizes = [int(v) for v in args.sizes.split(",") if v]
    taus = [int(v) for v in args.taus.split(",") if v != ""]
    config = SolverConfig(seed=args.seed)
    table = scaling_bench(
        sizes, config, lam=args.lam, tau_list=taus, repeats=args.repeats, seed=args.seed
    )
    out_dir = os.path.join(args.out, "eval")
    os.makedirs(out_dir, exist_ok=True)
    lines = ["n\tedges\tblocks\ttau\twall_s\tf1"]
    for row in table:
        lines.append(
            f"{row['n']}\t{row['edges']}\t{row['blocks']}\t{row['tau']}"
            f"\t{row['wall_s']:.4f}\t{row['f1']:.6f}"
        )
    with open(os.path.join(out_dir, "scaling.tsv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    _write_manifest(out_dir, ["scaling.tsv"])
    print("\n".join(lines))
    return EXIT_OK


def cmd_gridsearch(args) -> int:
    instance = read_bundle(args.bundle)
    budgets = [int(v) for v in args.budgets.split(",") if v]
    lambdas = [float(v) for v in args.lambdas.split(",") if v]
    cells = []
    for budget in budgets:
        for lam in lambdas:
            config = SolverConfig(budgets=budget, seed=args.seed, parallel=args.parallel)
            pairs, _, wall = solve_instance(instance, lam, config)
            row = precision_recall_f1(pairs, instance.truth_pairs(), wall)
            cells.append((row.f_measure, budget, lam, row))
    # best F first; ties prefer smaller budget then smaller lambda
    cells.sort(key=lambda cell: (-cell[0], cell[1], cell[2]))
    out_dir = os.path.join(args.out, "eval")
    os.makedirs(out_dir, exist_ok=True)
    lines = ["budget\tlambda\tprecision\trecall\tf1"]
    for f1, budget, lam, row in cells:
        lines.append(f"{budget}\t{lam}\t{row.precision:.6f}\t{row.recall:.6f}\t{f1:.6f}")
    with open(os.path.join(out_dir, "gridsearch.tsv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    best = cells[0]
    with open(os.path.join(out_dir, "best.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"budget={best[1]}\nlambda={best[2]}\nf1={best[0]:.6f}\n")
    _write_manifest(out_dir, ["gridsearch.tsv", "best.txt"])
    print(f"best budget={best[1]} lambda={best[2]} f1={best[0]:.4f}")
    return EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    handlers = {
        "synth": cmd_synth,
        "detect": cmd_detect,
        "eval": cmd_eval,
        "bench": cmd_bench,
        "gridsearch": cmd_gridsearch,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
