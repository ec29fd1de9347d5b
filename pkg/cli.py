"""Command-line entry point.

Usage:
    python cli.py partition network.txt --markov-time 2 --multilevel
    python cli.py sweep network.txt --t-grid 0.25,0.5,1,2,4,8 --entropy sampled
    python cli.py project bipartite.txt --x 1000 --y 10
    python cli.py benchmark --k-in 12,15 --features 256,1024 --trials 10
    python cli.py nmi a.tree b.tree --leaf

Exit codes: 0 success, 1 usage or validation error, 2 unreadable input,
3 dense computation cap exceeded.
"""

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Optional

import config
from benchmark import benchmark_grid
from entropy_gap import ENTROPY_MODES, markov_time_sweep
from evaluate_partitions import DETECTORS, nmi, run_benchmark_sweep
from fast_projection import FastProjectionParams, fast_projection
from flow_model import DenseCapError, bipartite_flow_model, build_flow_model, check_dense_cap
from mapeq import Hierarchy
from network import FORMATS, NetworkFormatError, load_network, project_bipartite_full, write_network
from search import SearchConfig, optimize
from tree_io import read_tree, write_tree

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_CAP = 3


class UsageError(ValueError):
    """Invalid command-line arguments."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


@dataclass
class RunManifest:
    subcommand: str
    inputs: list[str]
    parameters: dict
    seed: Optional[int]
    timestamp: str = field(default_factory=lambda: datetime.now().isoformat())
    tool_version: str = config.TOOL_VERSION

    def write(self, output: str):
        Path(f"{output}.manifest.json").write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _float_list(text: str) -> list[float]:
    values = [float(part) for part in text.split(",") if part.strip()]
    if not values:
        raise UsageError("grid is empty")
    return values


def _int_list(text: str) -> list[int]:
    values = [int(part) for part in text.split(",") if part.strip()]
    if not values:
        raise UsageError("list is empty")
    return values


def _output_path(given: Optional[str], stem: str, suffix: str) -> str:
    path = Path(given) if given else Path(config.RESULTS_DIR) / f"{stem}{suffix}"
    path.parent.mkdir(parents=True, exist_ok=True)
    return str(path)


def _search_config(args, mode: str = "two-level") -> SearchConfig:
    return SearchConfig(trials=args.trials, seed=args.seed, mode=mode)


def cmd_partition(args) -> int:
    net = load_network(args.input, args.format, args.directed or None)
    if args.bipartite:
        if not net.is_bipartite:
            raise UsageError("--bipartite needs a bipartite input (a '*Bipartite' edge list)")
        if args.markov_time is not None:
            raise UsageError("--bipartite fixes the Markov time at 2; drop --markov-time")
        fm = bipartite_flow_model(net)
    else:
        t = config.MARKOV_TIME if args.markov_time is None else args.markov_time
        fm = build_flow_model(net, t, args.teleport)

    mode = "multilevel" if args.multilevel else "two-level"
    print(f"Searching {net.node_count} nodes, {net.link_count} links ({mode}, t={fm.markov_time:g}, seed {args.seed})")
    result = optimize(fm, _search_config(args, mode), verbose=args.verbose)
    hierarchy = result.hierarchy or Hierarchy.from_partition(result.partition)

    output = _output_path(args.output, Path(args.input).stem, ".tree")
    write_tree(
        output, hierarchy, fm.visit_rate, net.node_labels, net.node_names,
        header={
            "codelength": f"{result.codelength:.9f} bits",
            "one-module-codelength": f"{result.one_module_codelength:.9f} bits",
            "markov-time": f"{fm.markov_time:g}",
            "modules": result.module_count,
            "levels": result.levels,
        },
    )
    RunManifest(
        "partition", [args.input],
        {"markov_time": fm.markov_time, "bipartite": args.bipartite, "mode": mode,
         "trials": args.trials, "teleport": args.teleport},
        args.seed,
    ).write(output)

    print(f"\n{'='*50}")
    print("Partition complete:")
    print(f"  Code length: {result.codelength:.6f} bits (one module: {result.one_module_codelength:.6f})")
    print(f"  Modules: {result.module_count}")
    print(f"  Levels: {result.levels}")
    print(f"  Best trial: {result.trial + 1}/{args.trials}")
    print(f"  [OK] Tree written to {output}")
    print(f"{'='*50}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    t_grid = _float_list(args.t_grid)
    net = load_network(args.input, args.format, args.directed or None)
    print(f"Sweeping {len(t_grid)} Markov times (entropy: {args.entropy}, seed {args.seed})")
    try:
        df = markov_time_sweep(
            net, t_grid, args.entropy, _search_config(args), args.teleport,
            args.starts, args.walks, args.seed, verbose=True,
        )
    except DenseCapError as e:
        raise _with_hint(e) from e

    output = _output_path(args.output, f"{Path(args.input).stem}_sweep", ".csv")
    df.to_csv(output, index=False)
    RunManifest(
        "sweep", [args.input],
        {"t_grid": t_grid, "entropy": args.entropy, "trials": args.trials,
         "starts": args.starts, "walks": args.walks, "teleport": args.teleport},
        args.seed,
    ).write(output)
    print(f"[OK] Sweep written to {output}")
    return EXIT_OK


def _with_hint(error: DenseCapError) -> DenseCapError:
    hinted = DenseCapError(error.node_count, error.cap)
    hinted.args = (f"{error}; use --entropy sampled for networks this large",)
    return hinted


def cmd_project(args) -> int:
    net = load_network(args.input, args.format)
    if not net.is_bipartite:
        raise UsageError("projection needs a bipartite input (a '*Bipartite' edge list)")
    if args.full:
        check_dense_cap(len(net.primary_nodes()))
        projected = project_bipartite_full(net)
        parameters = {"full": True}
    else:
        params = FastProjectionParams(top_x=args.x, top_y=args.y, seed=args.seed)
        print(f"Fast projection: X={params.top_x}, Y={params.top_y}, seed {params.seed}")
        projected = fast_projection(net, params, verbose=True)
        parameters = {"full": False, "x": params.top_x, "y": params.top_y}

    output = _output_path(args.output, f"{Path(args.input).stem}_projected", ".txt")
    write_network(projected, output, "edge-list")
    RunManifest("project", [args.input], parameters, None if args.full else args.seed).write(output)
    print(f"[OK] {projected.node_count} nodes, {projected.link_count} links written to {output}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    specs = benchmark_grid(args.communities, args.primaries, args.k, _int_list(args.k_in), _int_list(args.features))
    detectors = [d.strip() for d in args.detectors.split(",") if d.strip()]
    df = run_benchmark_sweep(
        specs, detectors, args.trials, args.seed,
        cfg=SearchConfig(trials=args.search_trials, seed=args.seed),
        params=FastProjectionParams(top_x=args.x, top_y=args.y, seed=args.seed),
        timings=not args.no_timings,
    )
    output = _output_path(args.output, "benchmark", ".csv")
    df.to_csv(output, index=False)
    RunManifest(
        "benchmark", [],
        {"communities": args.communities, "primaries_per_community": args.primaries, "k": args.k,
         "k_in": _int_list(args.k_in), "feature_counts": _int_list(args.features), "detectors": detectors,
         "trials": args.trials, "search_trials": args.search_trials, "x": args.x, "y": args.y},
        args.seed,
    ).write(output)
    print(f"[OK] Results written to {output}")
    return EXIT_OK


def cmd_nmi(args) -> int:
    first, second = read_tree(args.tree_a), read_tree(args.tree_b)
    a = first.hierarchy
    b = second.aligned_to(first.labels)
    if args.leaf:
        value = nmi(a.leaf_partition(), b.leaf_partition())
    else:
        value = nmi(a.top_partition(), b.top_partition())
    print(f"{value:.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cli.py", description="Flow modules at any Markov time.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def network_args(p, directed=True):
        p.add_argument("input", help="Network file")
        p.add_argument("--format", choices=("auto",) + FORMATS, default="auto")
        if directed:
            p.add_argument(
                "--directed", action="store_true",
                help="Treat edge-list links as directed (default: the file's #! directive)",
            )
        p.add_argument("-o", "--output", help=f"Output file (default under {config.RESULTS_DIR}/)")

    def search_args(p):
        p.add_argument("--trials", type=int, default=config.SEARCH_TRIALS)
        p.add_argument("--seed", type=int, default=config.SEED)
        p.add_argument("--teleport", type=float, default=None, help="Teleportation for directed networks")

    p = sub.add_parser("partition", help="Find modules at one Markov time")
    network_args(p)
    search_args(p)
    p.add_argument("--markov-time", type=float, default=None, help=f"Markov time (default {config.MARKOV_TIME:g})")
    p.add_argument("--bipartite", action="store_true", help="Use bipartite dynamics; fixes the Markov time at 2")
    levels = p.add_mutually_exclusive_group()
    levels.add_argument("--two-level", action="store_true", default=True)
    levels.add_argument("--multilevel", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true", help="Print every trial")
    p.set_defaults(handler=cmd_partition)

    p = sub.add_parser("sweep", help="Code length and entropy rate over Markov times")
    network_args(p)
    search_args(p)
    p.add_argument("--t-grid", required=True, help="Comma-separated Markov times")
    p.add_argument("--entropy", choices=ENTROPY_MODES, default="none")
    p.add_argument("--starts", type=int, default=config.ENTROPY_STARTS)
    p.add_argument("--walks", type=int, default=config.ENTROPY_WALKS)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("project", help="Project a bipartite network onto its primary nodes")
    network_args(p, directed=False)
    p.add_argument("--x", type=int, default=config.FAST_PROJECTION_X, help="Primaries kept per feature")
    p.add_argument("--y", type=int, default=config.FAST_PROJECTION_Y, help="Links kept per primary")
    p.add_argument("--seed", type=int, default=config.SEED)
    p.add_argument("--full", action="store_true", help="Exact projection instead of fast projection")
    p.set_defaults(handler=cmd_project)

    p = sub.add_parser("benchmark", help="Score detectors on the bipartite benchmark")
    p.add_argument("--communities", type=int, default=32)
    p.add_argument("--primaries", type=int, default=32, help="Primaries per community")
    p.add_argument("--k", type=int, default=16)
    p.add_argument("--k-in", default="12,13,14,15", help="Comma-separated k_in values")
    p.add_argument("--features", default="256,512,1024,2048,4096", help="Comma-separated feature counts")
    p.add_argument("--detectors", default=",".join(DETECTORS))
    p.add_argument("--trials", type=int, default=10, help="Networks per grid point")
    p.add_argument("--search-trials", type=int, default=config.SEARCH_TRIALS)
    p.add_argument("--x", type=int, default=config.FAST_PROJECTION_X)
    p.add_argument("--y", type=int, default=config.FAST_PROJECTION_Y)
    p.add_argument("--seed", type=int, default=config.SEED)
    p.add_argument("--no-timings", action="store_true", help="Write 0.0 seconds so reruns are byte-identical")
    p.add_argument("-o", "--output")
    p.set_defaults(handler=cmd_benchmark)

    p = sub.add_parser("nmi", help="NMI between two tree files")
    p.add_argument("tree_a")
    p.add_argument("tree_b")
    p.add_argument("--leaf", action="store_true", help="Compare finest modules instead of top modules")
    p.set_defaults(handler=cmd_nmi)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except DenseCapError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CAP
    except (NetworkFormatError, FileNotFoundError) as e:
        print(f"Error reading input: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
