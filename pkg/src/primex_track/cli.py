"""Command-line interface: ``run``, ``validate-topology`` and ``oracle``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from typing import Sequence

from . import checks
from .config import DEFAULT_ALGORITHMS, ScenarioConfig
from .errors import PrimexError
from .harness import run_experiment
from .network import load_topology, validate
from .protocols import ALGORITHMS


def parse_rounds(text: str) -> tuple[int, ...]:
    """``"7"``, ``"1..10"`` or ``"1,3,5"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError
            return tuple(range(lo, hi + 1))
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid rounds {text!r}; use N, A..B or a comma list") from None


def parse_algorithms(text: str) -> tuple[str, ...]:
    algs = tuple(a.strip() for a in text.split(",") if a.strip())
    unknown = [a for a in algs if a not in ALGORITHMS]
    if unknown or not algs:
        raise argparse.ArgumentTypeError(f"unknown algorithms {unknown}; choose from {','.join(ALGORITHMS)}")
    return algs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="primex-track", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo tracking experiment")
    run.add_argument("--config", help="JSON scenario file (defaults apply when omitted)")
    run.add_argument(
        "--algorithms", type=parse_algorithms, help=f"comma list, default {','.join(DEFAULT_ALGORITHMS)}"
    )
    run.add_argument("--rounds", type=parse_rounds, help="rounds L: N, A..B or comma list")
    run.add_argument("--mc", type=int, help="Monte Carlo runs")
    run.add_argument("--seed", type=int, help="master seed")
    run.add_argument("--workers", type=int, help="worker processes")
    run.add_argument("--out", default="results", help="output directory (default: results)")

    topo = sub.add_parser("validate-topology", help="check a topology file")
    topo.add_argument("--file", required=True)

    oracle = sub.add_parser("oracle", help="compare the library against independent oracles")
    oracle.add_argument("--suite", choices=[*checks.SUITES, "all"], default="all")
    return parser


def _run(args: argparse.Namespace) -> int:
    config = ScenarioConfig.load(args.config) if args.config else ScenarioConfig()
    overrides = {
        "algorithms": args.algorithms,
        "rounds": args.rounds,
        "mc_runs": args.mc,
        "seed": args.seed,
        "workers": args.workers,
    }
    config = replace(config, **{k: v for k, v in overrides.items() if v is not None})
    report = run_experiment(config, args.out)
    print(f"{'algorithm':<12} {'L':>3} {'rmse':>10} {'runtime_s':>11} {'tx_rate':>8}")
    for key in report.keys():
        tx = report.transmission.get(key)
        tx_text = f"{tx:8.4f}" if tx is not None else f"{'-':>8}"
        print(f"{key[0]:<12} {key[1]:>3} {report.rmse[key]:10.4f} {report.runtime[key]:11.3e} {tx_text}")
    print(f"results written to {args.out}")
    return 0


def _validate_topology(args: argparse.Namespace) -> int:
    graph = load_topology(args.file)
    diag = validate(graph)
    print(f"nodes: {graph.node_count}")
    print(f"sensors: {len(graph.sensor_ids)}")
    print(f"directed edges: {len(graph.edges)}")
    print(f"average degree: {diag.average_in_degree:.4f}")
    print(f"connected: {diag.connected} ({diag.component_count} component(s))")
    print(f"one-way edges: {len(diag.bidirectionality_violations)}")
    for j, i in diag.bidirectionality_violations[:10]:
        print(f"  {j} -> {i} has no reverse edge")
    print("OK" if diag.ok else "INVALID")
    return 0 if diag.ok else 1


def _oracle(args: argparse.Namespace) -> int:
    names = list(checks.SUITES) if args.suite == "all" else [args.suite]
    for name in names:
        for line in checks.SUITES[name]().lines():
            print(line)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _run, "validate-topology": _validate_topology, "oracle": _oracle}[args.command]
    try:
        return handler(args)
    except (PrimexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
