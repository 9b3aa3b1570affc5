"""Command-line interface.

Subcommands:

- ``agentnet run --config cfg.yaml [overrides]``: run one train or test
  phase and optionally export the report directory.
- ``agentnet sweep``: grid over agent count and memory capacity.
- ``agentnet export-dot snapshot.json``: render a topology snapshot as
  Graphviz DOT.

Exit code 0 on success, 2 on configuration or dataset errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from agentnet.errors import AgentNetError
from agentnet.harness import (
    RunConfig,
    build_backend,
    build_network,
    export_report,
    run_phase,
    run_sweep,
    write_sweep_csv,
)
from agentnet.topology import snapshot_to_dot

logger = logging.getLogger(__name__)


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML config file; flags override its values")
    parser.add_argument("--agents", type=int, dest="n_agents", help="number of agents")
    parser.add_argument("--alpha", type=float, help="edge-weight retention factor")
    parser.add_argument("--beta", type=float, help="capability retention factor")
    parser.add_argument("--theta-w", type=float, dest="theta_w", help="edge prune threshold")
    parser.add_argument("--k", type=int, help="fragments retrieved per decision")
    parser.add_argument("--cmax", type=int, dest="c_max", help="memory capacity per module")
    parser.add_argument("--backend", choices=["scripted", "http"], help="model backend")
    parser.add_argument("--script", help="reply script for the scripted backend")
    parser.add_argument("--dataset", help="task JSONL file")
    parser.add_argument("--benchmark", choices=["bbh", "math", "apibank"], help="evaluator kind")
    parser.add_argument("--heuristics", help="heuristic requirement table JSON")
    parser.add_argument("--phase", choices=["train", "test"], help="commit updates or freeze")
    parser.add_argument(
        "--ablation",
        choices=["none", "random-all", "random-ops", "random-next", "global-router"],
        help="routing-policy ablation",
    )
    parser.add_argument("--seed", type=int, help="seed for ablated decisions")
    parser.add_argument("--eviction", choices=["utility", "model"], help="memory eviction mode")
    parser.add_argument("--state-in", dest="state_in", help="network state JSON to load")
    parser.add_argument("--state-out", dest="state_out", help="write network state JSON here")
    parser.add_argument("--out", help="report output directory")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    doc: dict = {}
    if args.config:
        doc.update(RunConfig.from_file(args.config).__dict__)
    overrides = {
        name: value
        for name, value in vars(args).items()
        if name not in ("config", "command", "func", "agents_grid", "cmax_grid", "snapshot", "output", "verbose")
        and value is not None
    }
    doc.update(overrides)
    return RunConfig.from_dict(doc)


def _cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    backend = build_backend(config)
    network = build_network(config, backend)
    report = run_phase(config, network=network, backend=backend)
    print(f"phase={report.phase} ablation={report.ablation} seed={report.seed}")
    print(f"tasks={len(report.task_results)} accuracy={report.accuracy:.4f}")
    print(f"backend calls: {report.backend_calls}")
    if config.out:
        export_report(report, config.out, network.cap_params.taxonomy)
        print(f"report written to {config.out}")
    return 0


def _parse_grid(text: str, flag: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise AgentNetError(f"{flag} expects a comma-separated list of integers") from None
    if not values:
        raise AgentNetError(f"{flag} must not be empty")
    return values


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    agent_counts = _parse_grid(args.agents_grid, "--agents-grid")
    c_max_values = _parse_grid(args.cmax_grid, "--cmax-grid")
    rows = run_sweep(config, agent_counts, c_max_values)
    for row in rows:
        print(f"agents={row['agents']} cmax={row['cmax']} accuracy={row['accuracy']:.4f}")
    if config.out:
        path = write_sweep_csv(rows, config.out)
        print(f"sweep table written to {path}")
    return 0


def _cmd_export_dot(args: argparse.Namespace) -> int:
    try:
        snapshot = json.loads(Path(args.snapshot).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise AgentNetError(f"cannot read snapshot {args.snapshot}: {exc}") from exc
    dot = snapshot_to_dot(snapshot)
    if args.output:
        Path(args.output).write_text(dot, encoding="utf-8")
        print(f"wrote {args.output}")
    else:
        print(dot, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agentnet",
        description="Decentralized multi-agent orchestration runtime",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run_parser = sub.add_parser("run", help="run one train or test phase")
    _add_run_flags(run_parser)
    run_parser.set_defaults(func=_cmd_run)

    sweep_parser = sub.add_parser("sweep", help="grid over agent count and memory capacity")
    _add_run_flags(sweep_parser)
    sweep_parser.add_argument("--agents-grid", default="3,5,9", help="comma list of agent counts")
    sweep_parser.add_argument("--cmax-grid", default="5,40", help="comma list of capacities")
    sweep_parser.set_defaults(func=_cmd_sweep)

    dot_parser = sub.add_parser("export-dot", help="render a topology snapshot as DOT")
    dot_parser.add_argument("snapshot", help="snapshot JSON file")
    dot_parser.add_argument("-o", "--output", help="output .dot path (default: stdout)")
    dot_parser.set_defaults(func=_cmd_export_dot)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except AgentNetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
