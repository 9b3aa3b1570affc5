"""Experiment harness: configuration, phases, ablations, and reports.

A run takes a config, a dataset split, and a backend; trains or evaluates
the network over the tasks in priority order; and produces a report with
per-task scores, full traces, a topology snapshot per committed task, and
capability trajectories.

Training commits every task's updates. The test phase freezes the network:
no weight, capability, or memory bit changes, including retrieval usage
counters.

Ablations replace the routing policy:

- random-ops: the action type is drawn uniformly at random; a random
  Forward picks its target by capability match, a random Split decomposes
  into one local and one delegated copy of the observation.
- random-next: the router still picks the action type, but every Forward
  target is drawn uniformly from the unvisited agents.
- random-all: both of the above.
- global-router: agent 0's router module takes every routing decision
  (centralized control); candidates are all unvisited agents and Execute
  lands at the agent holding the task.

The run seed feeds only the ablation draws, so an un-ablated run is
byte-identical across seeds.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import re
from dataclasses import dataclass, field
from importlib.resources import files
from pathlib import Path

import numpy as np
import yaml

from agentnet import kernels
from agentnet.backends import (
    DEFAULT_EMBED_DIM,
    DEFAULT_EMBED_SEED,
    Backend,
    CompletionRequest,
    HttpBackend,
    ScriptedBackend,
)
from agentnet.capability import (
    CapabilityParams,
    HeuristicTable,
    RequirementExtractor,
    load_heuristic_table,
)
from agentnet.datasets import TaskRecord, load_dataset, load_manifest, order_by_priority
from agentnet.errors import AgentNetError, BackendError, ConfigurationError, ExtractionError
from agentnet.memory import MemoryModule
from agentnet.runtime import (
    AgentNetwork,
    AgentNode,
    Execute,
    Forward,
    RoutePolicy,
    Split,
    Task,
    action_text,
)
from agentnet.topology import TopologyGraph, TopologyParams, snapshot_to_dot
from agentnet.util import canonical_json
from agentnet.evaluation import evaluate

logger = logging.getLogger(__name__)

ABLATIONS = ("none", "random-all", "random-ops", "random-next", "global-router")
PHASES = ("train", "test")
BACKENDS = ("scripted", "http")
EVICTION_MODES = ("utility", "model")

_PACKAGED_HEURISTICS = ("math.json", "bbh.json", "apibank.json", "synthetic.json")


def data_path(*parts: str) -> Path:
    """Path to a packaged data file."""
    return Path(str(files("agentnet").joinpath("data", *parts)))


@dataclass
class RunConfig:
    """Everything one run needs; mirrors the CLI flags.

    Tunable dynamics (alpha, beta, theta_w) default to mid-range values;
    k and c_max default to 3 and 40.
    """

    n_agents: int = 5
    alpha: float = 0.7
    beta: float = 0.7
    theta_w: float = 0.5
    w0: float = 1.0
    k: int = 3
    c_max: int = 40
    initial_capability: float = 0.5
    backend: str = "scripted"
    script: str | None = None
    dataset: str | None = None
    benchmark: str | None = None
    heuristics: str | None = None
    phase: str = "train"
    ablation: str = "none"
    seed: int = 0
    eviction: str = "utility"
    embed_dim: int = DEFAULT_EMBED_DIM
    embed_seed: int = DEFAULT_EMBED_SEED
    state_in: str | None = None
    state_out: str | None = None
    out: str | None = None

    def __post_init__(self) -> None:
        if self.n_agents < 1:
            raise ConfigurationError(f"need at least one agent, got {self.n_agents}")
        if self.phase not in PHASES:
            raise ConfigurationError(f"phase must be one of {PHASES}, got {self.phase!r}")
        if self.ablation not in ABLATIONS:
            raise ConfigurationError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        if self.backend not in BACKENDS:
            raise ConfigurationError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.eviction not in EVICTION_MODES:
            raise ConfigurationError(
                f"eviction must be one of {EVICTION_MODES}, got {self.eviction!r}"
            )
        if not 0.0 < self.initial_capability <= 1.0:
            raise ConfigurationError(
                f"initial_capability must be in (0, 1], got {self.initial_capability}"
            )
        if self.k < 1:
            raise ConfigurationError(f"k must be >= 1, got {self.k}")
        if self.c_max < 1:
            raise ConfigurationError(f"c_max must be >= 1, got {self.c_max}")
        # alpha/beta/theta_w/w0 ranges are enforced by the params classes
        TopologyParams(alpha=self.alpha, theta_w=self.theta_w, w0=self.w0)
        CapabilityParams(beta=self.beta)

    @classmethod
    def from_file(cls, path: str | Path) -> RunConfig:
        """Load a YAML (or JSON) config file of flag-name keys."""
        path = Path(path)
        try:
            doc = yaml.safe_load(path.read_text(encoding="utf-8"))
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigurationError(f"cannot load config {path}: {exc}") from exc
        if doc is None:
            doc = {}
        if not isinstance(doc, dict):
            raise ConfigurationError(f"config {path} must be a mapping")
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> RunConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        aliases = {"agents": "n_agents", "cmax": "c_max"}
        kwargs = {}
        for key, value in doc.items():
            name = str(key).replace("-", "_")
            name = aliases.get(name, name)
            if name not in known:
                raise ConfigurationError(f"unknown config key {key!r}")
            kwargs[name] = value
        return cls(**kwargs)

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)


@dataclass
class RunReport:
    """Outcome of one phase over one dataset split."""

    phase: str
    ablation: str
    seed: int
    accuracy: float
    task_results: list[dict]
    traces: list[dict]
    snapshots: list[dict]
    capability_series: list[list[dict]]
    backend_calls: dict[str, int]
    kernel_backend: str


# -- ablation policies ---------------------------------------------------------


class RandomOpsPolicy:
    """Action type at random; targets still picked by capability match."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def _random_action(self, observation: str, allow_split: bool):
        kind = int(self.rng.integers(3))
        if kind == 0:
            return Forward(target=None)
        if kind == 1 and allow_split:
            return Split(subtasks=(("local", observation), ("delegated", observation)))
        return Execute()

    def decide(self, network, agent_id, state, candidates, observation, allow_split, default):
        action = self._random_action(observation, allow_split)
        record = {
            "agent": agent_id,
            "retrieved": [],
            "action": action_text(action),
            "note": "ablated-op",
        }
        return action, record


class RandomNextPolicy:
    """Model-chosen actions, uniformly random Forward targets."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def _random_target(self, network, state, action, record):
        unvisited = [i for i in sorted(network.agents) if i not in state.visited]
        if not unvisited:
            return action
        target = int(unvisited[int(self.rng.integers(len(unvisited)))])
        record["action"] = f"FORWARD {target}"
        record["note"] = "ablated-target"
        return Forward(target=target, pinned=True)

    def decide(self, network, agent_id, state, candidates, observation, allow_split, default):
        action, record = default()
        if isinstance(action, Forward):
            action = self._random_target(network, state, action, record)
        return action, record


class RandomAllPolicy(RandomOpsPolicy):
    """Random action types and random Forward targets."""

    def decide(self, network, agent_id, state, candidates, observation, allow_split, default):
        action, record = super().decide(
            network, agent_id, state, candidates, observation, allow_split, default
        )
        if isinstance(action, Forward):
            unvisited = [i for i in sorted(network.agents) if i not in state.visited]
            if unvisited:
                target = int(unvisited[int(self.rng.integers(len(unvisited)))])
                record["action"] = f"FORWARD {target}"
                action = Forward(target=target, pinned=True)
        return action, record


class GlobalRouterPolicy:
    """A fixed coordinator (agent 0) takes every routing decision."""

    ROUTER_ID = 0

    def decide(self, network, agent_id, state, candidates, observation, allow_split, default):
        unvisited = [i for i in sorted(network.agents) if i not in state.visited]
        action, record = network.route_step(
            self.ROUTER_ID,
            state,
            observation=observation,
            candidates=unvisited,
            allow_split=allow_split,
        )
        if (
            isinstance(action, Forward)
            and action.target in network.agents
            and action.target not in state.visited
        ):
            action = Forward(target=action.target, pinned=True)
        return action, record


def apply_ablation(mode: str, seed: int) -> RoutePolicy | None:
    """Build the routing-policy override for an ablation mode.

    Returns None for mode "none" (the agents route themselves). The seed
    feeds a dedicated generator, so repeated runs reproduce the same
    ablated decisions.
    """
    if mode not in ABLATIONS:
        raise ConfigurationError(f"unknown ablation {mode!r}")
    if mode == "none":
        return None
    if mode == "global-router":
        return GlobalRouterPolicy()
    rng = np.random.Generator(np.random.PCG64(seed))
    if mode == "random-ops":
        return RandomOpsPolicy(rng)
    if mode == "random-next":
        return RandomNextPolicy(rng)
    return RandomAllPolicy(rng)


# -- construction ---------------------------------------------------------------


def load_default_heuristics() -> HeuristicTable:
    """Merge the packaged per-benchmark heuristic tables into one."""
    merged: HeuristicTable | None = None
    for name in _PACKAGED_HEURISTICS:
        table = load_heuristic_table(data_path("heuristics", name))
        if merged is None:
            merged = table
            continue
        if table.taxonomy != merged.taxonomy:
            raise ConfigurationError(f"heuristic table {name} disagrees on the taxonomy")
        overlap = set(table.entries) & set(merged.entries)
        if overlap:
            raise ConfigurationError(f"duplicate heuristic categories: {sorted(overlap)}")
        merged.entries.update(table.entries)
    assert merged is not None
    return merged


def build_backend(config: RunConfig) -> Backend:
    if config.backend == "scripted":
        if not config.script:
            raise ConfigurationError("scripted backend needs a script file (--script)")
        return ScriptedBackend.from_file(
            config.script, embed_dim=config.embed_dim, embed_seed=config.embed_seed
        )
    return HttpBackend()


def make_eviction_judge(backend: Backend):
    """Backend-judged eviction: the model names the least useful fragment."""

    def judge(pool):
        listing = "\n".join(
            f"{i}: task: {f.observation} | action: {f.action}" for i, f in enumerate(pool)
        )
        request = CompletionRequest(
            system=(
                "You prune an agent memory at capacity. Reply with only the "
                "index of the least useful fragment."
            ),
            user=listing,
        )
        try:
            reply = backend.complete(request)
        except BackendError as exc:
            logger.warning("eviction judge call failed (%s); using the utility formula", exc)
            return None
        match = re.search(r"-?\d+", reply)
        return int(match.group()) if match else None

    return judge


def build_network(config: RunConfig, backend: Backend) -> AgentNetwork:
    """Assemble a fresh network (or load persisted state) from a config."""
    if config.heuristics:
        table = load_heuristic_table(config.heuristics)
    else:
        table = load_default_heuristics()
    cap_params = CapabilityParams(beta=config.beta, taxonomy=table.taxonomy)
    extractor = RequirementExtractor(table, backend, cap_params)
    graph = TopologyGraph.fully_connected(
        config.n_agents,
        TopologyParams(alpha=config.alpha, theta_w=config.theta_w, w0=config.w0),
    )
    dim = len(table.taxonomy)
    agents = [
        AgentNode(
            agent_id=i,
            capability=np.full(dim, config.initial_capability, dtype=np.float64),
            rou=MemoryModule("rou", capacity=config.c_max),
            exe=MemoryModule("exe", capacity=config.c_max),
        )
        for i in range(config.n_agents)
    ]
    judge = make_eviction_judge(backend) if config.eviction == "model" else None
    network = AgentNetwork(
        agents=agents,
        graph=graph,
        backend=backend,
        extractor=extractor,
        cap_params=cap_params,
        k=config.k,
        policy=apply_ablation(config.ablation, config.seed),
        eviction_judge=judge,
    )
    if config.state_in:
        try:
            doc = json.loads(Path(config.state_in).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot load state {config.state_in}: {exc}") from exc
        network.load_state_doc(doc)
    return network


def resolve_benchmark_kind(config: RunConfig) -> str:
    if config.benchmark:
        return config.benchmark
    if config.dataset:
        manifest = load_manifest(Path(config.dataset).parent)
        if manifest is not None:
            return manifest["benchmark"]
    raise ConfigurationError("no benchmark kind: set --benchmark or provide a dataset manifest")


# -- phases ----------------------------------------------------------------------


def _capability_row(network: AgentNetwork) -> list[dict]:
    return [
        {"agent": i, "values": [float(v) for v in network.agents[i].capability]}
        for i in sorted(network.agents)
    ]


def run_phase(
    config: RunConfig,
    records: list[TaskRecord] | None = None,
    network: AgentNetwork | None = None,
    backend: Backend | None = None,
) -> RunReport:
    """Run one phase over a dataset split.

    Training commits after every task and snapshots the topology; the test
    phase freezes the network and only scores. An empty task list yields
    accuracy 0 with a warning.
    """
    if backend is None:
        backend = build_backend(config)
    if network is None:
        network = build_network(config, backend)
    if records is None:
        if not config.dataset:
            raise ConfigurationError("no dataset: set --dataset or pass records")
        records = load_dataset(config.dataset)
    kind = resolve_benchmark_kind(config)
    frozen = config.phase == "test"
    network.frozen = frozen

    ordered = order_by_priority(records)
    calls_before = len(backend.call_log())
    snapshots = [network.graph.snapshot(network.task_count)]
    capability_series = [_capability_row(network)]
    task_results: list[dict] = []
    traces: list[dict] = []
    scores: list[int] = []

    for record in ordered:
        try:
            requirement = network.extractor.extract(record.query, record.category)
        except (ExtractionError, BackendError) as exc:
            logger.error("requirement extraction failed for %s: %s", record.record_id, exc)
            scores.append(0)
            task_results.append(
                {
                    "id": record.record_id,
                    "category": record.category,
                    "answer": "",
                    "gold": record.gold,
                    "score": 0,
                    "aborted": True,
                }
            )
            traces.append({"task_id": record.record_id, "aborted": True, "error": str(exc)})
            if not frozen:
                network.task_count += 1
            snapshots.append(network.graph.snapshot(network.task_count))
            capability_series.append(_capability_row(network))
            continue
        task = Task(
            task_id=record.record_id,
            observation=record.query,
            requirement=requirement,
            priority=record.priority,
        )
        outcome = network.run_task(task)
        score = 0 if outcome.aborted else evaluate(kind, outcome.answer, record.gold)
        scores.append(score)
        if not frozen:
            network.commit_task(outcome, float(score))
        snapshots.append(network.graph.snapshot(network.task_count))
        capability_series.append(_capability_row(network))
        task_results.append(
            {
                "id": record.record_id,
                "category": record.category,
                "answer": outcome.answer,
                "gold": record.gold,
                "score": score,
                "aborted": outcome.aborted,
            }
        )
        traces.append(outcome.trace)

    if scores:
        accuracy = float(np.mean(scores))
    else:
        logger.warning("no tasks in this phase; reporting accuracy 0")
        accuracy = 0.0
    call_log = backend.call_log()[calls_before:]
    backend_calls = {
        "complete": sum(1 for c in call_log if c.kind == "complete"),
        "embed": sum(1 for c in call_log if c.kind == "embed"),
    }
    if config.state_out and not frozen:
        Path(config.state_out).write_text(
            canonical_json(network.state_doc()), encoding="utf-8"
        )
    return RunReport(
        phase=config.phase,
        ablation=config.ablation,
        seed=config.seed,
        accuracy=accuracy,
        task_results=task_results,
        traces=traces,
        snapshots=snapshots,
        capability_series=capability_series,
        backend_calls=backend_calls,
        kernel_backend=kernels.kernel_backend(),
    )


# -- reporting --------------------------------------------------------------------


def export_report(report: RunReport, out_dir: str | Path, taxonomy: tuple[str, ...]) -> None:
    """Write a report to disk.

    Produces summary.json, per-agent abilities.csv over the task series,
    one canonical snapshot JSON per committed task under snapshots/, the
    full traces as traces.jsonl, and the final topology as graph.dot.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = {
        "phase": report.phase,
        "ablation": report.ablation,
        "seed": report.seed,
        "accuracy": report.accuracy,
        "n_tasks": len(report.task_results),
        "backend_calls": report.backend_calls,
        "kernel_backend": report.kernel_backend,
        "per_task": report.task_results,
    }
    (out / "summary.json").write_text(canonical_json(summary), encoding="utf-8")

    with (out / "abilities.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["task_index", "agent", *taxonomy])
        for index, row in enumerate(report.capability_series):
            for entry in row:
                writer.writerow([index, entry["agent"], *entry["values"]])

    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    for i, snapshot in enumerate(report.snapshots):
        (snap_dir / f"snapshot_{i:04d}.json").write_text(
            canonical_json(snapshot), encoding="utf-8"
        )

    with (out / "traces.jsonl").open("w", encoding="utf-8") as fh:
        for trace in report.traces:
            fh.write(canonical_json(trace) + "\n")

    (out / "graph.dot").write_text(snapshot_to_dot(report.snapshots[-1]), encoding="utf-8")


def run_sweep(
    config: RunConfig,
    agent_counts: list[int],
    c_max_values: list[int],
    records: list[TaskRecord] | None = None,
) -> list[dict]:
    """Grid over network size and memory capacity; one phase per cell."""
    if records is None:
        if not config.dataset:
            raise ConfigurationError("no dataset: set --dataset or pass records")
        records = load_dataset(config.dataset)
    rows = []
    for n_agents in agent_counts:
        for c_max in c_max_values:
            cell = config.replace(n_agents=n_agents, c_max=c_max)
            report = run_phase(cell, records=records)
            rows.append({"agents": n_agents, "cmax": c_max, "accuracy": report.accuracy})
            logger.info("sweep cell agents=%d cmax=%d accuracy=%.4f", n_agents, c_max, report.accuracy)
    return rows


def write_sweep_csv(rows: list[dict], out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["agents", "cmax", "accuracy"])
        writer.writeheader()
        writer.writerows(rows)
    return path
