"""Task routing runtime: Forward / Split / Execute over the agent network.

A task enters at the agent whose capability vector best matches its
requirement, then moves through the network one hop at a time. At each hop
the holding agent retrieves routing fragments, reasons, and picks one
action:

- FORWARD <id>: hand the task to an unvisited peer.
- SPLIT: decompose into subtasks, each executed locally or delegated to an
  unvisited peer. Only subtask *results* enter the shared context; the
  decomposition reasoning stays private to the splitting agent.
- EXECUTE: solve the task here; the result ends the task.

No agent is visited twice, so every task terminates within one hop per
agent and the visit trail forms a DAG path. After scoring, ``commit_task``
applies the weight, capability, and memory updates.

Each ``run_task`` produces a structured trace: the entry-agent similarity
scores, every hop's resolved action with retrieved fragment ids, every
context append, subtask delegations, and the commit deltas. Traces contain
no wall-clock data, so identical inputs give byte-identical traces.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from agentnet import prompts
from agentnet.backends import Backend
from agentnet.capability import (
    ROLE_EXECUTED,
    ROLE_FORWARDED,
    ROLE_SPLIT,
    CapabilityParams,
    RequirementExtractor,
    TaskRequirement,
    compute_delta,
    select_initial_agent,
    select_next_agent,
    similarity,
    update_capability,
)
from agentnet.errors import (
    BackendError,
    ConfigurationError,
    ExtractionError,
    MissingAgentError,
)
from agentnet.memory import Fragment, MemoryModule, embed_key
from agentnet.topology import TopologyGraph

logger = logging.getLogger(__name__)

DEFAULT_K = 3


# -- data types --------------------------------------------------------------


@dataclass(frozen=True)
class Task:
    """One unit of work entering the network."""

    task_id: str
    observation: str
    requirement: TaskRequirement
    priority: int = 0


@dataclass
class ContextEntry:
    agent: int
    text: str


@dataclass
class TaskState:
    """Mutable progress of one task through the network."""

    task: Task
    context: list[ContextEntry] = field(default_factory=list)
    visited: list[int] = field(default_factory=list)
    finished: bool = False

    def context_text(self) -> str:
        return prompts.render_context(self.context)


@dataclass(frozen=True)
class Forward:
    """Hand the task to a peer; target None lets the runtime choose.

    A pinned target skips the candidate-set validation (used by ablations,
    which replace the routing policy outright); it must name an unvisited
    agent.
    """

    target: int | None
    pinned: bool = False


@dataclass(frozen=True)
class Split:
    """Decompose into ordered (kind, text) subtasks; kind is 'local' or 'delegated'."""

    subtasks: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class Execute:
    pass


RoutingAction = Forward | Split | Execute


@dataclass
class RouteEnvelope:
    """The task state plus the agent currently holding it."""

    state: TaskState
    current: int

    @property
    def hops(self) -> int:
        return max(0, len(self.state.visited) - 1)


@dataclass
class AgentNode:
    """One agent: a capability vector and its two memory modules."""

    agent_id: int
    capability: np.ndarray
    rou: MemoryModule
    exe: MemoryModule


@dataclass
class FragmentCandidate:
    """A fragment to store at commit time, captured mid-run."""

    agent: int
    role: str  # "rou" or "exe"
    observation: str
    context: str
    action: str


@dataclass
class RunOutcome:
    """Everything ``run_task`` learned, ready for scoring and commit."""

    task: Task
    answer: str
    visited: list[int]
    pairs: list[tuple[int, int]]
    roles: dict[int, str]
    fragment_candidates: list[FragmentCandidate]
    trace: dict
    aborted: bool = False
    error: str | None = None


# -- action grammar -----------------------------------------------------------

_FORWARD_RE = re.compile(r"^FORWARD\s+(-?\d+)\s*$", re.IGNORECASE)


def parse_action(text: str, allow_split: bool = True) -> RoutingAction | None:
    """Parse a routing reply; None means malformed.

    Grammar: ``FORWARD <id>`` | ``SPLIT`` followed by one ``LOCAL:`` or
    ``DELEGATE:`` line per subtask | ``EXECUTE``. With ``allow_split``
    False (delegated subtasks may not split again) a SPLIT reply counts as
    malformed.
    """
    lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
    if not lines:
        return None
    head = lines[0]
    match = _FORWARD_RE.match(head)
    if match is not None:
        if len(lines) > 1:
            return None
        return Forward(target=int(match.group(1)))
    if head.upper() == "EXECUTE":
        if len(lines) > 1:
            return None
        return Execute()
    if head.upper() == "SPLIT":
        if not allow_split:
            return None
        subtasks: list[tuple[str, str]] = []
        for line in lines[1:]:
            upper = line.upper()
            if upper.startswith("LOCAL:"):
                kind, body = "local", line[len("LOCAL:"):].strip()
            elif upper.startswith("DELEGATE:"):
                kind, body = "delegated", line[len("DELEGATE:"):].strip()
            else:
                return None
            if not body:
                return None
            subtasks.append((kind, body))
        if not subtasks:
            return None
        return Split(subtasks=tuple(subtasks))
    return None


def action_text(action: RoutingAction) -> str:
    """Canonical single-string form, used in traces and router fragments."""
    if isinstance(action, Forward):
        return f"FORWARD {action.target}"
    if isinstance(action, Execute):
        return "EXECUTE"
    lines = ["SPLIT"]
    for kind, body in action.subtasks:
        lines.append(f"{'LOCAL' if kind == 'local' else 'DELEGATE'}: {body}")
    return "\n".join(lines)


# -- routing policy hook -------------------------------------------------------


class RoutePolicy(Protocol):
    """Decides the action at one hop; ablations override this."""

    def decide(
        self,
        network: AgentNetwork,
        agent_id: int,
        state: TaskState,
        candidates: list[int],
        observation: str,
        allow_split: bool,
        default: Callable[[], tuple[RoutingAction, dict]],
    ) -> tuple[RoutingAction, dict]: ...


class ModelPolicy:
    """Default policy: the holding agent's own router module decides."""

    def decide(self, network, agent_id, state, candidates, observation, allow_split, default):
        return default()


# -- the network ---------------------------------------------------------------


class AgentNetwork:
    """Agents, topology, and the routing loop."""

    def __init__(
        self,
        agents: list[AgentNode],
        graph: TopologyGraph,
        backend: Backend,
        extractor: RequirementExtractor,
        cap_params: CapabilityParams,
        k: int = DEFAULT_K,
        policy: RoutePolicy | None = None,
        eviction_judge: Callable[[list[Fragment]], int | None] | None = None,
    ):
        if not agents:
            raise ConfigurationError("network needs at least one agent")
        if k < 1:
            raise ConfigurationError(f"k must be >= 1, got {k}")
        self.agents = {node.agent_id: node for node in agents}
        if sorted(self.agents) != graph.agents:
            raise ConfigurationError("agent ids do not match the topology")
        self.graph = graph
        self.backend = backend
        self.extractor = extractor
        self.cap_params = cap_params
        self.k = k
        self.policy: RoutePolicy = policy or ModelPolicy()
        self.eviction_judge = eviction_judge
        self.frozen = False
        self.task_count = 0

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def node(self, agent_id: int) -> AgentNode:
        try:
            return self.agents[agent_id]
        except KeyError:
            raise MissingAgentError(f"agent {agent_id} is not in the network") from None

    def capabilities(self, ids=None) -> dict[int, np.ndarray]:
        if ids is None:
            ids = self.agents
        return {i: self.agents[i].capability for i in ids}

    def _embed(self, text: str) -> np.ndarray:
        return self.backend.embed(text).values

    # -- task-step operations ------------------------------------------------

    def append_context(self, state: TaskState, agent_id: int, result: str) -> None:
        """Append an attributed result to the shared task context."""
        if not result:
            raise ConfigurationError("context results must be non-empty")
        self.node(agent_id)  # validates the id
        state.context.append(ContextEntry(agent=agent_id, text=result))

    def route_step(
        self,
        agent_id: int,
        state: TaskState,
        k: int | None = None,
        observation: str | None = None,
        candidates: list[int] | None = None,
        allow_split: bool = True,
    ) -> tuple[RoutingAction, dict]:
        """One model-driven routing decision at ``agent_id``.

        Retrieves routing fragments, issues the reason and act calls, and
        parses the reply. A malformed reply gets one retry; a second
        failure falls back to Execute so the task always progresses.

        Returns:
            The parsed action and a trace record (retrieved fragment ids,
            the action text, and a note for retry/fail-safe paths).
        """
        node = self.node(agent_id)
        obs = observation if observation is not None else state.task.observation
        ctx = state.context_text()
        fragments = node.rou.select(obs, ctx, k or self.k, self._embed, record_usage=not self.frozen)
        reasoning = self.backend.complete(
            prompts.router_reason(agent_id, self.n_agents, obs, ctx, fragments)
        )
        act_request = prompts.router_act(
            agent_id, self.n_agents, obs, ctx, fragments, reasoning, candidates or []
        )
        note = None
        reply = self.backend.complete(act_request)
        action = parse_action(reply, allow_split=allow_split)
        if action is None:
            logger.warning("agent %d produced malformed action %r, retrying", agent_id, reply[:80])
            reply = self.backend.complete(act_request)
            action = parse_action(reply, allow_split=allow_split)
            note = "retry"
        if action is None:
            logger.warning("agent %d failed the retry, falling back to EXECUTE", agent_id)
            action = Execute()
            note = "failsafe-execute"
        record = {
            "agent": agent_id,
            "retrieved": [f.fragment_id for f in fragments],
            "action": action_text(action),
        }
        if note:
            record["note"] = note
        return action, record

    def execute_step(
        self,
        agent_id: int,
        state: TaskState,
        k: int | None = None,
        observation: str | None = None,
    ) -> tuple[str, dict]:
        """Execute the task (or a subtask) at ``agent_id``.

        Retrieves executor fragments, reasons, produces the result, and
        appends it to the context with attribution. A blank reply is
        normalized to "(empty)" so the context entry stays non-empty.
        """
        node = self.node(agent_id)
        obs = observation if observation is not None else state.task.observation
        ctx = state.context_text()
        fragments = node.exe.select(obs, ctx, k or self.k, self._embed, record_usage=not self.frozen)
        reasoning = self.backend.complete(
            prompts.executor_reason(agent_id, self.n_agents, obs, ctx, fragments)
        )
        reply = self.backend.complete(
            prompts.executor_act(agent_id, self.n_agents, obs, ctx, fragments, reasoning)
        )
        result = reply.strip() or "(empty)"
        record = {
            "agent": agent_id,
            "retrieved": [f.fragment_id for f in fragments],
            "result": result,
        }
        self.append_context(state, agent_id, result)
        return result, record

    # -- the routing loop ----------------------------------------------------

    def run_task(self, task: Task) -> RunOutcome:
        """Route one task to completion.

        The loop visits each agent at most once and every path ends in at
        least one execution, so the final context is never empty. Backend
        failures abort the task with a diagnostic trace instead of raising;
        the caller scores aborted tasks 0.
        """
        state = TaskState(task=task)
        events: list[dict] = []
        pairs: list[tuple[int, int]] = []
        roles: dict[int, str] = {}
        candidates_out: list[FragmentCandidate] = []
        caps = self.capabilities()
        entry_scores = {
            i: similarity(task.requirement.values, caps[i]) for i in sorted(caps)
        }
        current = select_initial_agent(task.requirement, caps)
        trace: dict = {
            "task_id": task.task_id,
            "observation": task.observation,
            "requirement": {
                "values": [float(v) for v in task.requirement.values],
                "source": task.requirement.source,
            },
            "entry": {
                "scores": [
                    {"agent": i, "similarity": float(s)} for i, s in entry_scores.items()
                ],
                "selected": current,
            },
            "events": events,
        }
        ctx = _RunContext(state, events, pairs, roles, candidates_out)
        envelope = RouteEnvelope(state=state, current=current)
        aborted = False
        error: str | None = None
        try:
            while not state.finished and envelope.current not in state.visited:
                state.visited.append(envelope.current)
                envelope.current = self._hop(envelope.current, ctx)
        except BackendError as exc:
            logger.error("task %s aborted: %s", task.task_id, exc)
            aborted = True
            error = str(exc)
        answer = state.context[-1].text if state.context else ""
        trace["visited"] = list(state.visited)
        trace["final_answer"] = answer
        trace["aborted"] = aborted
        trace["error"] = error
        return RunOutcome(
            task=task,
            answer=answer,
            visited=list(state.visited),
            pairs=pairs,
            roles=roles,
            fragment_candidates=candidates_out,
            trace=trace,
            aborted=aborted,
            error=error,
        )

    def _hop(self, current: int, ctx: _RunContext) -> int:
        """One visit: decide, act, and return the next holder (or current)."""
        state = ctx.state
        candidates = self._candidates(current, state)
        action, record = self._decide(
            current, state, candidates, state.task.observation, allow_split=True
        )
        record["type"] = "route"
        record["observation"] = state.task.observation
        ctx.events.append(record)
        snapshot_ctx = state.context_text()
        decider = record.get("agent", current)  # global-router decides from afar

        if isinstance(action, Forward):
            target = self._resolve_forward(
                current, action, state, candidates, state.task.requirement, record
            )
            if target is None:
                ctx.remember(decider, "rou", state.task.observation, snapshot_ctx, "EXECUTE")
                self._execute(current, ctx, state.task.observation, role=ROLE_EXECUTED)
                state.finished = True
                return current
            ctx.remember(decider, "rou", state.task.observation, snapshot_ctx, f"FORWARD {target}")
            ctx.roles.setdefault(current, ROLE_FORWARDED)
            ctx.pairs.append((current, target))
            return target

        if isinstance(action, Split):
            ctx.remember(decider, "rou", state.task.observation, snapshot_ctx, action_text(action))
            ctx.roles[current] = ROLE_SPLIT
            self._handle_split(current, action, ctx)
            state.finished = True
            return current

        ctx.remember(decider, "rou", state.task.observation, snapshot_ctx, "EXECUTE")
        self._execute(current, ctx, state.task.observation, role=ROLE_EXECUTED)
        state.finished = True
        return current

    def _decide(
        self,
        agent_id: int,
        state: TaskState,
        candidates: list[int],
        observation: str,
        allow_split: bool,
    ) -> tuple[RoutingAction, dict]:
        def default() -> tuple[RoutingAction, dict]:
            return self.route_step(
                agent_id,
                state,
                observation=observation,
                candidates=candidates,
                allow_split=allow_split,
            )

        return self.policy.decide(
            self, agent_id, state, candidates, observation, allow_split, default
        )

    def _candidates(self, current: int, state: TaskState) -> list[int]:
        """Unvisited out-neighbors; all unvisited agents when none remain."""
        unvisited = [i for i in sorted(self.agents) if i not in state.visited]
        neighbors = self.graph.out_neighbors(current)
        narrowed = [i for i in unvisited if i in neighbors]
        return narrowed or unvisited

    def _resolve_forward(
        self,
        current: int,
        action: Forward,
        state: TaskState,
        candidates: list[int],
        requirement: TaskRequirement,
        record: dict,
    ) -> int | None:
        """Validate a forward target; None means execute here instead.

        Naming a visited agent forces execution at the current agent. A
        self-target or unknown id, or a target outside the candidate set,
        is re-chosen by capability match over the candidates. With no
        candidates left the task cannot move at all.
        """
        if not candidates:
            record["note"] = "forced-execute"
            return None
        target = action.target
        if action.pinned and target in self.agents and target not in state.visited:
            return target
        if target is not None and target in state.visited and target != current:
            record["note"] = "forced-execute"
            return None
        if target not in candidates:
            target = select_next_agent(requirement, self.capabilities(candidates))
            record["note"] = "retargeted"
            record["action"] = f"FORWARD {target}"
        return target

    def _handle_split(self, splitter: int, split: Split, ctx: _RunContext) -> None:
        """Run subtasks in reply order: local here, delegated to peers.

        Only subtask results reach the shared context; the decomposition
        itself is never appended, so downstream agents see outcomes, not
        the splitting agent's reasoning.
        """
        state = ctx.state
        for kind, body in split.subtasks:
            if kind == "local":
                ctx.events.append(
                    {"type": "subtask", "parent": splitter, "mode": "local", "observation": body}
                )
                self._execute(splitter, ctx, body, role=None)
                continue
            requirement = self._subtask_requirement(body, state.task.requirement)
            candidates = self._candidates(splitter, state)
            if not candidates:
                logger.warning(
                    "no unvisited agent for delegated subtask; agent %d keeps it", splitter
                )
                ctx.events.append(
                    {
                        "type": "subtask",
                        "parent": splitter,
                        "mode": "delegated",
                        "observation": body,
                        "target": splitter,
                        "note": "no-candidates-local-fallback",
                    }
                )
                self._execute(splitter, ctx, body, role=None)
                continue
            target = select_next_agent(requirement, self.capabilities(candidates))
            ctx.events.append(
                {
                    "type": "subtask",
                    "parent": splitter,
                    "mode": "delegated",
                    "observation": body,
                    "requirement": [float(v) for v in requirement.values],
                    "target": target,
                }
            )
            ctx.pairs.append((splitter, target))
            self._run_subtask(body, requirement, target, ctx)

    def _subtask_requirement(self, body: str, parent: TaskRequirement) -> TaskRequirement:
        """Compound extraction for a delegated subtask; parent vector on failure."""
        try:
            return self.extractor.extract(body, mode="compound")
        except ExtractionError as exc:
            logger.warning("subtask requirement extraction failed (%s); using parent vector", exc)
            return parent

    def _run_subtask(
        self, observation: str, requirement: TaskRequirement, start: int, ctx: _RunContext
    ) -> None:
        """Mini routing run for one delegated subtask.

        Shares the parent task's visited set and context, may forward or
        execute but not split again, and always ends in an execution.
        """
        state = ctx.state
        current = start
        while True:
            state.visited.append(current)
            candidates = self._candidates(current, state)
            action, record = self._decide(current, state, candidates, observation, allow_split=False)
            record["type"] = "route"
            record["observation"] = observation
            ctx.events.append(record)
            snapshot_ctx = state.context_text()
            decider = record.get("agent", current)
            if isinstance(action, Forward):
                target = self._resolve_forward(
                    current, action, state, candidates, requirement, record
                )
                if target is not None:
                    ctx.remember(decider, "rou", observation, snapshot_ctx, f"FORWARD {target}")
                    ctx.roles.setdefault(current, ROLE_FORWARDED)
                    ctx.pairs.append((current, target))
                    current = target
                    continue
            ctx.remember(decider, "rou", observation, snapshot_ctx, "EXECUTE")
            self._execute(current, ctx, observation, role=ROLE_EXECUTED)
            return

    def _execute(self, agent_id: int, ctx: _RunContext, observation: str, role: str | None) -> None:
        state = ctx.state
        snapshot_ctx = state.context_text()
        result, record = self.execute_step(agent_id, state, observation=observation)
        record["type"] = "execute"
        record["observation"] = observation
        ctx.events.append(record)
        ctx.events.append({"type": "context", "agent": agent_id, "text": result})
        ctx.remember(agent_id, "exe", observation, snapshot_ctx, result)
        if role is not None:
            ctx.roles[agent_id] = role

    # -- commit ---------------------------------------------------------------

    def commit_task(self, outcome: RunOutcome, score: float) -> dict:
        """Apply one task's updates: weights, pruning, capabilities, memory.

        Every handoff pair moves toward the task score; edges are then
        re-pruned. Every visited agent's capability moves toward its earned
        increment (zero for pure forwarders). Fragments are stored only for
        scored successes. Returns the commit record, also appended to the
        outcome trace.
        """
        if self.frozen:
            raise ConfigurationError("cannot commit to a frozen network")
        if not 0.0 <= score <= 1.0:
            raise ConfigurationError(f"score must be in [0, 1], got {score}")
        pair_records = []
        seen: set[tuple[int, int]] = set()
        for i, j in outcome.pairs:
            if (i, j) in seen:
                continue
            seen.add((i, j))
            old = self.graph.weights[(i, j)]
            new = self.graph.update_edge_weight(i, j, score)
            pair_records.append({"from": i, "to": j, "old": float(old), "new": float(new)})
        before = set(self.graph.edges)
        after = set(self.graph.prune_edges())
        cap_records = []
        for agent_id in outcome.visited:
            node = self.node(agent_id)
            role = outcome.roles.get(agent_id, ROLE_FORWARDED)
            delta = compute_delta(outcome.task.requirement, score, role)
            node.capability = update_capability(node.capability, delta, self.cap_params.beta)
            cap_records.append(
                {
                    "agent": agent_id,
                    "role": role,
                    "delta": [float(v) for v in delta],
                    "after": [float(v) for v in node.capability],
                }
            )
        fragment_records = []
        if score > 0.0:
            for cand in outcome.fragment_candidates:
                node = self.node(cand.agent)
                module = node.rou if cand.role == "rou" else node.exe
                embedding = self._embed(embed_key(cand.observation, cand.context))
                result = module.insert(
                    cand.observation,
                    cand.context,
                    cand.action,
                    embedding,
                    judge=self.eviction_judge,
                )
                fragment_records.append(
                    {
                        "agent": cand.agent,
                        "role": cand.role,
                        "stored": result.inserted.fragment_id if result.inserted else None,
                        "evicted": result.evicted.fragment_id if result.evicted else None,
                        "refreshed": result.refreshed.fragment_id if result.refreshed else None,
                        "rejected": result.rejected,
                    }
                )
        self.task_count += 1
        commit = {
            "score": float(score),
            "pairs": pair_records,
            "edges_removed": [{"from": i, "to": j} for (i, j) in sorted(before - after)],
            "edges_added": [{"from": i, "to": j} for (i, j) in sorted(after - before)],
            "capabilities": cap_records,
            "fragments": fragment_records,
        }
        outcome.trace["commit"] = commit
        return commit

    # -- persistence ------------------------------------------------------------

    def state_doc(self) -> dict:
        """Full mutable state: topology, capabilities, both memory stores."""
        return {
            "topology": self.graph.to_doc(),
            "task_count": self.task_count,
            "agents": [
                {
                    "id": node.agent_id,
                    "capability": [float(v) for v in node.capability],
                    "rou": node.rou.to_doc(),
                    "exe": node.exe.to_doc(),
                }
                for _, node in sorted(self.agents.items())
            ],
        }

    def load_state_doc(self, doc: dict) -> None:
        try:
            self.graph = TopologyGraph.from_doc(doc["topology"], self.graph.params)
            self.task_count = int(doc["task_count"])
            for entry in doc["agents"]:
                node = self.node(int(entry["id"]))
                node.capability = np.asarray(entry["capability"], dtype=np.float64)
                node.rou = MemoryModule.from_doc(entry["rou"])
                node.exe = MemoryModule.from_doc(entry["exe"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed network state document: {exc}") from exc


@dataclass
class _RunContext:
    """Mutable bookkeeping shared by the helpers of one run_task call."""

    state: TaskState
    events: list[dict]
    pairs: list[tuple[int, int]]
    roles: dict[int, str]
    fragment_candidates: list[FragmentCandidate]

    def remember(self, agent: int, role: str, observation: str, context: str, action: str) -> None:
        self.fragment_candidates.append(
            FragmentCandidate(
                agent=agent, role=role, observation=observation, context=context, action=action
            )
        )
