"""Directed communication topology with learned, pruned edge weights.

The network starts fully connected with uniform weights. After each task,
the weight of every interacting pair moves by an exponentially weighted
update toward that task's success score, and edges whose weight falls to
the threshold or below are pruned. Weights are retained for pruned pairs,
so an edge can return if later successes pull its weight back above the
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

from agentnet.errors import ConfigurationError, MissingAgentError, SelfLoopError


@dataclass(frozen=True)
class TopologyParams:
    """Edge-weight dynamics parameters.

    Attributes:
        alpha: retention factor of the weight update; 1 keeps history,
            0 replaces it with the newest success score.
        theta_w: prune threshold; edges survive only with weight strictly
            above it.
        w0: initial weight of every directed edge.
    """

    alpha: float = 0.7
    theta_w: float = 0.5
    w0: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigurationError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.theta_w < 0.0:
            raise ConfigurationError(f"theta_w must be >= 0, got {self.theta_w}")
        if not 0.0 <= self.w0 <= 1.0:
            raise ConfigurationError(f"w0 must be in [0, 1], got {self.w0}")


class TopologyGraph:
    """Weight map and surviving-edge set over a fixed agent pool."""

    def __init__(self, agents: list[int], params: TopologyParams):
        if not agents:
            raise ConfigurationError("topology needs at least one agent")
        if len(set(agents)) != len(agents):
            raise ConfigurationError("duplicate agent ids")
        self.agents = sorted(agents)
        self.params = params
        self.weights: dict[tuple[int, int], float] = {}
        self.edges: set[tuple[int, int]] = set()

    @classmethod
    def fully_connected(cls, n_agents: int, params: TopologyParams | None = None) -> TopologyGraph:
        """Build the initial topology: every ordered pair at weight w0."""
        if n_agents < 1:
            raise ConfigurationError(f"need at least one agent, got {n_agents}")
        graph = cls(list(range(n_agents)), params or TopologyParams())
        for i in graph.agents:
            for j in graph.agents:
                if i != j:
                    graph.weights[(i, j)] = graph.params.w0
        graph.prune_edges()
        return graph

    def _check_pair(self, source: int, target: int) -> None:
        if source == target:
            raise SelfLoopError(f"self edge ({source}, {target})")
        for agent in (source, target):
            if agent not in self.weights and agent not in self.agents:
                raise MissingAgentError(f"agent {agent} is not in the network")

    def update_edge_weight(self, source: int, target: int, success: float) -> float:
        """Move one directed weight toward a task success score.

        new = alpha * old + (1 - alpha) * success. Works on pruned pairs
        too; pruning only affects the edge set, never the weight map.

        Returns:
            The updated weight.
        """
        self._check_pair(source, target)
        if not 0.0 <= success <= 1.0:
            raise ConfigurationError(f"success score must be in [0, 1], got {success}")
        old = self.weights[(source, target)]
        new = self.params.alpha * old + (1.0 - self.params.alpha) * success
        self.weights[(source, target)] = new
        return new

    def prune_edges(self) -> frozenset[tuple[int, int]]:
        """Recompute the surviving edge set from the weight map.

        An edge survives iff its weight is strictly above theta_w.
        Idempotent: pruning twice in a row changes nothing.
        """
        self.edges = {pair for pair, w in self.weights.items() if w > self.params.theta_w}
        return frozenset(self.edges)

    def out_neighbors(self, agent: int) -> set[int]:
        """Targets reachable from ``agent`` along surviving edges."""
        if agent not in self.agents:
            raise MissingAgentError(f"agent {agent} is not in the network")
        return {j for (i, j) in self.edges if i == agent}

    def to_doc(self) -> dict:
        """JSON-safe structure of the full topology state."""
        return {
            "agents": list(self.agents),
            "weights": [
                {"from": i, "to": j, "w": float(w)}
                for (i, j), w in sorted(self.weights.items())
            ],
            "edges": [{"from": i, "to": j} for (i, j) in sorted(self.edges)],
        }

    def snapshot(self, task_index: int) -> dict:
        """Topology snapshot tagged with the number of committed tasks."""
        doc = self.to_doc()
        doc["task_index"] = int(task_index)
        return doc

    @classmethod
    def from_doc(cls, doc: dict, params: TopologyParams | None = None) -> TopologyGraph:
        """Rebuild a graph from ``to_doc``/``snapshot`` output."""
        try:
            graph = cls(list(doc["agents"]), params or TopologyParams())
            graph.weights = {
                (int(e["from"]), int(e["to"])): float(e["w"]) for e in doc["weights"]
            }
            graph.edges = {(int(e["from"]), int(e["to"])) for e in doc["edges"]}
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed topology document: {exc}") from exc
        return graph


def snapshot_to_dot(snapshot: dict) -> str:
    """Render a topology snapshot as Graphviz DOT.

    Surviving edges are drawn solid with their weight as label; pruned
    pairs are omitted.
    """
    try:
        agents = snapshot["agents"]
        weights = {(e["from"], e["to"]): e["w"] for e in snapshot["weights"]}
        edges = sorted((e["from"], e["to"]) for e in snapshot["edges"])
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"malformed snapshot: {exc}") from exc
    lines = ["digraph agentnet {"]
    index = snapshot.get("task_index")
    if index is not None:
        lines.append(f'  label="after task {index}";')
    for agent in agents:
        lines.append(f'  a{agent} [label="agent {agent}"];')
    for i, j in edges:
        lines.append(f'  a{i} -> a{j} [label="{weights[(i, j)]:.2f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
