"""Decentralized multi-agent orchestration with evolving topology and memory.

Agents route tasks among themselves (forward, split, execute) over a
weighted directed graph. Task outcomes update edge weights, per-agent
capability vectors, and bounded experience memories, specializing the
network over time without any central controller.
"""

from agentnet.backends import (
    CallRecord,
    CompletionRequest,
    EmbeddingVector,
    HttpBackend,
    ScriptedBackend,
)
from agentnet.capability import (
    CapabilityParams,
    HeuristicTable,
    RequirementExtractor,
    TaskRequirement,
    compute_delta,
    load_heuristic_table,
    select_initial_agent,
    select_next_agent,
    similarity,
    update_capability,
)
from agentnet.datasets import TaskRecord, load_dataset
from agentnet.errors import AgentNetError
from agentnet.evaluation import evaluate
from agentnet.harness import (
    RunConfig,
    RunReport,
    apply_ablation,
    build_backend,
    build_network,
    export_report,
    run_phase,
    run_sweep,
)
from agentnet.kernels import kernel_backend
from agentnet.memory import EvictionWeights, Fragment, MemoryModule
from agentnet.runtime import (
    AgentNetwork,
    AgentNode,
    Execute,
    Forward,
    RouteEnvelope,
    Split,
    Task,
    TaskState,
    parse_action,
)
from agentnet.topology import TopologyGraph, TopologyParams, snapshot_to_dot

__version__ = "0.1.0"

__all__ = [
    "AgentNetError",
    "AgentNetwork",
    "AgentNode",
    "CallRecord",
    "CapabilityParams",
    "CompletionRequest",
    "EmbeddingVector",
    "EvictionWeights",
    "Execute",
    "Forward",
    "Fragment",
    "HeuristicTable",
    "HttpBackend",
    "MemoryModule",
    "RequirementExtractor",
    "RouteEnvelope",
    "RunConfig",
    "RunReport",
    "ScriptedBackend",
    "Split",
    "Task",
    "TaskRecord",
    "TaskRequirement",
    "TaskState",
    "TopologyGraph",
    "TopologyParams",
    "apply_ablation",
    "build_backend",
    "build_network",
    "compute_delta",
    "evaluate",
    "export_report",
    "kernel_backend",
    "load_dataset",
    "load_heuristic_table",
    "parse_action",
    "run_phase",
    "run_sweep",
    "select_initial_agent",
    "select_next_agent",
    "similarity",
    "snapshot_to_dot",
    "update_capability",
    "__version__",
]
