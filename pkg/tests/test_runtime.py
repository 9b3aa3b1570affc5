"""Routing runtime: action grammar, hop semantics, commit updates."""

from __future__ import annotations

import numpy as np
import pytest

from agentnet.backends import ScriptedBackend
from agentnet.capability import (
    DEFAULT_TAXONOMY,
    ROLE_EXECUTED,
    ROLE_FORWARDED,
    ROLE_SPLIT,
    CapabilityParams,
    HeuristicTable,
    RequirementExtractor,
    TaskRequirement,
)
from agentnet.errors import ConfigurationError, MissingAgentError
from agentnet.memory import MemoryModule
from agentnet.runtime import (
    AgentNetwork,
    AgentNode,
    Execute,
    Forward,
    RouteEnvelope,
    RunOutcome,
    Split,
    Task,
    TaskState,
    action_text,
    parse_action,
)
from agentnet.topology import TopologyGraph, TopologyParams
from agentnet.util import canonical_json

REASON = "[RATIONALE] weighing the options."
VECTOR_REPLY = "(0.5, 0.5, 0.5, 0.5)"


def make_task(observation: str = "solve the puzzle", values=(0.5, 0.5, 0.5, 0.5)) -> Task:
    return Task(
        task_id="t0",
        observation=observation,
        requirement=TaskRequirement(values=np.asarray(values, dtype=np.float64), source="atomic"),
    )


def build_network(
    n: int = 3,
    replies: list[str] | None = None,
    rules: list[tuple[str, str]] | None = None,
    capabilities: dict[int, list[float]] | None = None,
    policy=None,
    capacity: int = 40,
) -> AgentNetwork:
    backend = (
        ScriptedBackend(rules=rules) if rules is not None else ScriptedBackend(replies=replies or [])
    )
    cap_params = CapabilityParams()
    table = HeuristicTable(
        taxonomy=DEFAULT_TAXONOMY,
        entries={"known": np.array([0.4, 0.9, 0.5, 0.6])},
    )
    extractor = RequirementExtractor(table, backend, cap_params)
    agents = []
    for i in range(n):
        cap = np.asarray(
            (capabilities or {}).get(i, [0.5] * len(DEFAULT_TAXONOMY)), dtype=np.float64
        )
        agents.append(AgentNode(i, cap, MemoryModule("rou", capacity), MemoryModule("exe", capacity)))
    graph = TopologyGraph.fully_connected(n)
    return AgentNetwork(agents, graph, backend, extractor, cap_params, k=3, policy=policy)


# -- action grammar -----------------------------------------------------------


def test_parse_forward():
    assert parse_action("FORWARD 2") == Forward(target=2)
    assert parse_action("forward 2") == Forward(target=2)
    assert parse_action("  FORWARD  7  ") == Forward(target=7)
    assert parse_action("FORWARD -1") == Forward(target=-1)
    assert parse_action("FORWARD") is None
    assert parse_action("FORWARD two") is None
    assert parse_action("FORWARD 1\nEXECUTE") is None


def test_parse_execute():
    assert parse_action("EXECUTE") == Execute()
    assert parse_action("execute") == Execute()
    assert parse_action("EXECUTE\nextra line") is None


def test_parse_split():
    action = parse_action("SPLIT\nLOCAL: part one\nDELEGATE: part two")
    assert action == Split(subtasks=(("local", "part one"), ("delegated", "part two")))
    assert parse_action("split\nlocal: x") == Split(subtasks=(("local", "x"),))
    assert parse_action("SPLIT") is None
    assert parse_action("SPLIT\nLOCAL:") is None
    assert parse_action("SPLIT\nREMOTE: thing") is None
    # delegated subtasks are not allowed to split again
    assert parse_action("SPLIT\nLOCAL: x", allow_split=False) is None


def test_parse_garbage():
    assert parse_action("") is None
    assert parse_action("   \n  ") is None
    assert parse_action("I think agent 2 should handle this") is None


def test_action_text_round_trip():
    for action in (
        Forward(target=3),
        Execute(),
        Split(subtasks=(("local", "a"), ("delegated", "b"))),
    ):
        assert parse_action(action_text(action)) == action


# -- single steps --------------------------------------------------------------


def test_route_step_parses_clean_reply():
    net = build_network(replies=[REASON, "EXECUTE"])
    state = TaskState(task=make_task())
    action, record = net.route_step(0, state)
    assert action == Execute()
    assert record["agent"] == 0
    assert record["retrieved"] == []
    assert record["action"] == "EXECUTE"
    assert "note" not in record


def test_route_step_retry_then_failsafe():
    net = build_network(replies=[REASON, "nonsense", "FORWARD 1"])
    action, record = net.route_step(0, TaskState(task=make_task()))
    assert action == Forward(target=1)
    assert record["note"] == "retry"

    net2 = build_network(replies=[REASON, "nonsense", "more nonsense"])
    action2, record2 = net2.route_step(0, TaskState(task=make_task()))
    assert action2 == Execute()
    assert record2["note"] == "failsafe-execute"


def test_route_step_prompt_contract():
    net = build_network(replies=[REASON, "EXECUTE"])
    state = TaskState(task=make_task("count the words"))
    net.append_context(state, 1, "earlier result")
    net.route_step(0, state, candidates=[2, 1])
    log = net.backend.call_log()
    reason_prompt, act_prompt = log[0].request, log[1].request
    assert "agent 0 of 3" in reason_prompt
    assert "Task: count the words" in reason_prompt
    assert "- agent 1: earlier result" in reason_prompt
    assert "Reply with concise reasoning only" in reason_prompt
    assert "Choose exactly one action" in act_prompt
    assert "Forward candidates: 1, 2." in act_prompt
    assert f"Reasoning:\n{REASON}" in act_prompt


def test_execute_step_appends_attributed_context():
    net = build_network(replies=[REASON, "  the answer  "])
    state = TaskState(task=make_task())
    result, record = net.execute_step(1, state)
    assert result == "the answer"
    assert state.context_text() == "- agent 1: the answer"
    assert record["result"] == "the answer"
    assert "Provide the final answer text only" in net.backend.call_log()[1].request


def test_execute_step_blank_reply_becomes_placeholder():
    net = build_network(replies=[REASON, "   "])
    result, _ = net.execute_step(0, TaskState(task=make_task()))
    assert result == "(empty)"


def test_append_context_validation():
    net = build_network(replies=[])
    state = TaskState(task=make_task())
    with pytest.raises(ConfigurationError):
        net.append_context(state, 0, "")
    with pytest.raises(MissingAgentError):
        net.append_context(state, 9, "text")


# -- full task runs ------------------------------------------------------------


def test_run_task_execute_at_entry():
    net = build_network(replies=[REASON, "EXECUTE", REASON, "the answer"])
    outcome = net.run_task(make_task())
    assert not outcome.aborted
    assert outcome.answer == "the answer"
    assert outcome.visited == [0]
    assert outcome.pairs == []
    assert outcome.roles == {0: ROLE_EXECUTED}
    assert [e["type"] for e in outcome.trace["events"]] == ["route", "execute", "context"]
    assert outcome.trace["entry"]["selected"] == 0
    assert len(outcome.trace["entry"]["scores"]) == 3
    assert outcome.trace["final_answer"] == "the answer"
    # one router fragment and one executor fragment were captured
    assert [(c.agent, c.role, c.action) for c in outcome.fragment_candidates] == [
        (0, "rou", "EXECUTE"),
        (0, "exe", "the answer"),
    ]


def test_run_task_entry_agent_matches_capability():
    net = build_network(
        capabilities={0: [0.1, 0.9, 0.1, 0.1], 1: [0.9, 0.1, 0.1, 0.1], 2: [0.5, 0.5, 0.5, 0.5]},
        replies=[REASON, "EXECUTE", REASON, "done"],
    )
    outcome = net.run_task(make_task(values=(1.0, 0.0, 0.0, 0.0)))
    assert outcome.trace["entry"]["selected"] == 1
    assert outcome.visited == [1]


def test_run_task_forward_then_execute():
    net = build_network(
        replies=[REASON, "FORWARD 2", REASON, "EXECUTE", REASON, "final text"]
    )
    outcome = net.run_task(make_task())
    assert outcome.visited == [0, 2]
    assert outcome.pairs == [(0, 2)]
    assert outcome.roles == {0: ROLE_FORWARDED, 2: ROLE_EXECUTED}
    assert outcome.answer == "final text"


def test_run_task_forward_to_visited_forces_execute():
    net = build_network(replies=[REASON, "FORWARD 1", REASON, "FORWARD 0", REASON, "stuck here"])
    outcome = net.run_task(make_task())
    assert outcome.visited == [0, 1]
    assert outcome.answer == "stuck here"
    assert outcome.roles == {0: ROLE_FORWARDED, 1: ROLE_EXECUTED}
    route_events = [e for e in outcome.trace["events"] if e["type"] == "route"]
    assert route_events[1]["note"] == "forced-execute"


def test_run_task_self_forward_is_retargeted():
    # entry lands on specialist 2; naming itself redirects by capability
    net = build_network(
        capabilities={0: [0.5, 0.5, 0.5, 0.5], 1: [0.1, 0.9, 0.1, 0.1], 2: [0.9, 0.1, 0.1, 0.1]},
        replies=[REASON, "FORWARD 2", REASON, "EXECUTE", REASON, "done"],
    )
    outcome = net.run_task(make_task(values=(1.0, 0.0, 0.0, 0.0)))
    assert outcome.trace["entry"]["selected"] == 2
    route_events = [e for e in outcome.trace["events"] if e["type"] == "route"]
    assert route_events[0]["note"] == "retargeted"
    # best remaining match for (1, 0, 0, 0) is the uniform agent 0
    assert route_events[0]["action"] == "FORWARD 0"
    assert outcome.visited == [2, 0]


def test_run_task_unknown_target_is_retargeted():
    net = build_network(
        capabilities={0: [0.5, 0.5, 0.5, 0.5], 1: [0.9, 0.1, 0.1, 0.1], 2: [0.1, 0.9, 0.1, 0.1]},
        replies=[REASON, "FORWARD 99", REASON, "EXECUTE", REASON, "done"],
    )
    outcome = net.run_task(make_task())
    # the uniform requirement ties the two specialists: lowest id wins
    assert outcome.visited == [0, 1]
    route_events = [e for e in outcome.trace["events"] if e["type"] == "route"]
    assert route_events[0]["note"] == "retargeted"
    assert route_events[0]["action"] == "FORWARD 1"


def test_run_task_split_local_and_delegated():
    replies = [
        REASON, "SPLIT\nLOCAL: compare the parts\nDELEGATE: state the answer",
        REASON, "local result",          # local subtask executes at the splitter
        VECTOR_REPLY,                    # requirement extraction for the delegated subtask
        REASON, "EXECUTE",               # delegated holder decides
        REASON, "delegated result",      # and executes
    ]
    net = build_network(replies=replies)
    outcome = net.run_task(make_task())
    assert outcome.answer == "delegated result"
    assert outcome.roles[0] == ROLE_SPLIT
    assert len(outcome.visited) == 2
    target = outcome.visited[1]
    assert outcome.roles[target] == ROLE_EXECUTED
    assert outcome.pairs == [(0, target)]
    # both subtask results are in the shared context, in reply order
    context_events = [e for e in outcome.trace["events"] if e["type"] == "context"]
    assert [e["text"] for e in context_events] == ["local result", "delegated result"]
    subtask_events = [e for e in outcome.trace["events"] if e["type"] == "subtask"]
    assert [e["mode"] for e in subtask_events] == ["local", "delegated"]
    assert subtask_events[1]["requirement"] == [0.5, 0.5, 0.5, 0.5]


def test_split_reasoning_stays_private():
    # downstream prompts may carry subtask results, never the SPLIT action
    replies = [
        REASON, "SPLIT\nLOCAL: inspect\nDELEGATE: summarize",
        REASON, "inspection notes",
        VECTOR_REPLY,
        REASON, "EXECUTE",
        REASON, "summary",
    ]
    net = build_network(replies=replies)
    outcome = net.run_task(make_task())
    # calls after the split decision belong to subtask handling
    downstream = [r.request for r in net.backend.call_log() if r.kind == "complete"][2:]
    assert downstream
    for prompt in downstream:
        assert "LOCAL: inspect" not in prompt
        assert "DELEGATE: summarize" not in prompt
    # the shared context holds results only
    context_texts = [e["text"] for e in outcome.trace["events"] if e["type"] == "context"]
    assert context_texts == ["inspection notes", "summary"]
    assert "- agent 0: inspection notes" in net.backend.call_log()[-1].request


def test_delegated_subtask_may_forward_but_not_split():
    replies = [
        REASON, "SPLIT\nDELEGATE: the whole thing",
        VECTOR_REPLY,
        REASON, "SPLIT\nLOCAL: nested",   # malformed for a subtask
        "FORWARD 2",                      # the act-call retry forwards instead
        REASON, "EXECUTE",
        REASON, "end result",
    ]
    net = build_network(replies=replies)
    outcome = net.run_task(make_task())
    assert outcome.answer == "end result"
    assert outcome.visited == [0, 1, 2]
    assert outcome.pairs == [(0, 1), (1, 2)]
    assert outcome.roles == {0: ROLE_SPLIT, 1: ROLE_FORWARDED, 2: ROLE_EXECUTED}
    route_events = [e for e in outcome.trace["events"] if e["type"] == "route"]
    assert route_events[1]["note"] == "retry"


def test_subtask_extraction_failure_falls_back_to_parent_vector():
    replies = [
        REASON, "SPLIT\nDELEGATE: solve it",
        "no vector in this reply",        # extraction fails
        "still no vector",                # and its retry path inside extract? none: single call
        REASON, "EXECUTE",
        REASON, "answer",
    ]
    # extraction is one call; the second junk reply is consumed as the
    # delegated agent's reasoning
    net = build_network(replies=replies)
    outcome = net.run_task(make_task(values=(0.3, 0.7, 0.1, 0.9)))
    subtask_events = [e for e in outcome.trace["events"] if e["type"] == "subtask"]
    assert subtask_events[0]["requirement"] == [0.3, 0.7, 0.1, 0.9]
    assert not outcome.aborted


def test_single_agent_network_forward_is_forced_to_execute():
    net = build_network(n=1, replies=[REASON, "FORWARD 5", REASON, "solo answer"])
    outcome = net.run_task(make_task())
    assert outcome.visited == [0]
    assert outcome.answer == "solo answer"
    route_events = [e for e in outcome.trace["events"] if e["type"] == "route"]
    assert route_events[0]["note"] == "forced-execute"


def test_adversarial_forwarding_terminates_within_n_hops():
    rules = [
        (r"Reply with concise reasoning only", REASON),
        (r"Provide the final answer text only.*", "done"),
        (r"Choose exactly one action", "FORWARD 1"),
    ]
    net = build_network(n=4, rules=rules)
    outcome = net.run_task(make_task())
    assert not outcome.aborted
    assert len(outcome.visited) == len(set(outcome.visited))
    assert len(outcome.visited) <= 4
    assert outcome.answer == "done"


def test_backend_failure_aborts_with_diagnostic():
    net = build_network(replies=[REASON, "FORWARD 1", REASON])  # runs dry mid-hop
    outcome = net.run_task(make_task())
    assert outcome.aborted
    assert outcome.error is not None
    assert "script exhausted" in outcome.error
    assert outcome.trace["aborted"] is True
    assert outcome.answer == ""


def test_pinned_forward_bypasses_candidate_narrowing():
    class PinnedPolicy:
        def decide(self, network, agent_id, state, candidates, observation, allow_split, default):
            if agent_id == 0:
                return Forward(target=2, pinned=True), {"agent": agent_id, "retrieved": [], "action": "FORWARD 2"}
            return default()

    net = build_network(replies=[REASON, "EXECUTE", REASON, "pinned answer"], policy=PinnedPolicy())
    # prune the 0 -> 2 edge so 2 is not a candidate from 0
    net.graph.weights[(0, 2)] = 0.0
    net.graph.prune_edges()
    outcome = net.run_task(make_task())
    assert outcome.visited == [0, 2]
    assert outcome.pairs == [(0, 2)]


def test_route_envelope_hops():
    state = TaskState(task=make_task())
    envelope = RouteEnvelope(state=state, current=0)
    assert envelope.hops == 0
    state.visited.extend([0, 1, 2])
    assert envelope.hops == 2


# -- commit --------------------------------------------------------------------


def test_commit_success_updates_everything():
    net = build_network(
        replies=[REASON, "FORWARD 2", REASON, "EXECUTE", REASON, "final text"]
    )
    outcome = net.run_task(make_task())
    commit = net.commit_task(outcome, score=1.0)
    # handoff weight: 0.7 * 1.0 + 0.3 * 1.0 stays 1.0
    assert commit["pairs"] == [{"from": 0, "to": 2, "old": 1.0, "new": 1.0}]
    assert commit["edges_removed"] == []
    # forwarder decays, executor gains
    cap0 = net.node(0).capability
    cap2 = net.node(2).capability
    np.testing.assert_allclose(cap0, 0.7 * np.full(4, 0.5), atol=1e-12)
    np.testing.assert_allclose(cap2, 0.7 * np.full(4, 0.5) + 0.3 * 0.5, atol=1e-12)
    # fragments stored for the success: 2 routing + 1 executor
    assert len(commit["fragments"]) == 3
    assert len(net.node(0).rou) == 1
    assert len(net.node(2).rou) == 1
    assert len(net.node(2).exe) == 1
    assert net.task_count == 1
    assert outcome.trace["commit"] is commit


def test_commit_failure_stores_nothing_and_decays():
    net = build_network(
        replies=[REASON, "FORWARD 2", REASON, "EXECUTE", REASON, "wrong answer"]
    )
    outcome = net.run_task(make_task())
    commit = net.commit_task(outcome, score=0.0)
    assert commit["fragments"] == []
    assert len(net.node(0).rou) == 0
    assert len(net.node(2).exe) == 0
    assert abs(net.graph.weights[(0, 2)] - 0.7) < 1e-12
    # executor's capability also decays: delta is score-scaled
    np.testing.assert_allclose(net.node(2).capability, 0.7 * np.full(4, 0.5), atol=1e-12)


def test_commit_prunes_and_restores_edges():
    net = build_network(replies=[
        REASON, "FORWARD 2", REASON, "EXECUTE", REASON, "a1",
        REASON, "FORWARD 2", REASON, "EXECUTE", REASON, "a2",
    ])
    first = net.commit_task(net.run_task(make_task()), score=0.0)
    assert first["edges_removed"] == []  # 0.7 still above theta_w
    second = net.commit_task(net.run_task(make_task()), score=0.0)
    assert {"from": 0, "to": 2} in second["edges_removed"]  # 0.49 <= 0.5
    assert (0, 2) not in net.graph.edges
    # a later success pulls the weight back and the edge returns
    net.graph.weights[(0, 2)] = 0.49
    stub = RunOutcome(
        task=make_task(), answer="x", visited=[], pairs=[(0, 2)], roles={},
        fragment_candidates=[], trace={},
    )
    third = net.commit_task(stub, score=1.0)
    assert {"from": 0, "to": 2} in third["edges_added"]
    assert (0, 2) in net.graph.edges


def test_commit_deduplicates_pairs():
    net = build_network(replies=[])
    stub = RunOutcome(
        task=make_task(), answer="x", visited=[], pairs=[(0, 1), (0, 1)], roles={},
        fragment_candidates=[], trace={},
    )
    commit = net.commit_task(stub, score=0.0)
    assert len(commit["pairs"]) == 1
    assert abs(net.graph.weights[(0, 1)] - 0.7) < 1e-12


def test_commit_validation():
    net = build_network(replies=[REASON, "EXECUTE", REASON, "x"])
    outcome = net.run_task(make_task())
    with pytest.raises(ConfigurationError):
        net.commit_task(outcome, score=1.5)
    net.frozen = True
    with pytest.raises(ConfigurationError):
        net.commit_task(outcome, score=1.0)


def test_frozen_network_does_not_mutate_memory():
    net = build_network(replies=[
        REASON, "EXECUTE", REASON, "warmup answer",
        REASON, "EXECUTE", REASON, "frozen answer",
    ])
    outcome = net.run_task(make_task())
    net.commit_task(outcome, score=1.0)
    before = canonical_json(net.state_doc())
    net.frozen = True
    net.run_task(make_task())
    assert canonical_json(net.state_doc()) == before


def test_state_doc_round_trip():
    net = build_network(replies=[REASON, "FORWARD 1", REASON, "EXECUTE", REASON, "answer"])
    net.commit_task(net.run_task(make_task()), score=1.0)
    doc = net.state_doc()
    clone = build_network(replies=[])
    clone.load_state_doc(doc)
    assert canonical_json(clone.state_doc()) == canonical_json(doc)
    with pytest.raises(ConfigurationError):
        clone.load_state_doc({"topology": {}})


def test_network_constructor_validation():
    backend = ScriptedBackend(replies=[])
    cap_params = CapabilityParams()
    table = HeuristicTable(taxonomy=DEFAULT_TAXONOMY, entries={})
    extractor = RequirementExtractor(table, backend, cap_params)
    graph = TopologyGraph.fully_connected(2)
    agents = [
        AgentNode(0, np.full(4, 0.5), MemoryModule("rou"), MemoryModule("exe")),
        AgentNode(1, np.full(4, 0.5), MemoryModule("rou"), MemoryModule("exe")),
    ]
    AgentNetwork(agents, graph, backend, extractor, cap_params)
    with pytest.raises(ConfigurationError):
        AgentNetwork([], graph, backend, extractor, cap_params)
    with pytest.raises(ConfigurationError):
        AgentNetwork(agents[:1], graph, backend, extractor, cap_params)
    with pytest.raises(ConfigurationError):
        AgentNetwork(agents, graph, backend, extractor, cap_params, k=0)
