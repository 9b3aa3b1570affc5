"""Prompt construction for routing and execution calls.

The exact wording here is a stable contract: scripted runs key replies on
these strings, so changes to them are breaking changes for shipped script
files.
"""

from __future__ import annotations

from agentnet.backends import CompletionRequest
from agentnet.memory import Fragment

ACTION_GRAMMAR = (
    "Reply with exactly one action:\n"
    "FORWARD <agent-id>\n"
    "SPLIT, followed by one line per subtask, each starting with LOCAL: or DELEGATE:\n"
    "EXECUTE"
)

_ROUTER_REASON_SYSTEM = (
    "You are agent {agent} of {n} in a decentralized agent network. Decide how "
    "to handle the task: hand it to a peer, split it into subtasks, or execute "
    "it yourself. Reply with concise reasoning only."
)

_ROUTER_ACT_SYSTEM = (
    "You are agent {agent} of {n} in a decentralized agent network. Choose "
    "exactly one action for the task.\n{grammar}\nForward candidates: {candidates}."
)

_EXECUTOR_REASON_SYSTEM = (
    "You are agent {agent} of {n} in a decentralized agent network. Work out "
    "how to solve the task yourself. Reply with concise reasoning only."
)

_EXECUTOR_ACT_SYSTEM = (
    "You are agent {agent} of {n} in a decentralized agent network. Solve the "
    "task. Provide the final answer text only."
)


def render_context(entries: list) -> str:
    if not entries:
        return "(none)"
    return "\n".join(f"- agent {e.agent}: {e.text}" for e in entries)


def render_fragments(fragments: list[Fragment], role: str) -> str:
    if not fragments:
        return "(none)"
    label = "action" if role == "rou" else "answer"
    return "\n".join(
        f"[{f.fragment_id}] task: {f.observation} | {label}: {f.action}" for f in fragments
    )


def _user_prompt(observation: str, context_text: str, fragments_text: str, header: str) -> str:
    return (
        f"Task: {observation}\n\nContext:\n{context_text}\n\n{header}:\n{fragments_text}"
    )


def router_reason(
    agent: int, n: int, observation: str, context_text: str, fragments: list[Fragment]
) -> CompletionRequest:
    return CompletionRequest(
        system=_ROUTER_REASON_SYSTEM.format(agent=agent, n=n),
        user=_user_prompt(
            observation, context_text, render_fragments(fragments, "rou"), "Past routing decisions"
        ),
    )


def router_act(
    agent: int,
    n: int,
    observation: str,
    context_text: str,
    fragments: list[Fragment],
    reasoning: str,
    candidates: list[int],
) -> CompletionRequest:
    shown = ", ".join(str(c) for c in sorted(candidates)) if candidates else "(none)"
    user = _user_prompt(
        observation, context_text, render_fragments(fragments, "rou"), "Past routing decisions"
    )
    user += f"\n\nReasoning:\n{reasoning}"
    return CompletionRequest(
        system=_ROUTER_ACT_SYSTEM.format(agent=agent, n=n, grammar=ACTION_GRAMMAR, candidates=shown),
        user=user,
    )


def executor_reason(
    agent: int, n: int, observation: str, context_text: str, fragments: list[Fragment]
) -> CompletionRequest:
    return CompletionRequest(
        system=_EXECUTOR_REASON_SYSTEM.format(agent=agent, n=n),
        user=_user_prompt(
            observation, context_text, render_fragments(fragments, "exe"), "Past solutions"
        ),
    )


def executor_act(
    agent: int, n: int, observation: str, context_text: str, fragments: list[Fragment], reasoning: str
) -> CompletionRequest:
    user = _user_prompt(
        observation, context_text, render_fragments(fragments, "exe"), "Past solutions"
    )
    user += f"\n\nReasoning:\n{reasoning}"
    return CompletionRequest(
        system=_EXECUTOR_ACT_SYSTEM.format(agent=agent, n=n),
        user=user,
    )
