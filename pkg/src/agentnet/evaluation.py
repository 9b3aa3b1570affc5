"""Answer scoring for the three benchmark formats.

Every evaluator is normalization-based and returns 0 or 1:

- bbh: option-style match, insensitive to case, whitespace, surrounding
  parentheses or brackets, and a trailing period.
- math: final-expression match after stripping presentation markup; values
  that parse as rationals compare numerically, so "1/2" equals "0.5".
- apibank: an API call matches when the API name agrees and the argument
  sets agree as unordered name/value pairs with string-normalized values.
"""

from __future__ import annotations

import re
from fractions import Fraction

from agentnet.errors import ConfigurationError

_WS_RE = re.compile(r"\s+")


def normalize_bbh(text: str) -> str:
    out = text.strip()
    out = out.replace("(", " ").replace(")", " ").replace("[", " ").replace("]", " ")
    out = _WS_RE.sub(" ", out).strip().lower()
    if out.endswith("."):
        out = out[:-1].strip()
    return out


def evaluate_bbh(answer: str, gold: str) -> int:
    return int(normalize_bbh(answer) == normalize_bbh(gold))


_FRAC_RE = re.compile(r"\\[dt]?frac\{([^{}]*)\}\{([^{}]*)\}")


def _extract_boxed(text: str) -> str | None:
    # brace-aware scan; the content itself may contain nested braces
    marker = "\\boxed{"
    start = text.find(marker)
    if start < 0:
        return None
    depth = 1
    for i in range(start + len(marker), len(text)):
        ch = text[i]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start + len(marker):i]
    return None


def normalize_math(text: str) -> str:
    out = text.strip()
    boxed = _extract_boxed(out)
    if boxed is not None:
        out = boxed
    out = out.replace("$", "")
    out = _FRAC_RE.sub(lambda m: f"{m.group(1)}/{m.group(2)}", out)
    out = out.replace("\\left", "").replace("\\right", "")
    out = out.replace("\\!", "").replace("\\,", "").replace("\\;", "")
    out = _WS_RE.sub("", out)
    if out.endswith("."):
        out = out[:-1]
    return out


def _as_fraction(text: str) -> Fraction | None:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        return None


def evaluate_math(answer: str, gold: str) -> int:
    a, g = normalize_math(answer), normalize_math(gold)
    if a == g:
        return 1
    fa, fg = _as_fraction(a), _as_fraction(g)
    if fa is not None and fg is not None:
        return int(fa == fg)
    return 0


_CALL_RE = re.compile(r"^\s*([\w.\-]+)\s*\((.*)\)\s*$", re.DOTALL)


def _split_args(body: str) -> list[str]:
    # split on top-level commas; respects quoted strings
    parts: list[str] = []
    buf: list[str] = []
    quote: str | None = None
    for ch in body:
        if quote is not None:
            buf.append(ch)
            if ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
            buf.append(ch)
        elif ch == ",":
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    if buf:
        parts.append("".join(buf))
    return [p for p in (part.strip() for part in parts) if p]


def _norm_value(value: str) -> str:
    out = value.strip()
    if len(out) >= 2 and out[0] == out[-1] and out[0] in "'\"":
        out = out[1:-1]
    return out.strip()


def parse_api_call(text: str) -> tuple[str, dict[str, str]] | None:
    """Parse "Name(key=value, ...)"; None when the text is not a call."""
    match = _CALL_RE.match(text)
    if match is None:
        return None
    name = match.group(1).strip()
    args: dict[str, str] = {}
    for part in _split_args(match.group(2)):
        if "=" not in part:
            return None
        key, value = part.split("=", 1)
        args[key.strip()] = _norm_value(value)
    return name, args


def evaluate_apibank(answer: str, gold: str) -> int:
    parsed_answer = parse_api_call(answer)
    parsed_gold = parse_api_call(gold)
    if parsed_gold is None:
        # plain-text gold: fall back to the option-style comparison
        return evaluate_bbh(answer, gold)
    if parsed_answer is None:
        return 0
    return int(parsed_answer[0] == parsed_gold[0] and parsed_answer[1] == parsed_gold[1])


_EVALUATORS = {
    "bbh": evaluate_bbh,
    "math": evaluate_math,
    "apibank": evaluate_apibank,
}


def evaluate(kind: str, answer: str, gold: str) -> int:
    """Score one answer against its gold label; 0 or 1.

    Raises:
        ConfigurationError: unknown benchmark kind.
    """
    try:
        scorer = _EVALUATORS[kind]
    except KeyError:
        raise ConfigurationError(
            f"unknown benchmark kind {kind!r}, expected one of {sorted(_EVALUATORS)}"
        ) from None
    return scorer(answer, gold)
