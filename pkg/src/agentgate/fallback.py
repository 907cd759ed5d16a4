"""Deterministic safeguards for the routing pipeline.

Three rule families live here: the fallback-adjusted action (sensitive and
sequential cue screening plus stage-failure recovery), lexical candidate
recovery over agent metadata, and regex-based slot completion for missing
required arguments.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Iterable, Mapping, Sequence, Union

from .model import RoutingAction, StageFailure

if TYPE_CHECKING:
    from .deciders import ActionDecision
    from .registry import AgentCard, ArgumentSchema


class EmptyCandidatesError(ValueError):
    """Candidate recovery was asked to pick from an empty candidate list."""


# Case-insensitive substrings that force a safe escalation. Entries are
# deliberately multi-word or distinctive to keep substring matching precise.
DEFAULT_SENSITIVE_CUES = (
    "password dump",
    "dump all passwords",
    "without authorization",
    "without permission",
    "bypass authentication",
    "bypass security",
    "disable the firewall",
    "disable audit logging",
    "delete all user records",
    "drop all tables",
    "wipe the database",
    "steal credentials",
    "stolen credit card",
    "credit card numbers",
    "card security code",
    "social security numbers",
    "leak customer data",
    "exfiltrate",
    "read private messages",
    "escalate my privileges",
    "crack the password",
    "brute force",
    "keylogger",
    "ransomware",
    "export all user emails",
    "someone else's account",
)

DEFAULT_SEQUENTIAL_MARKERS = ("first", "then", "after that", "next", "finally")

# Single-token domain hints weighted into the relevance score when they
# appear in both the query and a candidate's metadata.
DEFAULT_SEMANTIC_HINTS = (
    "weather",
    "flight",
    "taxi",
    "ride",
    "hotel",
    "restaurant",
    "grocery",
    "delivery",
    "movie",
    "parcel",
    "courier",
    "calendar",
    "meeting",
)

DEFAULT_HINT_WEIGHT = 2.0

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?")
_TIME_RE = re.compile(
    r"\b(?:\d{4}-\d{2}-\d{2}|\d{1,2}:\d{2}|tomorrow|today"
    r"|monday|tuesday|wednesday|thursday|friday|saturday|sunday)\b",
    re.IGNORECASE,
)
_LOCATION_RE = re.compile(r"\b(?:in|to|at|from)\s+([A-Z][A-Za-z]+)")
_QUOTED_RE = re.compile(r"\"([^\"]+)\"|'([^']+)'")


@dataclass(frozen=True)
class SafeguardConfig:
    """Cue lists and weights driving the deterministic safeguards."""

    sensitive_cues: tuple[str, ...] = DEFAULT_SENSITIVE_CUES
    sequential_markers: tuple[str, ...] = DEFAULT_SEQUENTIAL_MARKERS
    semantic_hints: tuple[str, ...] = DEFAULT_SEMANTIC_HINTS
    hint_weight: float = DEFAULT_HINT_WEIGHT

    def __post_init__(self) -> None:
        if self.hint_weight < 0:
            raise ValueError("hint_weight must be nonnegative")
        for name in ("sensitive_cues", "sequential_markers", "semantic_hints"):
            values = tuple(str(v).lower() for v in getattr(self, name))
            object.__setattr__(self, name, values)

    @classmethod
    def from_file(cls, path: str | Path) -> "SafeguardConfig":
        """Load cue lists from a JSON or TOML file.

        Recognized keys: sensitive_cues, sequential_markers, semantic_hints,
        hint_weight. Missing keys keep their defaults.
        """
        path = Path(path)
        if path.suffix.lower() == ".toml":
            try:
                import tomllib  # type: ignore[import-not-found]
            except ImportError:
                import tomli as tomllib  # type: ignore[no-redef]
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        else:
            data = json.loads(path.read_text(encoding="utf-8"))
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SafeguardConfig":
        kwargs: dict[str, Any] = {}
        for key in ("sensitive_cues", "sequential_markers", "semantic_hints"):
            if key in data:
                kwargs[key] = tuple(data[key])
        if "hint_weight" in data:
            kwargs["hint_weight"] = float(data["hint_weight"])
        return cls(**kwargs)


DEFAULT_SAFEGUARDS = SafeguardConfig()


def tokenize(text: str) -> set[str]:
    """Lowercase, split on non-alphanumeric runs, deduplicate."""
    return set(_TOKEN_RE.findall(text.lower()))


def card_token_set(card: "AgentCard") -> set[str]:
    """Token set of an agent's metadata: name, description, and field names."""
    tokens = tokenize(card.name) | tokenize(card.description)
    for slot in card.schema.all_fields():
        tokens |= tokenize(slot.name)
    return tokens


def find_sensitive_cue(query: str, config: SafeguardConfig | None = None) -> str | None:
    """Return the first sensitive cue contained in the query, if any."""
    cfg = config or DEFAULT_SAFEGUARDS
    lowered = query.lower()
    for cue in cfg.sensitive_cues:
        if cue in lowered:
            return cue
    return None


def find_sequential_marker(query: str, config: SafeguardConfig | None = None) -> str | None:
    """Return the first sequential marker present as a whole word, if any."""
    cfg = config or DEFAULT_SAFEGUARDS
    lowered = query.lower()
    for marker in cfg.sequential_markers:
        if re.search(rf"\b{re.escape(marker)}\b", lowered):
            return marker
    return None


def heuristic_score(
    card: "AgentCard", query: str, config: SafeguardConfig | None = None
) -> float:
    """Lexical relevance of a candidate to a query.

    Counts the deduplicated query tokens found in the candidate's metadata
    token set, plus hint_weight for every semantic hint present as a token
    on both sides.
    """
    cfg = config or DEFAULT_SAFEGUARDS
    metadata = card_token_set(card)
    query_tokens = tokenize(query)
    overlap = sum(1 for token in query_tokens if token in metadata)
    hint_hits = sum(1 for h in cfg.semantic_hints if h in metadata and h in query_tokens)
    return float(overlap + cfg.hint_weight * hint_hits)


def adjust_action(
    query: str,
    candidates: Sequence["AgentCard"],
    stage1: Union["ActionDecision", StageFailure],
    config: SafeguardConfig | None = None,
) -> RoutingAction:
    """Apply the safeguard rules to a stage-one decision, in fixed precedence.

    1. sensitive content anywhere in the query forces ESCALATE;
    2. a sequential marker with at least two candidates forces a plan;
    3. a failed first stage degrades to CALL_AGENT when candidates exist,
    4. and to DIRECT_ANSWER when none do;
    5. otherwise the stage-one action stands.
    """
    cfg = config or DEFAULT_SAFEGUARDS
    if find_sensitive_cue(query, cfg) is not None:
        return RoutingAction.ESCALATE
    if find_sequential_marker(query, cfg) is not None and len(candidates) >= 2:
        return RoutingAction.MULTI_AGENT_PLAN
    failed = isinstance(stage1, StageFailure) or stage1 is None
    if failed:
        if len(candidates) > 0:
            return RoutingAction.CALL_AGENT
        return RoutingAction.DIRECT_ANSWER
    return RoutingAction(stage1.action)


def recover_candidate(
    candidates: Sequence["AgentCard"],
    query: str,
    config: SafeguardConfig | None = None,
) -> "AgentCard":
    """Pick the highest-scoring candidate; ties go to the lowest index."""
    if not candidates:
        raise EmptyCandidatesError("cannot recover a candidate from an empty list")
    cfg = config or DEFAULT_SAFEGUARDS
    best_index = 0
    best_score = heuristic_score(candidates[0], query, cfg)
    for index in range(1, len(candidates)):
        score = heuristic_score(candidates[index], query, cfg)
        if score > best_score:
            best_index, best_score = index, score
    return candidates[best_index]


def extract_slot(query: str, slot_type: str) -> str | None:
    """Extract the first value of the given slot type from the query text.

    number: first numeric literal. time: first time-like pattern (clock time,
    ISO date, today/tomorrow, weekday). location: first capitalized token
    after in/to/at/from. entity and string: longest quoted span.
    Returns None when nothing matches.
    """
    if slot_type == "number":
        match = _NUMBER_RE.search(query)
        return match.group(0) if match else None
    if slot_type == "time":
        match = _TIME_RE.search(query)
        return match.group(0) if match else None
    if slot_type == "location":
        match = _LOCATION_RE.search(query)
        return match.group(1) if match else None
    if slot_type in ("entity", "string"):
        spans = [a or b for a, b in _QUOTED_RE.findall(query)]
        if not spans:
            return None
        return max(spans, key=len)
    return None


def complete_slots(
    query: str,
    schema: "ArgumentSchema",
    partial: Mapping[str, str],
) -> dict[str, str]:
    """Fill missing required fields by extracting values from the query.

    Existing entries are never overwritten, optional fields are never
    auto-filled, and unfillable required fields simply stay absent for
    validation to report.
    """
    completed = dict(partial)
    for slot in schema.required:
        if slot.name in completed:
            continue
        value = extract_slot(query, slot.type)
        if value is not None:
            completed[slot.name] = value.strip()
    return completed
