"""Stage backends for the two-stage router.

Three interchangeable backends implement action decision (stage one) and
structural grounding (stage two): a rule-based decider, a retrieve-rank
decider, and a client for a remote chat-completions model. A one-shot
routing call is also provided as an evaluation baseline; it skips the
two-stage split and the safeguard heuristics entirely.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field, replace
from typing import Any, Protocol, Sequence, Union

from .fallback import (
    SafeguardConfig,
    complete_slots,
    find_sensitive_cue,
    find_sequential_marker,
    heuristic_score,
    recover_candidate,
)
from .model import (
    CLOUD,
    MAX_PLAN_STEPS,
    EXECUTABLE_ACTIONS,
    ParseFailure,
    Plan,
    PlanStep,
    RoutingAction,
    RoutingInput,
    RoutingOutput,
    StageFailure,
    parse_routing_output,
)

RULE_BASED = "rule_based"
RETRIEVE_RANK = "retrieve_rank"
REMOTE = "remote"
BACKEND_KINDS = (RULE_BASED, RETRIEVE_RANK, REMOTE)

REMOTE_KEY_ENV = "AGENTGATE_REMOTE_KEY"

# Stage-one confidence table for the rule-based decider.
RULE_CONFIDENCE = {
    "escalate_cue": 0.95,
    "call_unique": 0.9,
    "call_tie": 0.5,
    "direct": 0.6,
    "plan": 0.7,
}

DEFAULT_REMOTE_CONFIDENCE = 0.75
DEFAULT_REMOTE_TIMEOUT = 30.0

DEFAULT_ACTION_TEMPLATE = (
    "You are a routing engine for a network of service agents. Decide how the "
    "user query should be handled. Reply with one JSON object: "
    '{"action": "CALL_AGENT"|"MULTI_AGENT_PLAN"|"DIRECT_ANSWER"|"ESCALATE", '
    '"rationale": string, "confidence": number between 0 and 1}.'
)

DEFAULT_STRUCTURE_TEMPLATE = (
    "You are a routing engine. The action has already been decided; ground it "
    "against the candidate agents. For CALL_AGENT reply "
    '{"target": agent_name, "args": object, "confidence": number}; for '
    'MULTI_AGENT_PLAN reply {"plan": [{"agent": agent_name, "args": object}], '
    '"confidence": number}. Use only agents from the candidate list.'
)

DEFAULT_ONE_SHOT_TEMPLATE = (
    "You are a dispatcher with a set of callable agents. Emit the complete "
    "routing decision as one JSON object with the keys action, target, args, "
    "plan, rationale, confidence_action, confidence_structure, "
    "confidence_effective, and backend_used."
)


class BackendUnavailableError(RuntimeError):
    """The remote backend could not be reached or replied out of protocol."""


class PreconditionViolationError(ValueError):
    """A decider operation was called outside its contract."""


class ChatTransport(Protocol):
    """Minimal chat-completions transport: request body in, content out."""

    def complete(self, request: dict) -> str: ...


class HttpChatTransport:
    """POSTs chat-completions requests over HTTP with a mandatory timeout."""

    def __init__(self, endpoint: str, timeout: float = DEFAULT_REMOTE_TIMEOUT) -> None:
        self.endpoint = endpoint
        self.timeout = timeout

    def complete(self, request: dict) -> str:
        import httpx

        headers = {}
        key = os.environ.get(REMOTE_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            response = httpx.post(
                self.endpoint, json=request, headers=headers, timeout=self.timeout
            )
            response.raise_for_status()
            body = response.json()
        except Exception as exc:
            raise BackendUnavailableError(f"remote request failed: {exc}") from exc
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailableError(
                "remote reply missing choices[0].message.content"
            ) from exc


@dataclass
class DeciderConfig:
    """Configuration for one routing backend.

    The remote fields (endpoint, model, templates, transport) only apply to
    kind="remote"; an injected transport takes precedence over the endpoint,
    which is how tests substitute an in-process mock.
    """

    kind: str = RULE_BASED
    endpoint: str | None = None
    model: str | None = None
    timeout: float = DEFAULT_REMOTE_TIMEOUT
    action_template: str = DEFAULT_ACTION_TEMPLATE
    structure_template: str = DEFAULT_STRUCTURE_TEMPLATE
    one_shot_template: str = DEFAULT_ONE_SHOT_TEMPLATE
    default_confidence: float = DEFAULT_REMOTE_CONFIDENCE
    transport: ChatTransport | None = None
    safeguards: SafeguardConfig = field(default_factory=SafeguardConfig)

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == REMOTE and self.endpoint is None and self.transport is None:
            raise ValueError("remote backend requires an endpoint or a transport")

    def _transport(self) -> ChatTransport:
        if self.transport is not None:
            return self.transport
        return HttpChatTransport(self.endpoint, timeout=self.timeout)


@dataclass(frozen=True)
class ActionDecision:
    """Stage-one result: the chosen action with rationale and confidence."""

    action: RoutingAction
    rationale: str | None
    confidence: float
    raw: str

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be within [0, 1]")


@dataclass(frozen=True)
class GroundingResult:
    """Stage-two result: exactly one of target or plan, with confidence."""

    target: str | None
    args: dict[str, str] | None
    plan: Plan | None
    confidence: float
    raw: str

    def __post_init__(self) -> None:
        if (self.target is None) == (self.plan is None):
            raise ValueError("grounding must produce exactly one of target or plan")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be within [0, 1]")


def _candidate_scores(
    candidates: Sequence, query: str, safeguards: SafeguardConfig
) -> list[float]:
    return [heuristic_score(card, query, safeguards) for card in candidates]


def _classify(
    query: str, candidates: Sequence, safeguards: SafeguardConfig
) -> tuple[RoutingAction, str, bool]:
    """Shared lexical action rules. Returns (action, rationale, unambiguous)."""
    cue = find_sensitive_cue(query, safeguards)
    if cue is not None:
        return RoutingAction.ESCALATE, f"sensitive cue matched: {cue!r}", True
    scores = _candidate_scores(candidates, query, safeguards)
    positives = sum(1 for s in scores if s > 0)
    marker = find_sequential_marker(query, safeguards)
    if marker is not None and len(candidates) >= 2 and positives >= 2:
        rationale = f"sequential marker {marker!r} across {positives} matching candidates"
        return RoutingAction.MULTI_AGENT_PLAN, rationale, True
    if positives > 0:
        top = max(scores)
        tied = scores.count(top) > 1
        best = candidates[scores.index(top)]
        return RoutingAction.CALL_AGENT, f"best lexical match: {best.name}", not tied
    return RoutingAction.DIRECT_ANSWER, "no candidate matched the query", not candidates


def _stage1_raw(action: RoutingAction, rationale: str, confidence: float) -> str:
    return json.dumps(
        {"action": action.value, "rationale": rationale, "confidence": confidence},
        ensure_ascii=False,
        separators=(",", ":"),
    )


def _rule_confidence(action: RoutingAction, unambiguous: bool) -> float:
    if action is RoutingAction.ESCALATE:
        return RULE_CONFIDENCE["escalate_cue"]
    if action is RoutingAction.MULTI_AGENT_PLAN:
        return RULE_CONFIDENCE["plan"]
    if action is RoutingAction.CALL_AGENT:
        return RULE_CONFIDENCE["call_unique"] if unambiguous else RULE_CONFIDENCE["call_tie"]
    return RULE_CONFIDENCE["direct"]


def _render_user_content(
    routing_input: RoutingInput, action: RoutingAction | None = None
) -> str:
    payload: dict[str, Any] = {
        "query": routing_input.query,
        "context": routing_input.context,
        "candidates": [card.to_dict() for card in routing_input.candidates],
    }
    if action is not None:
        payload["action"] = action.value
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":"))


def _remote_call(config: DeciderConfig, system: str, user: str) -> str:
    request = {
        "model": config.model or "",
        "messages": [
            {"role": "system", "content": system},
            {"role": "user", "content": user},
        ],
        "temperature": 0,
    }
    return config._transport().complete(request)


def _remote_confidence(data: dict, config: DeciderConfig) -> float | None:
    """Confidence from a stage reply; None signals an out-of-range value."""
    value = data.get("confidence", config.default_confidence)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return None
    if not 0.0 <= value <= 1.0:
        return None
    return float(value)


def decide_action(
    routing_input: RoutingInput, config: DeciderConfig
) -> Union[ActionDecision, StageFailure]:
    """Stage one: pick one of the four routing actions.

    The deterministic backends always succeed and always emit a parseable
    raw string. The remote backend returns a StageFailure when its reply
    cannot be read, and raises BackendUnavailableError on transport errors.
    """
    if config.kind in (RULE_BASED, RETRIEVE_RANK):
        action, rationale, unambiguous = _classify(
            routing_input.query, routing_input.candidates, config.safeguards
        )
        if config.kind == RULE_BASED:
            confidence = _rule_confidence(action, unambiguous)
        else:
            confidence = 0.9 if unambiguous else 0.5
        raw = _stage1_raw(action, rationale, confidence)
        return ActionDecision(action=action, rationale=rationale, confidence=confidence, raw=raw)

    content = _remote_call(
        config, config.action_template, _render_user_content(routing_input)
    )
    try:
        data = json.loads(content)
    except json.JSONDecodeError:
        return StageFailure(raw=content, reason="stage one reply is not JSON")
    if not isinstance(data, dict):
        return StageFailure(raw=content, reason="stage one reply is not an object")
    try:
        action = RoutingAction(data.get("action"))
    except ValueError:
        return StageFailure(raw=content, reason=f"unknown action {data.get('action')!r}")
    confidence = _remote_confidence(data, config)
    if confidence is None:
        return StageFailure(raw=content, reason="confidence outside [0, 1]")
    rationale = data.get("rationale")
    if rationale is not None and not isinstance(rationale, str):
        rationale = None
    return ActionDecision(action=action, rationale=rationale, confidence=confidence, raw=content)


def _normalized_share(scores: Sequence[float], chosen_index: int) -> float:
    total = sum(scores)
    if total <= 0:
        return 0.0
    return scores[chosen_index] / total


def _split_clauses(query: str, safeguards: SafeguardConfig) -> list[str]:
    pattern = re.compile(
        r"\b(?:" + "|".join(re.escape(m) for m in safeguards.sequential_markers) + r")\b",
        re.IGNORECASE,
    )
    parts = pattern.split(query)
    return [part.strip(" ,.;:") for part in parts if part.strip(" ,.;:")]


def build_fallback_plan(
    query: str,
    candidates: Sequence,
    safeguards: SafeguardConfig | None = None,
    fill_args: bool = True,
) -> Plan:
    """Deterministic plan construction over a non-empty candidate list.

    The query is split at sequential markers and each clause is routed to
    its best-scoring candidate in clause order. Queries that do not split
    into two clauses fall back to the top candidates for the whole query,
    repeating candidates if fewer than two exist.
    """
    cfg = safeguards or SafeguardConfig()
    if not candidates:
        raise PreconditionViolationError("plan construction requires candidates")
    clauses = _split_clauses(query, cfg)[:MAX_PLAN_STEPS]
    steps: list[PlanStep] = []
    if len(clauses) >= 2:
        for clause in clauses:
            card = recover_candidate(candidates, clause, cfg)
            args = complete_slots(clause, card.schema, {}) if fill_args else {}
            steps.append(PlanStep(agent_name=card.name, args=args))
    if len(steps) < 2:
        scores = _candidate_scores(candidates, query, cfg)
        ranked = sorted(range(len(candidates)), key=lambda i: (-scores[i], i))
        position = 0
        while len(steps) < 2:
            card = candidates[ranked[position % len(ranked)]]
            args = complete_slots(query, card.schema, {}) if fill_args else {}
            steps.append(PlanStep(agent_name=card.name, args=args))
            position += 1
    return Plan(steps=tuple(steps))


def _plan_confidence(plan: Plan, query: str, candidates: Sequence, cfg: SafeguardConfig) -> float:
    """Mean per-step normalized score share, matched clause by clause."""
    clauses = _split_clauses(query, cfg)
    by_name = {card.name: index for index, card in enumerate(candidates)}
    shares: list[float] = []
    for position, step in enumerate(plan.steps):
        clause = clauses[position] if position < len(clauses) else query
        scores = _candidate_scores(candidates, clause, cfg)
        shares.append(_normalized_share(scores, by_name[step.agent_name]))
    return sum(shares) / len(shares)


def _stage2_raw(result: dict) -> str:
    return json.dumps(result, ensure_ascii=False, separators=(",", ":"))


def _ground_deterministic(
    routing_input: RoutingInput, action: RoutingAction, config: DeciderConfig
) -> Union[GroundingResult, StageFailure]:
    cfg = config.safeguards
    candidates = routing_input.candidates
    if not candidates:
        return StageFailure(reason="no candidates available for grounding")
    if action is RoutingAction.CALL_AGENT:
        scores = _candidate_scores(candidates, routing_input.query, cfg)
        card = recover_candidate(candidates, routing_input.query, cfg)
        index = next(i for i, c in enumerate(candidates) if c.name == card.name)
        confidence = _normalized_share(scores, index)
        # The rule-based decider only matches metadata; slot filling is left
        # to the pipeline's completion pass.
        if config.kind == RETRIEVE_RANK:
            args = complete_slots(routing_input.query, card.schema, {})
        else:
            args = {}
        raw = _stage2_raw({"target": card.name, "args": args, "confidence": confidence})
        return GroundingResult(
            target=card.name, args=args, plan=None, confidence=confidence, raw=raw
        )
    fill_args = config.kind == RETRIEVE_RANK
    plan = build_fallback_plan(routing_input.query, candidates, cfg, fill_args=fill_args)
    confidence = _plan_confidence(plan, routing_input.query, candidates, cfg)
    raw = _stage2_raw(
        {
            "plan": [{"agent": s.agent_name, "args": dict(s.args)} for s in plan.steps],
            "confidence": confidence,
        }
    )
    return GroundingResult(target=None, args=None, plan=plan, confidence=confidence, raw=raw)


def _filter_schema_args(args: Any, card) -> dict[str, str]:
    """Keep only argument keys declared by the agent's schema."""
    if not isinstance(args, dict):
        return {}
    allowed = set(card.schema.field_names())
    return {k: v for k, v in args.items() if k in allowed}


def _ground_remote(
    routing_input: RoutingInput, action: RoutingAction, config: DeciderConfig
) -> Union[GroundingResult, StageFailure]:
    content = _remote_call(
        config,
        config.structure_template,
        _render_user_content(routing_input, action=action),
    )
    try:
        data = json.loads(content)
    except json.JSONDecodeError:
        return StageFailure(raw=content, reason="stage two reply is not JSON")
    if not isinstance(data, dict):
        return StageFailure(raw=content, reason="stage two reply is not an object")
    confidence = _remote_confidence(data, config)
    if confidence is None:
        return StageFailure(raw=content, reason="confidence outside [0, 1]")
    names = {card.name: card for card in routing_input.candidates}

    if action is RoutingAction.CALL_AGENT:
        target = data.get("target")
        if not isinstance(target, str) or target not in names:
            return StageFailure(raw=content, reason=f"target {target!r} not in candidates")
        args = _filter_schema_args(data.get("args"), names[target])
        return GroundingResult(
            target=target, args=args, plan=None, confidence=confidence, raw=content
        )

    entries = data.get("plan")
    if not isinstance(entries, list) or not entries:
        return StageFailure(raw=content, reason="stage two reply has no plan")
    steps = []
    for entry in entries:
        if not isinstance(entry, dict):
            return StageFailure(raw=content, reason="plan steps must be objects")
        agent = entry.get("agent")
        if not isinstance(agent, str) or agent not in names:
            return StageFailure(raw=content, reason=f"plan agent {agent!r} not in candidates")
        steps.append(
            PlanStep(agent_name=agent, args=_filter_schema_args(entry.get("args"), names[agent]))
        )
    if not 2 <= len(steps) <= MAX_PLAN_STEPS:
        return StageFailure(raw=content, reason=f"plan length {len(steps)} out of bounds")
    return GroundingResult(
        target=None, args=None, plan=Plan(steps=tuple(steps)), confidence=confidence, raw=content
    )


def ground_structure(
    routing_input: RoutingInput, action: RoutingAction, config: DeciderConfig
) -> Union[GroundingResult, StageFailure]:
    """Stage two: instantiate an executable action into target or plan.

    Successful results are candidate-consistent by construction; replies
    that reference unknown agents come back as StageFailure for the
    pipeline's recovery rules to repair.
    """
    if action not in EXECUTABLE_ACTIONS:
        raise PreconditionViolationError(
            f"ground_structure requires an executable action, got {action}"
        )
    if config.kind in (RULE_BASED, RETRIEVE_RANK):
        return _ground_deterministic(routing_input, action, config)
    return _ground_remote(routing_input, action, config)


def _degraded_one_shot() -> RoutingOutput:
    return RoutingOutput(
        action=RoutingAction.DIRECT_ANSWER,
        confidence_action=0.0,
        backend_used=CLOUD,
    )


def one_shot_route(routing_input: RoutingInput, config: DeciderConfig) -> RoutingOutput:
    """Single-call baseline: ask the remote model for the whole output.

    No stage split, no safeguards, no recovery. Unparseable or
    candidate-inconsistent replies degrade to a zero-confidence
    DIRECT_ANSWER so the evaluation harness can still score them.
    """
    if config.kind != REMOTE:
        raise PreconditionViolationError("one_shot_route requires a remote backend")
    content = _remote_call(
        config, config.one_shot_template, _render_user_content(routing_input)
    )
    parsed = parse_routing_output(content)
    if isinstance(parsed, ParseFailure):
        return _degraded_one_shot()
    names = set(routing_input.candidate_names())
    if parsed.action is RoutingAction.CALL_AGENT and parsed.target not in names:
        return _degraded_one_shot()
    if parsed.action is RoutingAction.MULTI_AGENT_PLAN and not set(
        parsed.plan.agent_names()
    ) <= names:
        return _degraded_one_shot()
    return replace(parsed, backend_used=CLOUD)
