"""Core routing data model: the four-way action space, structured routing
outputs, and the canonical JSON codec used on the wire and in benchmark files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any, Mapping, Sequence

if TYPE_CHECKING:
    from .registry import AgentCard

EDGE = "edge"
CLOUD = "cloud"
BACKENDS = (EDGE, CLOUD)

MIN_PLAN_STEPS = 2
MAX_PLAN_STEPS = 8

CONFIDENCE_DECIMALS = 6

# Canonical wire keys of a serialized RoutingOutput, in order.
OUTPUT_KEYS = (
    "action",
    "target",
    "args",
    "plan",
    "rationale",
    "confidence_action",
    "confidence_structure",
    "confidence_effective",
    "backend_used",
)


class RoutingAction(str, Enum):
    """Closed action space for a routing decision. No other value exists."""

    CALL_AGENT = "CALL_AGENT"
    MULTI_AGENT_PLAN = "MULTI_AGENT_PLAN"
    DIRECT_ANSWER = "DIRECT_ANSWER"
    ESCALATE = "ESCALATE"


EXECUTABLE_ACTIONS = (RoutingAction.CALL_AGENT, RoutingAction.MULTI_AGENT_PLAN)
TERMINAL_ACTIONS = (RoutingAction.DIRECT_ANSWER, RoutingAction.ESCALATE)


class InvalidOutputError(ValueError):
    """A routing output violates its action-dependent field invariants."""


@dataclass(frozen=True)
class ParseFailure:
    """Value returned when a raw backend string cannot become a RoutingOutput.

    Consumed by the fallback heuristics and by the output-validity metric;
    parsing never raises.
    """

    raw: str
    reason: str = ""


@dataclass(frozen=True)
class StageFailure:
    """Value meaning a pipeline stage produced no usable structured result."""

    raw: str = ""
    reason: str = ""


@dataclass(frozen=True)
class RoutingInput:
    """A routing request: query, candidate agents, and optional context."""

    query: str
    candidates: tuple = ()
    context: str | None = None

    def __post_init__(self) -> None:
        if not self.query or not self.query.strip():
            raise ValueError("query must be non-empty")
        object.__setattr__(self, "candidates", tuple(self.candidates))

    def candidate_names(self) -> tuple[str, ...]:
        return tuple(card.name for card in self.candidates)


@dataclass(frozen=True)
class PlanStep:
    """One plan entry: an agent name plus the argument set for that step."""

    agent_name: str
    args: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.agent_name:
            raise InvalidOutputError("plan step requires an agent name")
        object.__setattr__(self, "args", normalize_args(self.args))


@dataclass(frozen=True)
class Plan:
    """An ordered multi-agent execution plan."""

    steps: tuple[PlanStep, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))

    def __len__(self) -> int:
        return len(self.steps)

    def agent_names(self) -> tuple[str, ...]:
        return tuple(step.agent_name for step in self.steps)


def normalize_args(values: Mapping[str, Any]) -> dict[str, str]:
    """Normalize an argument mapping to trimmed string values.

    Scalars (numbers, booleans) are coerced to their canonical string form;
    nested containers are rejected.
    """
    normalized: dict[str, str] = {}
    for key, value in values.items():
        if not isinstance(key, str):
            raise InvalidOutputError(f"argument name must be a string, got {key!r}")
        if isinstance(value, bool):
            normalized[key] = "true" if value else "false"
        elif isinstance(value, (int, float)):
            normalized[key] = json.dumps(value)
        elif isinstance(value, str):
            normalized[key] = value.strip()
        else:
            raise InvalidOutputError(f"argument {key!r} must be a scalar value")
    return normalized


def _check_confidence(name: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidOutputError(f"{name} must be a number, got {value!r}")
    if not 0.0 <= value <= 1.0:
        raise InvalidOutputError(f"{name} must be within [0, 1], got {value!r}")
    return round(float(value), CONFIDENCE_DECIMALS)


@dataclass(frozen=True)
class RoutingOutput:
    """The structured result of routing one query.

    Field activation depends on the action: a call carries a target and
    arguments, a plan carries ordered steps, and the two terminal actions
    carry neither. `confidence_effective` is always the minimum of the
    stage confidences that are present; when omitted it is computed.
    """

    action: RoutingAction
    confidence_action: float
    target: str | None = None
    args: dict[str, str] | None = None
    plan: Plan | None = None
    rationale: str | None = None
    confidence_structure: float | None = None
    confidence_effective: float | None = None
    backend_used: str = EDGE

    def __post_init__(self) -> None:
        action = RoutingAction(self.action)
        object.__setattr__(self, "action", action)

        conf_act = _check_confidence("confidence_action", self.confidence_action)
        object.__setattr__(self, "confidence_action", conf_act)
        conf_str = self.confidence_structure
        if conf_str is not None:
            conf_str = _check_confidence("confidence_structure", conf_str)
            object.__setattr__(self, "confidence_structure", conf_str)

        expected_eff = conf_act if conf_str is None else min(conf_act, conf_str)
        if self.confidence_effective is None:
            object.__setattr__(self, "confidence_effective", expected_eff)
        else:
            conf_eff = _check_confidence("confidence_effective", self.confidence_effective)
            if conf_eff != expected_eff:
                raise InvalidOutputError(
                    "confidence_effective must equal the minimum of the present "
                    f"stage confidences ({expected_eff}), got {conf_eff}"
                )
            object.__setattr__(self, "confidence_effective", conf_eff)

        if self.backend_used not in BACKENDS:
            raise InvalidOutputError(f"backend_used must be one of {BACKENDS}")

        if self.args is not None:
            object.__setattr__(self, "args", normalize_args(self.args))

        if action is RoutingAction.CALL_AGENT:
            if not self.target:
                raise InvalidOutputError("CALL_AGENT output requires a target agent")
            if self.plan is not None:
                raise InvalidOutputError("CALL_AGENT output cannot carry a plan")
        elif action is RoutingAction.MULTI_AGENT_PLAN:
            if self.plan is None:
                raise InvalidOutputError("MULTI_AGENT_PLAN output requires a plan")
            if self.target is not None:
                raise InvalidOutputError("MULTI_AGENT_PLAN output cannot carry a target")
            if not MIN_PLAN_STEPS <= len(self.plan) <= MAX_PLAN_STEPS:
                raise InvalidOutputError(
                    f"plan must have between {MIN_PLAN_STEPS} and {MAX_PLAN_STEPS} steps, "
                    f"got {len(self.plan)}"
                )
        else:
            if self.target is not None or self.args is not None or self.plan is not None:
                raise InvalidOutputError(
                    f"{action.value} output cannot carry target, args, or plan"
                )

    def to_dict(self) -> dict[str, Any]:
        """Canonical wire form, with keys in the documented order."""
        plan = None
        if self.plan is not None:
            plan = [{"agent": s.agent_name, "args": dict(s.args)} for s in self.plan.steps]
        return {
            "action": self.action.value,
            "target": self.target,
            "args": dict(self.args) if self.args is not None else None,
            "plan": plan,
            "rationale": self.rationale,
            "confidence_action": self.confidence_action,
            "confidence_structure": self.confidence_structure,
            "confidence_effective": self.confidence_effective,
            "backend_used": self.backend_used,
        }


def serialize_routing_output(output: RoutingOutput) -> str:
    """Serialize to the canonical single-line JSON form."""
    return json.dumps(output.to_dict(), ensure_ascii=False, separators=(",", ":"))


def _parse_plan(value: Any) -> Plan:
    if not isinstance(value, list):
        raise InvalidOutputError("plan must be a list of steps")
    steps = []
    for entry in value:
        if not isinstance(entry, dict):
            raise InvalidOutputError("plan steps must be objects")
        unknown = set(entry) - {"agent", "args"}
        if unknown:
            raise InvalidOutputError(f"unknown plan step keys: {sorted(unknown)}")
        agent = entry.get("agent")
        if not isinstance(agent, str) or not agent:
            raise InvalidOutputError("plan step requires an 'agent' name")
        args = entry.get("args") or {}
        if not isinstance(args, dict):
            raise InvalidOutputError("plan step args must be an object")
        steps.append(PlanStep(agent_name=agent, args=args))
    return Plan(steps=tuple(steps))


def parse_routing_output(raw: str) -> RoutingOutput | ParseFailure:
    """Parse a raw string into a RoutingOutput, or a ParseFailure value.

    Parsing is strict: unknown keys, unknown actions, and invariant
    violations all fail. This function never raises.
    """
    try:
        data = json.loads(raw)
    except (json.JSONDecodeError, TypeError) as exc:
        return ParseFailure(raw=raw, reason=f"invalid JSON: {exc}")
    if not isinstance(data, dict):
        return ParseFailure(raw=raw, reason="top-level value must be an object")

    unknown = set(data) - set(OUTPUT_KEYS)
    if unknown:
        return ParseFailure(raw=raw, reason=f"unknown keys: {sorted(unknown)}")
    if "action" not in data:
        return ParseFailure(raw=raw, reason="missing 'action'")
    if "confidence_action" not in data:
        return ParseFailure(raw=raw, reason="missing 'confidence_action'")

    try:
        action = RoutingAction(data["action"])
    except ValueError:
        return ParseFailure(raw=raw, reason=f"unknown action: {data['action']!r}")

    target = data.get("target")
    if target is not None and not isinstance(target, str):
        return ParseFailure(raw=raw, reason="target must be a string or null")
    rationale = data.get("rationale")
    if rationale is not None and not isinstance(rationale, str):
        return ParseFailure(raw=raw, reason="rationale must be a string or null")

    args = data.get("args")
    if args is not None and not isinstance(args, dict):
        return ParseFailure(raw=raw, reason="args must be an object or null")

    try:
        plan = _parse_plan(data["plan"]) if data.get("plan") is not None else None
        output = RoutingOutput(
            action=action,
            target=target,
            args=args,
            plan=plan,
            rationale=rationale,
            confidence_action=data["confidence_action"],
            confidence_structure=data.get("confidence_structure"),
            confidence_effective=data.get("confidence_effective"),
            backend_used=data.get("backend_used", EDGE),
        )
    except InvalidOutputError as exc:
        return ParseFailure(raw=raw, reason=str(exc))
    return output


def exec_projection(output: RoutingOutput):
    """Project a routing output onto its executable portion.

    Returns (target, args) for a call, the plan for a multi-agent plan, and
    None for the two non-invocation actions.
    """
    if output.action is RoutingAction.CALL_AGENT:
        if not output.target:
            raise InvalidOutputError("CALL_AGENT output lost its target")
        return output.target, dict(output.args or {})
    if output.action is RoutingAction.MULTI_AGENT_PLAN:
        if output.plan is None:
            raise InvalidOutputError("MULTI_AGENT_PLAN output lost its plan")
        return output.plan
    return None
