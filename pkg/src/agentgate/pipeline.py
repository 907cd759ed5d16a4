"""Confidence-aware routing pipeline.

Each attempt runs stage one, applies the safeguard adjustment, grounds
executable actions with candidate recovery and slot completion, and computes
the effective confidence. When that confidence falls below the threshold and
a cloud decider is configured, the whole procedure repeats exactly once on
the cloud backend; safeguards screen both attempts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence, Union

from .deciders import (
    ActionDecision,
    BackendUnavailableError,
    DeciderConfig,
    GroundingResult,
    build_fallback_plan,
    decide_action,
    ground_structure,
)
from .fallback import SafeguardConfig, adjust_action, complete_slots, recover_candidate
from .model import (
    CLOUD,
    EDGE,
    Plan,
    PlanStep,
    RoutingAction,
    RoutingInput,
    RoutingOutput,
    StageFailure,
    TERMINAL_ACTIONS,
)
from .validation import ValidationReport, validate_output

MAX_BACKEND_ATTEMPTS = 2

DEFAULT_TAU = 0.8


class DomainError(ValueError):
    """A confidence value fell outside [0, 1]."""


@dataclass
class PipelineConfig:
    """Pipeline wiring: edge decider, optional cloud decider, threshold.

    Without a cloud decider the backend fallback is disabled regardless of
    the threshold. Values of tau above 1 force the fallback on every input.
    """

    edge: DeciderConfig
    cloud: DeciderConfig | None = None
    tau: float = DEFAULT_TAU
    safeguards: SafeguardConfig = field(default_factory=SafeguardConfig)

    def __post_init__(self) -> None:
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")


@dataclass
class RouteAttempt:
    """Observability record for one backend attempt."""

    backend: str
    stage1_raw: str
    stage1_action: str | None
    adjusted_action: str
    stage2_raw: str | None
    recovery_applied: bool
    slots_completed: list[str]
    gamma_act: float
    gamma_str: float | None
    gamma_eff: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "backend": self.backend,
            "stage1_raw": self.stage1_raw,
            "stage1_action": self.stage1_action,
            "adjusted_action": self.adjusted_action,
            "stage2_raw": self.stage2_raw,
            "recovery_applied": self.recovery_applied,
            "slots_completed": list(self.slots_completed),
            "gamma_act": self.gamma_act,
            "gamma_str": self.gamma_str,
            "gamma_eff": self.gamma_eff,
        }


@dataclass
class RouteTrace:
    attempts: list[RouteAttempt] = field(default_factory=list)
    validation: ValidationReport | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "attempts": [attempt.to_dict() for attempt in self.attempts],
            "validation": self.validation.to_dict() if self.validation else None,
        }


def effective_confidence(gamma_act: float, gamma_str: float | None = None) -> float:
    """Minimum of the present stage confidences."""
    if not 0.0 <= gamma_act <= 1.0:
        raise DomainError(f"gamma_act must be within [0, 1], got {gamma_act}")
    if gamma_str is None:
        return gamma_act
    if not 0.0 <= gamma_str <= 1.0:
        raise DomainError(f"gamma_str must be within [0, 1], got {gamma_str}")
    return min(gamma_act, gamma_str)


def select_backend(gamma_eff: float, tau: float, cloud_available: bool) -> str:
    """Cloud exactly when the effective confidence is strictly below tau."""
    if gamma_eff < tau and cloud_available:
        return CLOUD
    return EDGE


def _complete_call_args(
    query: str, card, args: dict[str, str]
) -> tuple[dict[str, str], list[str]]:
    if all(name in args for name in card.schema.required_names()):
        return args, []
    completed = complete_slots(query, card.schema, args)
    added = sorted(set(completed) - set(args))
    return completed, added


def _complete_plan_args(query: str, plan: Plan, cards_by_name: dict) -> tuple[Plan, list[str]]:
    steps: list[PlanStep] = []
    added: list[str] = []
    for position, step in enumerate(plan.steps):
        card = cards_by_name[step.agent_name]
        completed, step_added = _complete_call_args(query, card, dict(step.args))
        added.extend(f"step{position}.{name}" for name in step_added)
        steps.append(PlanStep(agent_name=step.agent_name, args=completed))
    return Plan(steps=tuple(steps)), added


def _attempt(
    routing_input: RoutingInput,
    decider: DeciderConfig,
    backend_name: str,
    config: PipelineConfig,
) -> tuple[RoutingOutput, RouteAttempt]:
    """One full pass: stage one, safeguards, stage two, repairs."""
    may_degrade = config.cloud is not None

    try:
        stage1 = decide_action(routing_input, decider)
    except BackendUnavailableError:
        if not may_degrade:
            raise
        stage1 = StageFailure(reason="stage one transport failure")

    if isinstance(stage1, ActionDecision):
        gamma_act = stage1.confidence
        rationale = stage1.rationale
        stage1_raw = stage1.raw
        stage1_action = stage1.action.value
    else:
        gamma_act = 0.0
        rationale = None
        stage1_raw = stage1.raw
        stage1_action = None

    adjusted = adjust_action(
        routing_input.query, routing_input.candidates, stage1, config.safeguards
    )
    candidates = routing_input.candidates
    cards_by_name = {card.name: card for card in candidates}

    if adjusted in TERMINAL_ACTIONS:
        output = RoutingOutput(
            action=adjusted,
            confidence_action=gamma_act,
            rationale=rationale,
            backend_used=backend_name,
        )
        attempt = RouteAttempt(
            backend=backend_name,
            stage1_raw=stage1_raw,
            stage1_action=stage1_action,
            adjusted_action=adjusted.value,
            stage2_raw=None,
            recovery_applied=False,
            slots_completed=[],
            gamma_act=gamma_act,
            gamma_str=None,
            gamma_eff=output.confidence_effective,
        )
        return output, attempt

    try:
        stage2 = ground_structure(routing_input, adjusted, decider)
    except BackendUnavailableError:
        if not may_degrade:
            raise
        stage2 = StageFailure(reason="stage two transport failure")

    recovery_applied = False
    slots_completed: list[str] = []
    stage2_raw = stage2.raw if stage2.raw else None

    # Grounding is impossible without candidates; degrade to a direct answer
    # with zero structural confidence rather than fail the route.
    if not candidates:
        output = RoutingOutput(
            action=RoutingAction.DIRECT_ANSWER,
            confidence_action=gamma_act,
            confidence_structure=0.0,
            rationale=rationale,
            backend_used=backend_name,
        )
        attempt = RouteAttempt(
            backend=backend_name,
            stage1_raw=stage1_raw,
            stage1_action=stage1_action,
            adjusted_action=adjusted.value,
            stage2_raw=stage2_raw,
            recovery_applied=True,
            slots_completed=[],
            gamma_act=gamma_act,
            gamma_str=0.0,
            gamma_eff=output.confidence_effective,
        )
        return output, attempt

    if adjusted is RoutingAction.CALL_AGENT:
        if isinstance(stage2, GroundingResult) and stage2.target in cards_by_name:
            target = stage2.target
            args = dict(stage2.args or {})
            gamma_str = stage2.confidence
        else:
            card = recover_candidate(candidates, routing_input.query, config.safeguards)
            target = card.name
            args = {}
            gamma_str = 0.0
            recovery_applied = True
        args, slots_completed = _complete_call_args(
            routing_input.query, cards_by_name[target], args
        )
        output = RoutingOutput(
            action=adjusted,
            confidence_action=gamma_act,
            target=target,
            args=args,
            rationale=rationale,
            confidence_structure=gamma_str,
            backend_used=backend_name,
        )
    else:
        step_names_ok = (
            isinstance(stage2, GroundingResult)
            and stage2.plan is not None
            and set(stage2.plan.agent_names()) <= set(cards_by_name)
        )
        if step_names_ok:
            plan = stage2.plan
            gamma_str = stage2.confidence
        else:
            plan = build_fallback_plan(
                routing_input.query, candidates, config.safeguards, fill_args=False
            )
            gamma_str = 0.0
            recovery_applied = True
        plan, slots_completed = _complete_plan_args(routing_input.query, plan, cards_by_name)
        output = RoutingOutput(
            action=adjusted,
            confidence_action=gamma_act,
            plan=plan,
            rationale=rationale,
            confidence_structure=gamma_str,
            backend_used=backend_name,
        )

    attempt = RouteAttempt(
        backend=backend_name,
        stage1_raw=stage1_raw,
        stage1_action=stage1_action,
        adjusted_action=adjusted.value,
        stage2_raw=stage2_raw,
        recovery_applied=recovery_applied,
        slots_completed=slots_completed,
        gamma_act=gamma_act,
        gamma_str=gamma_str,
        gamma_eff=output.confidence_effective,
    )
    return output, attempt


def route(
    routing_input: RoutingInput, config: PipelineConfig
) -> tuple[RoutingOutput, RouteTrace]:
    """Route one input, with at most one confidence-triggered cloud retry.

    Raises BackendUnavailableError only when the edge backend fails at the
    transport level and no cloud decider is configured; any other stage
    failure degrades through the safeguard rules instead.
    """
    trace = RouteTrace()
    backends: list[tuple[str, DeciderConfig]] = [(EDGE, config.edge)]
    if config.cloud is not None:
        backends.append((CLOUD, config.cloud))

    output: RoutingOutput | None = None
    for backend_name, decider in backends[:MAX_BACKEND_ATTEMPTS]:
        output, attempt = _attempt(routing_input, decider, backend_name, config)
        trace.attempts.append(attempt)
        if backend_name == EDGE and config.cloud is not None:
            if select_backend(output.confidence_effective, config.tau, True) == CLOUD:
                continue
        break

    trace.validation = validate_output(output, routing_input)
    return output, trace
