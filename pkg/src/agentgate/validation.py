"""Structural checks over routing outputs.

A ValidationReport carries the three consistency signals (action, candidate,
schema) plus the field-level detail the slot-completion fallback and the
output-validity metric consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Union

from .model import (
    MAX_PLAN_STEPS,
    MIN_PLAN_STEPS,
    ParseFailure,
    RoutingAction,
    RoutingInput,
    RoutingOutput,
)


@dataclass
class ValidationReport:
    is_parseable: bool
    action_consistent: bool
    candidate_consistent: bool
    schema_valid: bool
    missing_required: list[str] = field(default_factory=list)
    unknown_fields: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "is_parseable": self.is_parseable,
            "action_consistent": self.action_consistent,
            "candidate_consistent": self.candidate_consistent,
            "schema_valid": self.schema_valid,
            "missing_required": list(self.missing_required),
            "unknown_fields": list(self.unknown_fields),
        }


def action_consistent(output: RoutingOutput) -> bool:
    """True when exactly the fields activated by the action are present."""
    if output.action is RoutingAction.CALL_AGENT:
        activation = output.target is not None and output.plan is None
    elif output.action is RoutingAction.MULTI_AGENT_PLAN:
        activation = (
            output.plan is not None
            and output.target is None
            and MIN_PLAN_STEPS <= len(output.plan) <= MAX_PLAN_STEPS
        )
    else:
        activation = output.target is None and output.args is None and output.plan is None
    expected = (
        output.confidence_action
        if output.confidence_structure is None
        else min(output.confidence_action, output.confidence_structure)
    )
    return activation and output.confidence_effective == expected


def _is_numeral(value: str) -> bool:
    try:
        float(value)
    except (TypeError, ValueError):
        return False
    return True


def _check_args_against_schema(
    args: dict[str, str] | None, card
) -> tuple[bool, list[str], list[str]]:
    present = args or {}
    missing = [name for name in card.schema.required_names() if name not in present]
    known = set(card.schema.field_names())
    unknown = [name for name in present if name not in known]
    ok = not missing and not unknown
    # Values are only checked for plausibility: number slots must be numerals.
    for name, value in present.items():
        if card.schema.slot_type(name) == "number" and not _is_numeral(value):
            ok = False
    return ok, missing, unknown


def validate_output(
    output: Union[RoutingOutput, ParseFailure], routing_input: RoutingInput
) -> ValidationReport:
    """Check one output for action, candidate, and schema consistency.

    A ParseFailure reports every flag false. Candidate consistency requires
    every referenced agent name to come from the input's candidate set;
    schema validity additionally requires all required fields present and no
    undeclared fields, per plan step for plans.
    """
    if isinstance(output, ParseFailure):
        return ValidationReport(
            is_parseable=False,
            action_consistent=False,
            candidate_consistent=False,
            schema_valid=False,
        )

    cards = {card.name: card for card in routing_input.candidates}
    consistent = action_consistent(output)

    if output.action is RoutingAction.CALL_AGENT:
        candidate_ok = output.target in cards
        if candidate_ok:
            schema_ok, missing, unknown = _check_args_against_schema(
                output.args, cards[output.target]
            )
        else:
            schema_ok, missing, unknown = False, [], []
    elif output.action is RoutingAction.MULTI_AGENT_PLAN:
        steps = output.plan.steps if output.plan is not None else ()
        candidate_ok = all(step.agent_name in cards for step in steps) and bool(steps)
        schema_ok, missing, unknown = True, [], []
        for step in steps:
            card = cards.get(step.agent_name)
            if card is None:
                schema_ok = False
                continue
            step_ok, step_missing, step_unknown = _check_args_against_schema(step.args, card)
            schema_ok = schema_ok and step_ok
            missing.extend(name for name in step_missing if name not in missing)
            unknown.extend(name for name in step_unknown if name not in unknown)
    else:
        candidate_ok = True
        schema_ok, missing, unknown = True, [], []

    return ValidationReport(
        is_parseable=True,
        action_consistent=consistent,
        candidate_consistent=candidate_ok,
        schema_valid=schema_ok,
        missing_required=missing,
        unknown_fields=unknown,
    )
