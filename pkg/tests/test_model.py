import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentgate.model import (
    InvalidOutputError,
    ParseFailure,
    Plan,
    PlanStep,
    RoutingAction,
    RoutingInput,
    RoutingOutput,
    exec_projection,
    normalize_args,
    parse_routing_output,
    serialize_routing_output,
)
from support import random_valid_output


def call_output(**overrides):
    kwargs = dict(
        action=RoutingAction.CALL_AGENT,
        confidence_action=0.9,
        target="weather_api",
        args={"city": "Beijing"},
    )
    kwargs.update(overrides)
    return RoutingOutput(**kwargs)


def test_exec_projection_call():
    output = call_output()
    assert exec_projection(output) == ("weather_api", {"city": "Beijing"})


def test_exec_projection_direct_is_empty():
    output = RoutingOutput(
        action=RoutingAction.DIRECT_ANSWER, confidence_action=0.6, rationale="hello"
    )
    assert exec_projection(output) is None


def test_exec_projection_plan_passthrough():
    plan = Plan(steps=(PlanStep("a", {}), PlanStep("b", {"x": "1"})))
    output = RoutingOutput(
        action=RoutingAction.MULTI_AGENT_PLAN, confidence_action=0.7, plan=plan
    )
    assert exec_projection(output) is plan


def test_parse_round_trips_canonical_form():
    output = call_output(confidence_structure=0.75, rationale="match")
    raw = serialize_routing_output(output)
    parsed = parse_routing_output(raw)
    assert parsed == output
    assert serialize_routing_output(parsed) == raw


def test_parse_malformed_text():
    result = parse_routing_output("not json {")
    assert isinstance(result, ParseFailure)
    assert result.raw == "not json {"


def test_parse_unknown_action():
    raw = json.dumps({"action": "FLY_TO_MOON", "confidence_action": 0.5})
    result = parse_routing_output(raw)
    assert isinstance(result, ParseFailure)
    assert "FLY_TO_MOON" in result.reason


def test_parse_rejects_unknown_keys():
    raw = json.dumps(
        {"action": "DIRECT_ANSWER", "confidence_action": 0.5, "extra": True}
    )
    result = parse_routing_output(raw)
    assert isinstance(result, ParseFailure)
    assert "extra" in result.reason


def test_parse_requires_action_and_confidence():
    assert isinstance(parse_routing_output("{}"), ParseFailure)
    assert isinstance(
        parse_routing_output(json.dumps({"action": "ESCALATE"})), ParseFailure
    )


def test_parse_inconsistent_effective_confidence():
    raw = json.dumps(
        {
            "action": "DIRECT_ANSWER",
            "confidence_action": 0.5,
            "confidence_effective": 0.9,
        }
    )
    assert isinstance(parse_routing_output(raw), ParseFailure)


def test_call_requires_target():
    with pytest.raises(InvalidOutputError):
        RoutingOutput(action=RoutingAction.CALL_AGENT, confidence_action=0.9)


def test_plan_bounds_enforced():
    one_step = Plan(steps=(PlanStep("a", {}),))
    with pytest.raises(InvalidOutputError):
        RoutingOutput(
            action=RoutingAction.MULTI_AGENT_PLAN, confidence_action=0.7, plan=one_step
        )
    nine = Plan(steps=tuple(PlanStep(f"a{i}", {}) for i in range(9)))
    with pytest.raises(InvalidOutputError):
        RoutingOutput(
            action=RoutingAction.MULTI_AGENT_PLAN, confidence_action=0.7, plan=nine
        )


def test_terminal_actions_carry_no_structure():
    with pytest.raises(InvalidOutputError):
        RoutingOutput(
            action=RoutingAction.ESCALATE, confidence_action=0.9, args={"x": "1"}
        )
    with pytest.raises(InvalidOutputError):
        RoutingOutput(
            action=RoutingAction.DIRECT_ANSWER, confidence_action=0.9, target="a"
        )


def test_effective_confidence_is_min_of_present_stages():
    output = call_output(confidence_action=0.9, confidence_structure=0.7)
    assert output.confidence_effective == 0.7
    solo = RoutingOutput(action=RoutingAction.DIRECT_ANSWER, confidence_action=0.4)
    assert solo.confidence_effective == 0.4
    with pytest.raises(InvalidOutputError):
        call_output(confidence_structure=0.7, confidence_effective=0.9)


def test_confidence_range_enforced():
    with pytest.raises(InvalidOutputError):
        call_output(confidence_action=1.5)
    with pytest.raises(InvalidOutputError):
        call_output(confidence_structure=-0.1)


def test_normalize_args_coerces_scalars():
    assert normalize_args({"n": 3, "f": 2.5, "b": True, "s": "  x "}) == {
        "n": "3",
        "f": "2.5",
        "b": "true",
        "s": "x",
    }
    with pytest.raises(InvalidOutputError):
        normalize_args({"bad": ["nested"]})


def test_routing_input_requires_query():
    with pytest.raises(ValueError):
        RoutingInput(query="   ")


def test_round_trip_on_random_outputs():
    rng = random.Random(7)
    for _ in range(200):
        output = random_valid_output(rng)
        assert parse_routing_output(serialize_routing_output(output)) == output


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_exec_projection_never_leaks_agent_material(seed):
    output = random_valid_output(random.Random(seed))
    projected = exec_projection(output)
    if output.action in (RoutingAction.DIRECT_ANSWER, RoutingAction.ESCALATE):
        assert projected is None
    elif output.action is RoutingAction.CALL_AGENT:
        assert projected == (output.target, dict(output.args or {}))
    else:
        assert projected is output.plan


def test_every_output_has_one_of_four_actions():
    rng = random.Random(11)
    allowed = set(RoutingAction)
    for _ in range(100):
        assert random_valid_output(rng).action in allowed
    with pytest.raises(ValueError):
        RoutingOutput(action="NOT_AN_ACTION", confidence_action=0.5)
