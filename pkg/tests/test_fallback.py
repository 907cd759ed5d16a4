import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agentgate.fallback import (
    DEFAULT_SAFEGUARDS,
    EmptyCandidatesError,
    SafeguardConfig,
    adjust_action,
    complete_slots,
    extract_slot,
    heuristic_score,
    recover_candidate,
    tokenize,
)
from agentgate.model import RoutingAction, StageFailure
from agentgate.registry import ArgumentSchema, SlotField
from support import WORDS, make_card, oracle_argmax, oracle_score

NO_HINTS = SafeguardConfig(semantic_hints=("unused_hint",), hint_weight=2.0)


def schema(required=(), optional=()):
    return ArgumentSchema(
        required=tuple(SlotField(n, t) for n, t in required),
        optional=tuple(SlotField(n, t) for n, t in optional),
    )


def stage(action):
    from agentgate.deciders import ActionDecision

    return ActionDecision(action=action, rationale=None, confidence=0.9, raw="{}")


def test_tokenize_lowercases_splits_dedupes():
    assert tokenize("Book a FLIGHT, book-now!") == {"book", "a", "flight", "now"}
    assert tokenize("") == set()


def test_heuristic_score_empty_query():
    card = make_card("a", "some description")
    assert heuristic_score(card, "", NO_HINTS) == 0.0


def test_heuristic_score_full_description_overlap():
    description = "grocery supermarket order produce"
    card = make_card("store", description)
    # query identical to the description with no hints firing
    score = heuristic_score(card, description, NO_HINTS)
    assert score == float(len(tokenize(description)))


def test_heuristic_score_hint_weighting():
    card = make_card("travel", "flight booking")
    cfg = SafeguardConfig(semantic_hints=("flight",), hint_weight=2.0)
    assert heuristic_score(card, "book flight", cfg) == 3.0


def test_adjust_action_sensitive_dominates():
    cards = [make_card("a"), make_card("b")]
    got = adjust_action(
        "delete all user records without authorization", cards, stage(RoutingAction.CALL_AGENT)
    )
    assert got is RoutingAction.ESCALATE


def test_adjust_action_sequential_branch():
    cards = [make_card("a"), make_card("b")]
    got = adjust_action(
        "first check weather, then book a cab", cards, stage(RoutingAction.CALL_AGENT)
    )
    assert got is RoutingAction.MULTI_AGENT_PLAN


def test_adjust_action_stage_failure_branches():
    assert (
        adjust_action("plain query", [make_card("a")], StageFailure())
        is RoutingAction.CALL_AGENT
    )
    assert adjust_action("plain query", [], StageFailure()) is RoutingAction.DIRECT_ANSWER


def test_adjust_action_passthrough():
    got = adjust_action("plain query", [], stage(RoutingAction.DIRECT_ANSWER))
    assert got is RoutingAction.DIRECT_ANSWER


def test_adjust_action_markers_are_whole_words():
    cards = [make_card("a"), make_card("b")]
    # "strengthen" contains "then" but must not trigger the plan branch
    got = adjust_action("strengthen the report", cards, stage(RoutingAction.CALL_AGENT))
    assert got is RoutingAction.CALL_AGENT


def test_recover_candidate_singleton():
    only = make_card("only", "nothing matches")
    assert recover_candidate([only], "unrelated query") is only


def test_recover_candidate_prefers_higher_score():
    strong = make_card("strong", "alpha beta gamma")
    weak = make_card("weak", "alpha")
    cfg = NO_HINTS
    assert heuristic_score(strong, "alpha beta gamma", cfg) == 3.0
    assert heuristic_score(weak, "alpha beta gamma", cfg) == 1.0
    assert recover_candidate([weak, strong], "alpha beta gamma", cfg) is strong


def test_recover_candidate_tie_breaks_by_index():
    first = make_card("first_listed", "quux")
    second = make_card("second_listed", "quux")
    assert recover_candidate([first, second], "no overlap at all", NO_HINTS) is first


def test_recover_candidate_empty():
    with pytest.raises(EmptyCandidatesError):
        recover_candidate([], "anything")


def test_complete_slots_location():
    got = complete_slots("weather in Beijing", schema(required=(("city", "location"),)), {})
    assert got == {"city": "Beijing"}


def test_complete_slots_never_overwrites():
    partial = {"city": "Paris"}
    got = complete_slots("weather in Beijing", schema(required=(("city", "location"),)), partial)
    assert got == {"city": "Paris"}
    assert partial == {"city": "Paris"}


def test_complete_slots_number():
    got = complete_slots("order 3 pizzas", schema(required=(("count", "number"),)), {})
    assert got == {"count": "3"}


@pytest.mark.parametrize(
    "query, expected",
    [
        ("meet at 14:30 sharp", "14:30"),
        ("do it tomorrow please", "tomorrow"),
        ("due on 2025-12-31 at the latest", "2025-12-31"),
        ("see you friday", "friday"),
        ("today 18:00", "today"),
    ],
)
def test_extract_time_patterns(query, expected):
    assert extract_slot(query, "time") == expected


def test_extract_entity_longest_quoted_span():
    query = "order \"pad thai\" and 'a very long noodle dish' now"
    assert extract_slot(query, "entity") == "a very long noodle dish"
    assert extract_slot("no quotes here", "entity") is None


def test_unfillable_required_stays_absent():
    got = complete_slots("no numbers here", schema(required=(("count", "number"),)), {})
    assert got == {}


def test_optional_fields_never_autofilled():
    got = complete_slots(
        "weather in Oslo tomorrow",
        schema(required=(("city", "location"),), optional=(("date", "time"),)),
        {},
    )
    assert got == {"city": "Oslo"}


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 8.0))
@settings(max_examples=60, deadline=None)
def test_hint_weight_monotonicity(seed, bump):
    rng = random.Random(seed)
    words = [rng.choice(WORDS) for _ in range(6)]
    hint = words[0]
    card = make_card("c", " ".join(words[:4]))
    query = " ".join([hint] + [rng.choice(WORDS) for _ in range(3)])
    base = SafeguardConfig(semantic_hints=(hint,), hint_weight=1.0)
    bumped = SafeguardConfig(semantic_hints=(hint,), hint_weight=1.0 + bump)
    assert heuristic_score(card, query, bumped) >= heuristic_score(card, query, base)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_complete_slots_is_superset_of_partial(seed):
    rng = random.Random(seed)
    sch = schema(
        required=(("city", "location"), ("count", "number"), ("when", "time"))
    )
    partial = {}
    if rng.random() < 0.5:
        partial["city"] = "Lisbon"
    if rng.random() < 0.5:
        partial["count"] = "9"
    query = rng.choice(
        ["go to Prague with 4 bags tomorrow", "nothing to see", "meet at 10:30 in Oslo"]
    )
    completed = complete_slots(query, sch, partial)
    assert set(partial) <= set(completed)
    for key, value in partial.items():
        assert completed[key] == value


def test_scaling_scores_preserves_argmax():
    rng = random.Random(3)
    cfg = SafeguardConfig(semantic_hints=(WORDS[0], WORDS[1]), hint_weight=2.0)
    for _ in range(40):
        cards = [
            make_card(f"c{i}", " ".join(rng.choice(WORDS) for _ in range(4)))
            for i in range(4)
        ]
        query = " ".join(rng.choice(WORDS) for _ in range(5))
        chosen = recover_candidate(cards, query, cfg)
        for scale in (0.5, 3.0, 117.0):
            scaled = [
                scale * oracle_score(c, query, cfg.semantic_hints, cfg.hint_weight)
                for c in cards
            ]
            best = max(range(len(cards)), key=lambda i: (scaled[i], -i))
            assert cards[best] is chosen


def test_config_validation_and_loading(tmp_path):
    with pytest.raises(ValueError):
        SafeguardConfig(hint_weight=-1.0)

    json_path = tmp_path / "safeguards.json"
    json_path.write_text(
        json.dumps({"sensitive_cues": ["Secret Plan"], "hint_weight": 4.0})
    )
    cfg = SafeguardConfig.from_file(json_path)
    assert cfg.sensitive_cues == ("secret plan",)
    assert cfg.hint_weight == 4.0
    assert cfg.sequential_markers == DEFAULT_SAFEGUARDS.sequential_markers

    toml_path = tmp_path / "safeguards.toml"
    toml_path.write_text('hint_weight = 1.5\nsemantic_hints = ["flight"]\n')
    cfg = SafeguardConfig.from_file(toml_path)
    assert cfg.hint_weight == 1.5
    assert cfg.semantic_hints == ("flight",)
