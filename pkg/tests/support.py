"""Shared test helpers: independent brute-force oracles and random builders.

The oracle functions deliberately reimplement scoring and metric logic from
scratch so the tests never validate the implementation against itself.
"""

from __future__ import annotations

import random
import re

from agentgate.evaluation import GoldLabel
from agentgate.model import (
    ParseFailure,
    Plan,
    PlanStep,
    RoutingAction,
    RoutingOutput,
)
from agentgate.registry import AgentCard, ArgumentSchema, SlotField

WORDS = (
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta",
    "iota", "kappa", "lam", "mu", "nu", "xi", "omicron", "pi", "rho",
    "sigma", "tau", "upsilon", "phi", "chi", "psi", "omega", "red", "blue",
    "green", "fast", "slow", "big", "small", "lookup", "engine", "widget",
)

AGENT_POOL = ("agent_a", "agent_b", "agent_c", "agent_d", "agent_e")


def make_card(name, description="", required=(), optional=()):
    return AgentCard(
        name=name,
        description=description,
        schema=ArgumentSchema(
            required=tuple(SlotField(name=n, type=t) for n, t in required),
            optional=tuple(SlotField(name=n, type=t) for n, t in optional),
        ),
    )


# --- lexical scoring oracle (term-by-term evaluation of the score formula) ---

def oracle_tokens(text):
    return set(re.findall(r"[a-z0-9]+", text.lower()))


def oracle_card_tokens(card):
    tokens = oracle_tokens(card.name) | oracle_tokens(card.description)
    for slot in card.schema.required + card.schema.optional:
        tokens |= oracle_tokens(slot.name)
    return tokens


def oracle_score(card, query, hints, lam):
    metadata = oracle_card_tokens(card)
    query_tokens = oracle_tokens(query)
    overlap = sum(1 for w in query_tokens if w in metadata)
    hint_hits = sum(1 for h in hints if h in metadata and h in query_tokens)
    return overlap + lam * hint_hits


def oracle_argmax(cards, query, hints, lam):
    best_index = 0
    best = oracle_score(cards[0], query, hints, lam)
    for index in range(1, len(cards)):
        score = oracle_score(cards[index], query, hints, lam)
        if score > best:
            best, best_index = score, index
    return cards[best_index]


# --- random structured outputs -----------------------------------------------

def rand_confidence(rng: random.Random) -> float:
    return rng.randint(0, 10**6) / 10**6


def rand_args(rng: random.Random) -> dict:
    return {
        rng.choice(WORDS) + str(i): rng.choice(WORDS)
        for i in range(rng.randint(0, 3))
    }


def rand_plan(rng: random.Random, pool=AGENT_POOL) -> Plan:
    steps = tuple(
        PlanStep(agent_name=rng.choice(pool), args=rand_args(rng))
        for _ in range(rng.randint(2, 8))
    )
    return Plan(steps=steps)


def random_valid_output(rng: random.Random, pool=AGENT_POOL) -> RoutingOutput:
    action = rng.choice(list(RoutingAction))
    target = None
    args = None
    plan = None
    conf_str = None
    if action is RoutingAction.CALL_AGENT:
        target = rng.choice(pool)
        args = rand_args(rng)
        conf_str = rand_confidence(rng) if rng.random() < 0.8 else None
    elif action is RoutingAction.MULTI_AGENT_PLAN:
        plan = rand_plan(rng, pool)
        conf_str = rand_confidence(rng) if rng.random() < 0.8 else None
    return RoutingOutput(
        action=action,
        confidence_action=rand_confidence(rng),
        target=target,
        args=args,
        plan=plan,
        rationale=rng.choice([None, "because", "matched keywords"]),
        confidence_structure=conf_str,
        backend_used=rng.choice(["edge", "cloud"]),
    )


def random_gold(rng: random.Random, pool=AGENT_POOL) -> GoldLabel:
    action = rng.choice(list(RoutingAction))
    if action is RoutingAction.CALL_AGENT:
        return GoldLabel(action=action, target=rng.choice(pool), args=rand_args(rng))
    if action is RoutingAction.MULTI_AGENT_PLAN:
        return GoldLabel(action=action, plan=rand_plan(rng, pool))
    return GoldLabel(action=action)


def random_pred(rng: random.Random, pool=AGENT_POOL):
    if rng.random() < 0.1:
        return ParseFailure(raw="{{{", reason="synthetic")
    return random_valid_output(rng, pool)


# --- metric aggregation oracle ------------------------------------------------

def _oracle_trim(args):
    if args is None:
        return None
    return {k: v.strip() for k, v in args.items()}


def _oracle_action_consistent(output: RoutingOutput) -> bool:
    if output.action is RoutingAction.CALL_AGENT:
        ok = output.target is not None and output.plan is None
    elif output.action is RoutingAction.MULTI_AGENT_PLAN:
        ok = output.plan is not None and output.target is None and 2 <= len(output.plan) <= 8
    else:
        ok = output.target is None and output.args is None and output.plan is None
    if output.confidence_structure is None:
        expected = output.confidence_action
    else:
        expected = min(output.confidence_action, output.confidence_structure)
    return ok and output.confidence_effective == expected


def oracle_metric_values(pairs) -> dict:
    """Recompute all seven metrics directly from (pred, gold) pairs."""
    total = len(pairs)
    action = valid = 0
    agent_num = agent_den = arg_num = arg_den = plan_num = plan_den = 0
    tp = fp = fn = 0
    for pred, gold in pairs:
        ok = not isinstance(pred, ParseFailure)
        if ok and pred.action == gold.action:
            action += 1
        if ok and _oracle_action_consistent(pred):
            valid += 1
        if gold.action is RoutingAction.CALL_AGENT:
            agent_den += 1
            arg_den += 1
            if ok and pred.target == gold.target:
                agent_num += 1
            if ok and _oracle_trim(pred.args) == _oracle_trim(gold.args):
                arg_num += 1
        if gold.action is RoutingAction.MULTI_AGENT_PLAN:
            plan_den += 1
            if ok and pred.plan is not None and gold.plan is not None:
                same = len(pred.plan) == len(gold.plan)
                if same:
                    for ps, gs in zip(pred.plan.steps, gold.plan.steps):
                        if ps.agent_name != gs.agent_name:
                            same = False
                        elif _oracle_trim(ps.args) != _oracle_trim(gs.args):
                            same = False
                if same:
                    plan_num += 1
        gold_esc = gold.action is RoutingAction.ESCALATE
        pred_esc = ok and pred.action is RoutingAction.ESCALATE
        if gold_esc and pred_esc:
            tp += 1
        if pred_esc and not gold_esc:
            fp += 1
        if gold_esc and not pred_esc:
            fn += 1

    def div(n, d):
        return n / d if d else 0.0

    return {
        "action_accuracy": div(action, total),
        "agent_accuracy": div(agent_num, agent_den),
        "arg_em": div(arg_num, arg_den),
        "plan_em": div(plan_num, plan_den),
        "json_validity": div(valid, total),
        "escalation_precision": div(tp, tp + fp),
        "escalation_recall": div(tp, tp + fn),
    }
