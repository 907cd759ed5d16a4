"""Benchmark loading, per-instance scoring, and metric aggregation.

Seven metrics are reported: action accuracy over all instances, agent
accuracy and argument exact match over the gold-call subset, plan exact
match over the gold-plan subset, output validity over all instances, and
escalation precision and recall from the escalation confusion counts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence, Union

from .model import (
    MAX_PLAN_STEPS,
    MIN_PLAN_STEPS,
    ParseFailure,
    Plan,
    PlanStep,
    RoutingAction,
    RoutingInput,
    RoutingOutput,
    normalize_args,
)
from .registry import AgentCard
from .validation import action_consistent

SPLITS = ("train", "validation", "test")

INSTANCE_KEYS = {"id", "split", "query", "context", "candidates", "gold", "tags"}
REQUIRED_INSTANCE_KEYS = {"id", "split", "query", "candidates", "gold"}

METRIC_NAMES = (
    "action_accuracy",
    "agent_accuracy",
    "arg_em",
    "plan_em",
    "json_validity",
    "escalation_precision",
    "escalation_recall",
)


class MalformedLineError(ValueError):
    """A benchmark line failed to parse; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class InvalidGoldError(ValueError):
    """A gold label violates the action activation rules."""


class EmptyScoresError(ValueError):
    """Metric aggregation needs at least one instance score."""


@dataclass(frozen=True)
class GoldLabel:
    """Reference output for one benchmark instance."""

    action: RoutingAction
    target: str | None = None
    args: dict[str, str] | None = None
    plan: Plan | None = None

    def __post_init__(self) -> None:
        action = RoutingAction(self.action)
        object.__setattr__(self, "action", action)
        if self.args is not None:
            object.__setattr__(self, "args", normalize_args(self.args))
        if action is RoutingAction.CALL_AGENT:
            if not self.target or self.plan is not None:
                raise InvalidGoldError("gold CALL_AGENT requires a target and no plan")
        elif action is RoutingAction.MULTI_AGENT_PLAN:
            if self.plan is None or self.target is not None:
                raise InvalidGoldError("gold MULTI_AGENT_PLAN requires a plan and no target")
            if not MIN_PLAN_STEPS <= len(self.plan) <= MAX_PLAN_STEPS:
                raise InvalidGoldError(f"gold plan length {len(self.plan)} out of bounds")
        else:
            if self.target is not None or self.args is not None or self.plan is not None:
                raise InvalidGoldError(
                    f"gold {action.value} cannot carry target, args, or plan"
                )

    def to_dict(self) -> dict[str, Any]:
        plan = None
        if self.plan is not None:
            plan = [{"agent": s.agent_name, "args": dict(s.args)} for s in self.plan.steps]
        return {
            "action": self.action.value,
            "target": self.target,
            "args": dict(self.args) if self.args is not None else None,
            "plan": plan,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "GoldLabel":
        plan = None
        if data.get("plan") is not None:
            steps = tuple(
                PlanStep(agent_name=entry["agent"], args=entry.get("args") or {})
                for entry in data["plan"]
            )
            plan = Plan(steps=steps)
        try:
            action = RoutingAction(data["action"])
        except (ValueError, KeyError) as exc:
            raise InvalidGoldError(f"unknown gold action: {data.get('action')!r}") from exc
        return cls(
            action=action,
            target=data.get("target"),
            args=data.get("args"),
            plan=plan,
        )


@dataclass(frozen=True)
class BenchInstance:
    """One benchmark example: a routing input paired with its gold output."""

    id: str
    input: RoutingInput
    gold: GoldLabel
    split: str
    tags: tuple[str, ...] = ()

    def to_line_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "split": self.split,
            "query": self.input.query,
            "context": self.input.context,
            "candidates": [card.to_dict() for card in self.input.candidates],
            "gold": self.gold.to_dict(),
            "tags": list(self.tags),
        }

    def is_hard_negative(self) -> bool:
        return any(tag.startswith("hard_negative:") for tag in self.tags)


def _instance_from_dict(data: Mapping[str, Any]) -> BenchInstance:
    unknown = set(data) - INSTANCE_KEYS
    if unknown:
        raise ValueError(f"unknown instance keys: {sorted(unknown)}")
    missing = REQUIRED_INSTANCE_KEYS - set(data)
    if missing:
        raise ValueError(f"missing instance keys: {sorted(missing)}")
    if data["split"] not in SPLITS:
        raise ValueError(f"unknown split {data['split']!r}")
    candidates = tuple(AgentCard.from_dict(entry) for entry in data["candidates"])
    return BenchInstance(
        id=str(data["id"]),
        input=RoutingInput(
            query=data["query"],
            candidates=candidates,
            context=data.get("context"),
        ),
        gold=GoldLabel.from_dict(data["gold"]),
        split=data["split"],
        tags=tuple(data.get("tags") or ()),
    )


def load_benchmark(path: str | Path) -> list[BenchInstance]:
    """Read a JSONL benchmark file, skipping generator header records."""
    instances: list[BenchInstance] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLineError(line_number, f"invalid JSON: {exc}") from exc
            if not isinstance(data, dict):
                raise MalformedLineError(line_number, "line must be a JSON object")
            if "generator_version" in data:
                continue
            try:
                instances.append(_instance_from_dict(data))
            except InvalidGoldError as exc:
                raise InvalidGoldError(f"line {line_number}: {exc}") from exc
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedLineError(line_number, str(exc)) from exc
    return instances


@dataclass(frozen=True)
class InstanceScore:
    """Per-instance booleans; None marks a metric the instance is not part of."""

    action_correct: bool
    agent_correct: bool | None
    arg_correct: bool | None
    plan_correct: bool | None
    is_valid_json: bool
    gold_escalate: bool
    pred_escalate: bool


def _canonical_args(args: Mapping[str, str] | None) -> dict[str, str] | None:
    if args is None:
        return None
    return {key: value.strip() for key, value in args.items()}


def _plans_equal(pred: Plan | None, gold: Plan | None) -> bool:
    if pred is None or gold is None:
        return False
    if len(pred) != len(gold):
        return False
    for pred_step, gold_step in zip(pred.steps, gold.steps):
        if pred_step.agent_name != gold_step.agent_name:
            return False
        if _canonical_args(pred_step.args) != _canonical_args(gold_step.args):
            return False
    return True


def score_instance(
    pred: Union[RoutingOutput, ParseFailure], gold: GoldLabel
) -> InstanceScore:
    """Score one prediction against its gold label.

    Agent and argument correctness are only defined on gold-call instances,
    plan correctness only on gold-plan instances; argument equality is
    case-sensitive after trimming.
    """
    failed = isinstance(pred, ParseFailure)
    gold_call = gold.action is RoutingAction.CALL_AGENT
    gold_plan = gold.action is RoutingAction.MULTI_AGENT_PLAN

    action_correct = (not failed) and pred.action == gold.action

    agent_correct: bool | None = None
    arg_correct: bool | None = None
    if gold_call:
        agent_correct = (not failed) and pred.target == gold.target
        arg_correct = (not failed) and _canonical_args(pred.args) == _canonical_args(gold.args)

    plan_correct: bool | None = None
    if gold_plan:
        plan_correct = (not failed) and _plans_equal(pred.plan, gold.plan)

    return InstanceScore(
        action_correct=action_correct,
        agent_correct=agent_correct,
        arg_correct=arg_correct,
        plan_correct=plan_correct,
        is_valid_json=(not failed) and action_consistent(pred),
        gold_escalate=gold.action is RoutingAction.ESCALATE,
        pred_escalate=(not failed) and pred.action is RoutingAction.ESCALATE,
    )


@dataclass
class MetricsReport:
    """The seven aggregate metrics plus their numerator/denominator counts."""

    action_accuracy: float
    agent_accuracy: float
    arg_em: float
    plan_em: float
    json_validity: float
    escalation_precision: float
    escalation_recall: float
    counts: dict[str, tuple[int, int]] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "metrics": {name: getattr(self, name) for name in METRIC_NAMES},
            "counts": {
                name: {"numerator": num, "denominator": den}
                for name, (num, den) in self.counts.items()
            },
        }


def _ratio(numerator: int, denominator: int) -> float:
    if denominator == 0:
        return 0.0
    return numerator / denominator


def aggregate_metrics(scores: Sequence[InstanceScore]) -> MetricsReport:
    """Fold instance scores into the seven-metric report.

    Subset metrics with an empty subset report 0.0, matching the
    zero-denominator rule used for escalation precision and recall.
    """
    if not scores:
        raise EmptyScoresError("cannot aggregate an empty score list")

    total = len(scores)
    action_num = sum(1 for s in scores if s.action_correct)
    valid_num = sum(1 for s in scores if s.is_valid_json)

    agent_scores = [s.agent_correct for s in scores if s.agent_correct is not None]
    arg_scores = [s.arg_correct for s in scores if s.arg_correct is not None]
    plan_scores = [s.plan_correct for s in scores if s.plan_correct is not None]

    tp = sum(1 for s in scores if s.gold_escalate and s.pred_escalate)
    fp = sum(1 for s in scores if s.pred_escalate and not s.gold_escalate)
    fn = sum(1 for s in scores if s.gold_escalate and not s.pred_escalate)

    counts = {
        "action_accuracy": (action_num, total),
        "agent_accuracy": (sum(agent_scores), len(agent_scores)),
        "arg_em": (sum(arg_scores), len(arg_scores)),
        "plan_em": (sum(plan_scores), len(plan_scores)),
        "json_validity": (valid_num, total),
        "escalation_precision": (tp, tp + fp),
        "escalation_recall": (tp, tp + fn),
    }
    return MetricsReport(
        action_accuracy=_ratio(action_num, total),
        agent_accuracy=_ratio(sum(agent_scores), len(agent_scores)),
        arg_em=_ratio(sum(arg_scores), len(arg_scores)),
        plan_em=_ratio(sum(plan_scores), len(plan_scores)),
        json_validity=_ratio(valid_num, total),
        escalation_precision=_ratio(tp, tp + fp),
        escalation_recall=_ratio(tp, tp + fn),
        counts=counts,
    )


def evaluate_pipeline(
    instances: Iterable[BenchInstance], config
) -> tuple[MetricsReport, list[RoutingOutput]]:
    """Route every instance through a pipeline config and aggregate scores."""
    from .pipeline import route

    predictions: list[RoutingOutput] = []
    scores: list[InstanceScore] = []
    for instance in instances:
        output, _ = route(instance.input, config)
        predictions.append(output)
        scores.append(score_instance(output, instance.gold))
    return aggregate_metrics(scores), predictions
