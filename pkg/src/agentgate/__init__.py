"""agentgate: candidate-aware structured routing for agent networks.

Maps a natural-language query plus a set of candidate agents to a
constrained routing decision (single-agent call, multi-agent plan, direct
answer, or escalation) through a two-stage decide-then-ground pipeline with
deterministic safeguards and confidence-gated edge-to-cloud fallback.
"""

from .deciders import (
    ActionDecision,
    BackendUnavailableError,
    ChatTransport,
    DeciderConfig,
    GroundingResult,
    PreconditionViolationError,
    decide_action,
    ground_structure,
    one_shot_route,
)
from .evaluation import (
    BenchInstance,
    GoldLabel,
    InstanceScore,
    MetricsReport,
    aggregate_metrics,
    evaluate_pipeline,
    load_benchmark,
    score_instance,
)
from .benchgen import GenSpec, generate_benchmark, write_benchmark
from .fallback import (
    SafeguardConfig,
    adjust_action,
    complete_slots,
    heuristic_score,
    recover_candidate,
)
from .model import (
    ParseFailure,
    Plan,
    PlanStep,
    RoutingAction,
    RoutingInput,
    RoutingOutput,
    StageFailure,
    exec_projection,
    parse_routing_output,
    serialize_routing_output,
)
from .pipeline import (
    PipelineConfig,
    RouteTrace,
    effective_confidence,
    route,
    select_backend,
)
from .registry import AgentCard, ArgumentSchema, Registry, SlotField
from .validation import ValidationReport, validate_output

__version__ = "0.1.0"

__all__ = [
    "ActionDecision",
    "AgentCard",
    "ArgumentSchema",
    "BackendUnavailableError",
    "BenchInstance",
    "ChatTransport",
    "DeciderConfig",
    "GenSpec",
    "GoldLabel",
    "GroundingResult",
    "InstanceScore",
    "MetricsReport",
    "ParseFailure",
    "Plan",
    "PlanStep",
    "PipelineConfig",
    "PreconditionViolationError",
    "Registry",
    "RouteTrace",
    "RoutingAction",
    "RoutingInput",
    "RoutingOutput",
    "SafeguardConfig",
    "SlotField",
    "StageFailure",
    "ValidationReport",
    "adjust_action",
    "aggregate_metrics",
    "complete_slots",
    "decide_action",
    "effective_confidence",
    "evaluate_pipeline",
    "exec_projection",
    "generate_benchmark",
    "ground_structure",
    "heuristic_score",
    "load_benchmark",
    "one_shot_route",
    "parse_routing_output",
    "recover_candidate",
    "route",
    "score_instance",
    "select_backend",
    "serialize_routing_output",
    "validate_output",
    "write_benchmark",
]
