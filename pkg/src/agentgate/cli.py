"""Command-line interface: route, eval, gen, and serve subcommands.

Values resolve in order: command-line flag, config file entry, built-in
default. The config file is JSON with the same key names as the flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

from .benchgen import (
    DEFAULT_COUNTS,
    DEFAULT_HARD_FRACTION,
    GenSpec,
    InvalidSpecError,
    write_benchmark,
)
from .deciders import REMOTE, RETRIEVE_RANK, RULE_BASED, DeciderConfig
from .evaluation import (
    InvalidGoldError,
    MalformedLineError,
    SPLITS,
    evaluate_pipeline,
    load_benchmark,
)
from .fallback import SafeguardConfig
from .model import RoutingInput, serialize_routing_output
from .pipeline import DEFAULT_TAU, PipelineConfig, route
from .registry import DEFAULT_RETRIEVAL_K, Registry
from .service import AppConfig, serve

BACKEND_ALIASES = {"rule": RULE_BASED, "rank": RETRIEVE_RANK, "remote": REMOTE}

logger = logging.getLogger("agentgate")


def _load_config_file(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _setting(args: argparse.Namespace, file_config: dict, key: str, default):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in file_config:
        return file_config[key]
    return default


def _build_safeguards(args: argparse.Namespace, file_config: dict) -> SafeguardConfig:
    data = dict(file_config.get("safeguards", {}))
    if getattr(args, "safeguards_file", None):
        data = json.loads(Path(args.safeguards_file).read_text(encoding="utf-8"))
    if getattr(args, "hint_weight", None) is not None:
        data["hint_weight"] = args.hint_weight
    return SafeguardConfig.from_dict(data)


def _build_decider(
    kind_alias: str,
    safeguards: SafeguardConfig,
    endpoint: str | None,
    model: str | None,
    timeout: float,
) -> DeciderConfig:
    return DeciderConfig(
        kind=BACKEND_ALIASES[kind_alias],
        endpoint=endpoint,
        model=model,
        timeout=timeout,
        safeguards=safeguards,
    )


def _build_pipeline(args: argparse.Namespace, file_config: dict) -> PipelineConfig:
    safeguards = _build_safeguards(args, file_config)
    timeout = float(_setting(args, file_config, "timeout", 30.0))
    edge = _build_decider(
        _setting(args, file_config, "backend", "rule"),
        safeguards,
        _setting(args, file_config, "endpoint", None),
        _setting(args, file_config, "model", None),
        timeout,
    )
    cloud = None
    cloud_kind = _setting(args, file_config, "cloud", None)
    if cloud_kind:
        cloud = _build_decider(
            cloud_kind,
            safeguards,
            _setting(args, file_config, "cloud_endpoint", None),
            _setting(args, file_config, "cloud_model", None),
            timeout,
        )
    tau = float(_setting(args, file_config, "tau", DEFAULT_TAU))
    return PipelineConfig(edge=edge, cloud=cloud, tau=tau, safeguards=safeguards)


def _cmd_route(args: argparse.Namespace) -> int:
    file_config = _load_config_file(args.config)
    registry_path = _setting(args, file_config, "registry", None)
    if not registry_path:
        print("route requires --registry", file=sys.stderr)
        return 1
    registry = Registry.load(registry_path)
    config = _build_pipeline(args, file_config)
    k = int(_setting(args, file_config, "k", DEFAULT_RETRIEVAL_K))

    candidates = registry.retrieve(args.query, k=k, config=config.safeguards)
    routing_input = RoutingInput(
        query=args.query, candidates=tuple(candidates), context=args.context
    )
    output, trace = route(routing_input, config)
    if args.trace:
        payload = output.to_dict()
        payload["trace"] = trace.to_dict()
        print(json.dumps(payload, ensure_ascii=False, separators=(",", ":")))
    else:
        print(serialize_routing_output(output))
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    file_config = _load_config_file(args.config)
    try:
        instances = load_benchmark(args.bench)
    except (OSError, MalformedLineError, InvalidGoldError) as exc:
        print(f"failed to load benchmark: {exc}", file=sys.stderr)
        return 2
    if args.split != "all":
        instances = [inst for inst in instances if inst.split == args.split]
    if not instances:
        print(f"no instances in split {args.split!r}", file=sys.stderr)
        return 2

    config = _build_pipeline(args, file_config)
    report, _ = evaluate_pipeline(instances, config)
    payload = {"split": args.split, "instances": len(instances)}
    payload.update(report.to_dict())
    Path(args.out).write_text(
        json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    summary = " ".join(
        f"{name}={value:.4f}" for name, value in payload["metrics"].items()
    )
    print(f"evaluated {len(instances)} instances: {summary}")
    return 0


def _cmd_gen(args: argparse.Namespace) -> int:
    try:
        counts = tuple(int(part) for part in args.counts.split(","))
        spec = GenSpec(
            seed=args.seed,
            counts=counts,  # type: ignore[arg-type]
            hard_negative_fraction=args.hard_frac,
        )
        written = write_benchmark(spec, args.out)
    except InvalidSpecError as exc:
        print(f"invalid generation spec: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {written} instances to {args.out}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    file_config = _load_config_file(args.config)
    registry_path = _setting(args, file_config, "registry", None)
    if not registry_path:
        print("serve requires --registry", file=sys.stderr)
        return 1
    config = AppConfig(
        registry_path=registry_path,
        pipeline=_build_pipeline(args, file_config),
        host=_setting(args, file_config, "host", "127.0.0.1"),
        port=int(_setting(args, file_config, "port", 8080)),
        log_level=_setting(args, file_config, "log_level", "info"),
        retrieval_k=int(_setting(args, file_config, "k", DEFAULT_RETRIEVAL_K)),
    )
    try:
        serve(config)
    except Exception as exc:
        print(f"service failed to start: {exc}", file=sys.stderr)
        return 1
    return 0


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=sorted(BACKEND_ALIASES), default=None)
    parser.add_argument("--cloud", choices=sorted(BACKEND_ALIASES), default=None)
    parser.add_argument("--tau", type=float, default=None)
    parser.add_argument("--endpoint", default=None)
    parser.add_argument("--model", default=None)
    parser.add_argument("--cloud-endpoint", dest="cloud_endpoint", default=None)
    parser.add_argument("--cloud-model", dest="cloud_model", default=None)
    parser.add_argument("--timeout", type=float, default=None)
    parser.add_argument("--lambda", dest="hint_weight", type=float, default=None)
    parser.add_argument("--safeguards-file", dest="safeguards_file", default=None)
    parser.add_argument("--config", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agentgate")
    sub = parser.add_subparsers(dest="command", required=True)

    p_route = sub.add_parser("route", help="route one query")
    p_route.add_argument("--query", required=True)
    p_route.add_argument("--registry", default=None)
    p_route.add_argument("--context", default=None)
    p_route.add_argument("--k", type=int, default=None)
    p_route.add_argument("--trace", action="store_true")
    _add_backend_flags(p_route)
    p_route.set_defaults(func=_cmd_route)

    p_eval = sub.add_parser("eval", help="score a benchmark file")
    p_eval.add_argument("--bench", required=True)
    p_eval.add_argument("--split", choices=SPLITS + ("all",), default="all")
    p_eval.add_argument("--out", default="report.json")
    _add_backend_flags(p_eval)
    p_eval.set_defaults(func=_cmd_eval)

    p_gen = sub.add_parser("gen", help="generate a benchmark file")
    p_gen.add_argument("--seed", type=int, default=42)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument(
        "--counts", default=",".join(str(c) for c in DEFAULT_COUNTS)
    )
    p_gen.add_argument("--hard-frac", dest="hard_frac", type=float, default=DEFAULT_HARD_FRACTION)
    p_gen.set_defaults(func=_cmd_gen)

    p_serve = sub.add_parser("serve", help="run the routing service")
    p_serve.add_argument("--registry", default=None)
    p_serve.add_argument("--host", default=None)
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument("--log-level", dest="log_level", default=None)
    p_serve.add_argument("--k", type=int, default=None)
    _add_backend_flags(p_serve)
    p_serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
