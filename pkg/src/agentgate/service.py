"""HTTP service exposing the routing pipeline.

Endpoints: POST /route (the pipeline contract), GET /healthz, and
GET /registry. Requests are handled independently over an immutable
registry and pipeline config; one structured log line is emitted per route.
"""

from __future__ import annotations

import logging
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .model import RoutingInput
from .pipeline import PipelineConfig, route
from .registry import DEFAULT_RETRIEVAL_K, EmptyRegistryError, Registry

logger = logging.getLogger("agentgate")


@dataclass
class AppConfig:
    """Runtime configuration for the service process."""

    registry_path: str
    pipeline: PipelineConfig
    host: str = "127.0.0.1"
    port: int = 8080
    log_level: str = "info"
    retrieval_k: int = DEFAULT_RETRIEVAL_K


class RouteRequest(BaseModel):
    query: str = ""
    context: str | None = None
    candidates: list[str] | None = None


def create_app(
    registry: Registry,
    config: PipelineConfig,
    retrieval_k: int = DEFAULT_RETRIEVAL_K,
) -> FastAPI:
    app = FastAPI(title="agentgate")

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.get("/registry")
    def registry_listing() -> list:
        return registry.to_list()

    @app.post("/route")
    def route_endpoint(body: RouteRequest, trace: int = 0):
        if not body.query.strip():
            return JSONResponse(status_code=400, content={"error": "empty_query"})

        if body.candidates is None:
            try:
                cards = registry.retrieve(
                    body.query, k=retrieval_k, config=config.safeguards
                )
            except EmptyRegistryError:
                return JSONResponse(status_code=400, content={"error": "empty_registry"})
        else:
            cards = []
            for name in body.candidates:
                card = registry.lookup(name)
                if card is None:
                    return JSONResponse(
                        status_code=400, content={"error": "unknown_agent", "agent": name}
                    )
                cards.append(card)

        routing_input = RoutingInput(
            query=body.query, candidates=tuple(cards), context=body.context
        )
        output, route_trace = route(routing_input, config)

        request_id = uuid.uuid4().hex[:12]
        logger.info(
            "route id=%s backend=%s action=%s gamma_act=%s gamma_str=%s gamma_eff=%s",
            request_id,
            output.backend_used,
            output.action.value,
            output.confidence_action,
            output.confidence_structure,
            output.confidence_effective,
        )

        payload = output.to_dict()
        if trace:
            payload["trace"] = route_trace.to_dict()
        return payload

    return app


def serve(config: AppConfig) -> None:
    """Run the service until interrupted. Startup failures propagate."""
    import uvicorn

    registry = Registry.load(config.registry_path)
    app = create_app(registry, config.pipeline, retrieval_k=config.retrieval_k)
    uvicorn.run(app, host=config.host, port=config.port, log_level=config.log_level)
