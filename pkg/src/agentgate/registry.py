"""Agent metadata registry with lightweight lexical retrieval.

Cards are immutable once registered; registration order defines the
canonical index used for every tie-break in the engine.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping

from .fallback import SafeguardConfig, heuristic_score

SLOT_TYPES = ("string", "number", "time", "location", "entity")

DEFAULT_RETRIEVAL_K = 5


class InvalidSchemaError(ValueError):
    """An agent card or argument schema violates its invariants."""


class DuplicateNameError(ValueError):
    """An agent with this name is already registered."""


class EmptyRegistryError(ValueError):
    """Retrieval was attempted over a registry with no agents."""


@dataclass(frozen=True)
class SlotField:
    """A named argument slot and its extraction type."""

    name: str
    type: str

    def __post_init__(self) -> None:
        if not self.name:
            raise InvalidSchemaError("slot field name must be non-empty")
        if self.type not in SLOT_TYPES:
            raise InvalidSchemaError(
                f"slot type {self.type!r} not in {SLOT_TYPES} (field {self.name!r})"
            )


@dataclass(frozen=True)
class ArgumentSchema:
    """Required and optional argument slots for invoking an agent."""

    required: tuple[SlotField, ...] = ()
    optional: tuple[SlotField, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "required", tuple(self.required))
        object.__setattr__(self, "optional", tuple(self.optional))
        names = [slot.name for slot in self.required + self.optional]
        if len(names) != len(set(names)):
            raise InvalidSchemaError(f"duplicate field names in schema: {names}")

    def all_fields(self) -> tuple[SlotField, ...]:
        return self.required + self.optional

    def field_names(self) -> tuple[str, ...]:
        return tuple(slot.name for slot in self.all_fields())

    def required_names(self) -> tuple[str, ...]:
        return tuple(slot.name for slot in self.required)

    def slot_type(self, name: str) -> str | None:
        for slot in self.all_fields():
            if slot.name == name:
                return slot.type
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "required": [{"name": s.name, "type": s.type} for s in self.required],
            "optional": [{"name": s.name, "type": s.type} for s in self.optional],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ArgumentSchema":
        def fields(entries: Iterable[Mapping[str, str]]) -> tuple[SlotField, ...]:
            return tuple(SlotField(name=e["name"], type=e["type"]) for e in entries)

        return cls(
            required=fields(data.get("required", ())),
            optional=fields(data.get("optional", ())),
        )


@dataclass(frozen=True)
class AgentCard:
    """A registered agent: unique name, capability text, argument schema."""

    name: str
    description: str
    schema: ArgumentSchema = field(default_factory=ArgumentSchema)

    def __post_init__(self) -> None:
        if not self.name or not self.name.strip():
            raise InvalidSchemaError("agent name must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "description": self.description,
            "schema": self.schema.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AgentCard":
        return cls(
            name=data["name"],
            description=data.get("description", ""),
            schema=ArgumentSchema.from_dict(data.get("schema", {})),
        )


class Registry:
    """Ordered collection of agent cards with name lookup and retrieval.

    Reads may run concurrently; registrations must be serialized externally
    with respect to reads.
    """

    def __init__(self, cards: Iterable[AgentCard] = ()) -> None:
        self._cards: list[AgentCard] = []
        self._by_name: dict[str, AgentCard] = {}
        for card in cards:
            self.register(card)

    def __len__(self) -> int:
        return len(self._cards)

    def __iter__(self) -> Iterator[AgentCard]:
        return iter(self._cards)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    @property
    def agents(self) -> tuple[AgentCard, ...]:
        return tuple(self._cards)

    def register(self, card: AgentCard) -> None:
        """Add a card; existing agents keep their canonical index."""
        if card.name in self._by_name:
            raise DuplicateNameError(f"agent {card.name!r} is already registered")
        self._cards.append(card)
        self._by_name[card.name] = card

    def lookup(self, name: str) -> AgentCard | None:
        return self._by_name.get(name)

    def index_of(self, name: str) -> int | None:
        """Canonical index (registration order) of an agent, or None."""
        for index, card in enumerate(self._cards):
            if card.name == name:
                return index
        return None

    def retrieve(
        self,
        query: str,
        k: int = DEFAULT_RETRIEVAL_K,
        config: SafeguardConfig | None = None,
    ) -> list[AgentCard]:
        """Candidate subset for a query: top-k by relevance score.

        Results are ordered by descending score with ties broken by lower
        canonical index, so the output is always a prefix of the full
        stable sort of the registry.
        """
        if not self._cards:
            raise EmptyRegistryError("cannot retrieve candidates from an empty registry")
        if k < 1:
            raise ValueError("k must be at least 1")
        scored = [
            (heuristic_score(card, query, config), index)
            for index, card in enumerate(self._cards)
        ]
        scored.sort(key=lambda pair: (-pair[0], pair[1]))
        return [self._cards[index] for _, index in scored[:k]]

    def to_list(self) -> list[dict[str, Any]]:
        return [card.to_dict() for card in self._cards]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_list(), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "Registry":
        """Load a registry from a JSON array of agent card records."""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, list):
            raise InvalidSchemaError("registry file must contain a JSON array")
        return cls(AgentCard.from_dict(entry) for entry in data)
