from __future__ import annotations

from ..core import Event
from .base import (
    ContractError,
    EntityState,
    Model,
    ModelConfigError,
    StateDecodeError,
    deserialize_state,
    serialize_state,
)
from .gossip import GossipModel, GossipState
from .graphs import Graph, generate_graph
from .phold import PholdModel, PholdState
from .rng import CounterRNG
from .wireless import CellState, NodeState, WirelessModel

MODELS: dict[str, type[Model]] = {
    "gossip": GossipModel,
    "wireless": WirelessModel,
    "phold": PholdModel,
}


def make_model(name: str, params: dict | None = None) -> Model:
    try:
        cls = MODELS[name]
    except KeyError:
        raise ModelConfigError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    try:
        return cls(**(params or {}))
    except TypeError as exc:
        raise ModelConfigError(f"{name}: {exc}") from None


def build_model(name: str, params: dict | None, seed: int) -> tuple[list[EntityState], list[Event]]:
    return make_model(name, params).build(seed)


__all__ = [
    "CellState", "ContractError", "CounterRNG", "EntityState", "GossipModel", "GossipState", "Graph",
    "MODELS", "Model", "ModelConfigError", "NodeState", "PholdModel", "PholdState", "StateDecodeError",
    "WirelessModel", "build_model", "deserialize_state", "generate_graph", "make_model", "serialize_state",
]
