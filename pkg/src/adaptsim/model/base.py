"""The Simulated Entity abstraction shared by every model family."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, ClassVar

from ..core import CausalityError, EntityTarget, Event, EventId, SimError
from .rng import CounterRNG


class StateDecodeError(SimError):
    pass


class ModelConfigError(SimError):
    pass


class ContractError(CausalityError):
    """A handler broke the model contract (e.g. emitted into its own past)."""


_STATE_TYPES: dict[str, type["EntityState"]] = {}


@dataclass(eq=False)
class EntityState:
    """Base record: identity, send counter and random stream.

    ``send_seq`` lives here (not in the runtime) so that snapshots, replicas
    and migrations all carry it along with the rest of the state.
    """

    eid: int
    rng: CounterRNG
    send_seq: int = 0

    type_name: ClassVar[str] = "base"

    def __init_subclass__(cls, **kw: Any) -> None:
        super().__init_subclass__(**kw)
        _STATE_TYPES[cls.type_name] = cls

    def emit(
        self,
        target: EntityTarget,
        now: int,
        recv_time: int,
        kind: int,
        payload: bytes = b"",
    ) -> Event:
        ev = Event(EventId(self.eid, self.send_seq), self.eid, target, now, recv_time, kind, payload)
        self.send_seq += 1
        return ev

    # subclasses extend these three
    def fields(self) -> dict[str, Any]:
        return {}

    @classmethod
    def from_fields(cls, eid: int, rng: CounterRNG, send_seq: int, f: dict[str, Any]) -> "EntityState":
        return cls(eid, rng, send_seq)

    def clone(self) -> "EntityState":
        return type(self).from_fields(self.eid, self.rng.copy(), self.send_seq, self.fields())

    def __eq__(self, other: object) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return serialize_state(self) == serialize_state(other)  # type: ignore[arg-type]


def serialize_state(state: EntityState) -> bytes:
    rec = {
        "t": state.type_name,
        "eid": state.eid,
        "seq": state.send_seq,
        "rng": [state.rng.key, state.rng.counter],
        "f": state.fields(),
    }
    return json.dumps(rec, sort_keys=True, separators=(",", ":")).encode()


def deserialize_state(data: bytes) -> EntityState:
    try:
        rec = json.loads(data.decode())
        cls = _STATE_TYPES[rec["t"]]
        key, counter = rec["rng"]
        return cls.from_fields(int(rec["eid"]), CounterRNG(int(key), int(counter)), int(rec["seq"]), rec["f"])
    except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise StateDecodeError(f"cannot decode entity state: {exc}") from exc


class Model:
    """A model family: builds the initial entities and handles their events.

    Handlers may mutate the state they are given and return it; engines that
    need the previous version (snapshots, replicas) copy it beforehand.
    """

    name: ClassVar[str] = ""
    lookahead: int = 1

    def build(self, seed: int) -> tuple[list[EntityState], list[Event]]:
        raise NotImplementedError

    def _handle(self, state: EntityState, e: Event, now: int) -> list[Event]:
        raise NotImplementedError

    @property
    def n_entities(self) -> int:
        raise NotImplementedError

    def handle_event(self, state: EntityState, e: Event, now: int) -> tuple[EntityState, list[Event]]:
        if e.is_anti:
            raise ContractError("anti events never reach entity handlers")
        out = self._handle(state, e, now)
        for o in out:
            if o.recv_time <= now:
                raise ContractError(f"entity {state.eid} emitted {o.id} at {o.recv_time} <= now {now}")
        return state, out
