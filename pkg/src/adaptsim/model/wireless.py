"""Toy mobile wireless model on a torus of square cells.

Nodes do random-waypoint moves with integer coordinates. Every cell is itself
an entity that keeps the member list (and last known positions) of its cell:
nodes subscribe/unsubscribe as they cross cell borders and publish position
updates to their cell. A transmission goes to the sender's own cell and the
eight around it; each cell relays it as one multicast to the members that are
within radio range. No global range query is ever needed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Any

from ..core import Event, Group
from .base import EntityState, Model, ModelConfigError
from .rng import CounterRNG

MOVE = 1
POS = 2
SUB = 3
UNSUB = 4
TX = 5
RX = 6

_XY = struct.Struct(">ii")


@dataclass(eq=False)
class NodeState(EntityState):
    x: int = 0
    y: int = 0
    wx: int = 0
    wy: int = 0
    cell: int = 0
    heard: int = 0
    sent: int = 0

    type_name = "wireless_node"

    def fields(self) -> dict[str, Any]:
        return {"p": [self.x, self.y, self.wx, self.wy], "c": self.cell, "h": self.heard, "s": self.sent}

    @classmethod
    def from_fields(cls, eid, rng, send_seq, f):
        x, y, wx, wy = f["p"]
        return cls(eid, rng, send_seq, x, y, wx, wy, int(f["c"]), int(f["h"]), int(f["s"]))

    def clone(self) -> "NodeState":
        return NodeState(self.eid, self.rng.copy(), self.send_seq, self.x, self.y, self.wx, self.wy,
                         self.cell, self.heard, self.sent)


@dataclass(eq=False)
class CellState(EntityState):
    members: dict[int, tuple[int, int]] = field(default_factory=dict)
    relayed: int = 0

    type_name = "wireless_cell"

    def fields(self) -> dict[str, Any]:
        return {"m": [[k, v[0], v[1]] for k, v in sorted(self.members.items())], "r": self.relayed}

    @classmethod
    def from_fields(cls, eid, rng, send_seq, f):
        return cls(eid, rng, send_seq, {int(k): (int(x), int(y)) for k, x, y in f["m"]}, int(f["r"]))

    def clone(self) -> "CellState":
        return CellState(self.eid, self.rng.copy(), self.send_seq, dict(self.members), self.relayed)


class WirelessModel(Model):
    name = "wireless"
    lookahead = 1

    def __init__(
        self,
        n: int,
        cells: int = 8,
        cell_size: int = 10,
        move_period: int = 5,
        max_speed: int = 2,
        tx_prob: float = 0.1,
        radio_range: int | None = None,
    ) -> None:
        if n < 1:
            raise ModelConfigError(f"wireless needs n >= 1, got {n}")
        if cells < 1 or cell_size < 1:
            raise ModelConfigError("wireless: cells and cell_size must be >= 1")
        if move_period < 1 or max_speed < 1:
            raise ModelConfigError("wireless: move_period and max_speed must be >= 1")
        if not 0.0 <= tx_prob <= 1.0:
            raise ModelConfigError("wireless: tx_prob must be in [0, 1]")
        self.n = n
        self.cells = cells
        self.cell_size = cell_size
        self.side = cells * cell_size
        self.move_period = move_period
        self.max_speed = max_speed
        self.tx_prob = tx_prob
        self.radio_range = cell_size if radio_range is None else radio_range
        if self.radio_range > cell_size:
            raise ModelConfigError("wireless: radio_range cannot exceed cell_size")

    @property
    def n_entities(self) -> int:
        return self.n + self.cells * self.cells

    def cell_entity(self, x: int, y: int) -> int:
        cs = self.cell_size
        return self.n + (y // cs) * self.cells + (x // cs)

    def neighbourhood(self, cell_entity: int) -> list[int]:
        c = self.cells
        idx = cell_entity - self.n
        cx, cy = idx % c, idx // c
        out = {self.n + ((cy + dy) % c) * c + (cx + dx) % c for dy in (-1, 0, 1) for dx in (-1, 0, 1)}
        return sorted(out)

    def _delta(self, a: int, b: int) -> int:
        # shortest signed displacement from a to b on the torus
        d = (b - a) % self.side
        return d - self.side if d > self.side // 2 else d

    def dist2(self, ax: int, ay: int, bx: int, by: int) -> int:
        dx, dy = self._delta(ax, bx), self._delta(ay, by)
        return dx * dx + dy * dy

    def build(self, seed: int) -> tuple[list[EntityState], list[Event]]:
        states: list[EntityState] = []
        cells: dict[int, dict[int, tuple[int, int]]] = {
            self.n + i: {} for i in range(self.cells * self.cells)
        }
        for v in range(self.n):
            rng = CounterRNG.for_entity(seed, v)
            x, y = rng.randbelow(self.side), rng.randbelow(self.side)
            wx, wy = rng.randbelow(self.side), rng.randbelow(self.side)
            c = self.cell_entity(x, y)
            cells[c][v] = (x, y)
            states.append(NodeState(v, rng, 0, x, y, wx, wy, c))
        for c, members in cells.items():
            states.append(CellState(c, CounterRNG.for_entity(seed, c), 0, members))
        events = [states[v].emit(v, 0, 1, MOVE) for v in range(self.n)]
        return states, events

    def _step(self, a: int, b: int) -> int:
        d = self._delta(a, b)
        d = max(-self.max_speed, min(self.max_speed, d))
        return (a + d) % self.side

    def _handle(self, st: EntityState, e: Event, now: int) -> list[Event]:  # type: ignore[override]
        k = e.kind
        if k == MOVE:
            return self._move(st, now)  # type: ignore[arg-type]
        if k == RX:
            st.heard += 1  # type: ignore[attr-defined]
            return []
        if k in (POS, SUB):
            st.members[e.source] = _XY.unpack(e.payload)  # type: ignore[attr-defined]
            return []
        if k == UNSUB:
            st.members.pop(e.source, None)  # type: ignore[attr-defined]
            return []
        if k == TX:
            return self._relay(st, e, now)  # type: ignore[arg-type]
        raise ModelConfigError(f"wireless: unknown event kind {k}")

    def _move(self, st: NodeState, now: int) -> list[Event]:
        st.x, st.y = self._step(st.x, st.wx), self._step(st.y, st.wy)
        if (st.x, st.y) == (st.wx, st.wy):
            st.wx, st.wy = st.rng.randbelow(self.side), st.rng.randbelow(self.side)
        pos = _XY.pack(st.x, st.y)
        out: list[Event] = []
        cell = self.cell_entity(st.x, st.y)
        if cell != st.cell:
            out.append(st.emit(st.cell, now, now + 1, UNSUB))
            out.append(st.emit(cell, now, now + 1, SUB, pos))
            st.cell = cell
        else:
            out.append(st.emit(cell, now, now + 1, POS, pos))
        if st.rng.random() < self.tx_prob:
            st.sent += 1
            out.extend(st.emit(c, now, now + 1, TX, pos) for c in self.neighbourhood(cell))
        out.append(st.emit(st.eid, now, now + self.move_period, MOVE))
        return out

    def _relay(self, st: CellState, e: Event, now: int) -> list[Event]:
        x, y = _XY.unpack(e.payload)
        r2 = self.radio_range * self.radio_range
        rcv = tuple(
            m for m, (mx, my) in sorted(st.members.items())
            if m != e.source and self.dist2(x, y, mx, my) <= r2
        )
        if not rcv:
            return []
        st.relayed += 1
        return [st.emit(Group(st.eid, rcv), now, now + 1, RX, e.payload)]
