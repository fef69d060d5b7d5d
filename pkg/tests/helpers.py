"""Small shared helpers for the test suite."""

from __future__ import annotations

import json
from functools import lru_cache

from adaptsim.core import Event, EventId
from adaptsim.gaia import Gaia, HeuristicParams
from adaptsim.model import make_model
from adaptsim.sync import make_engine


def ev(recv: int, target: int = 0, sender: int = 0, seq: int = 0, *, send: int | None = None, kind: int = 1) -> Event:
    return Event(EventId(sender, seq), sender, target, recv - 1 if send is None else send, recv, kind)


def run(engine: str, model: str, params: dict, end: int, n_lps: int = 1, seed: int = 0, gaia: dict | None = None, **kw):
    m = make_model(model, params)
    g = None
    if gaia is not None:
        gaia = dict(gaia)
        mode = gaia.pop("mode", "heuristic")
        rt = gaia.pop("round_ticks", 10)
        g = Gaia(HeuristicParams(**gaia), m.n_entities, n_lps, seed=seed, mode=mode, round_ticks=rt)
    return make_engine(engine, m, seed=seed, end_time=end, n_lps=n_lps, gaia=g, **kw).run()


@lru_cache(maxsize=64)
def _oracle(model: str, params: str, end: int, seed: int) -> str:
    return run("sequential", model, json.loads(params), end, 1, seed).trace_text()


def oracle(model: str, params: dict, end: int, seed: int = 0) -> str:
    """The sequential trace, cached across tests."""
    return _oracle(model, json.dumps(params, sort_keys=True), end, seed)
