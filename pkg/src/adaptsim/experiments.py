"""Canned scenarios behind the acceptance suite and the scripts/ drivers.

Each function runs one experiment and returns plain numbers; thresholds and
pass/fail decisions are left to the caller.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

from .gaia import Gaia, HeuristicParams
from .metrics import PricingScheme, RunReport, efficiency
from .model import make_model
from .runtime import CrashSpec, EnvProfile, Episode, initial_placement
from .sync import EngineOptions, RunResult, make_engine

ENGINES = ("timestepped", "cmb", "timewarp")

GOSSIP = {"n": 1000, "graph": {"kind": "scale_free", "m": 2}, "rumor_period": 20}
WIRELESS = {"n": 400, "cells": 8}
MATRIX_MODELS = {"gossip": (GOSSIP, 200), "wireless": (WIRELESS, 100)}

TWO_CLIQUES = {"n": 100, "graph": {"kind": "two_cliques"}, "rumor_period": 10, "origins": [0, 99]}
MUTUAL16 = {"n": 16, "topology": "uniform", "population": 1}


def run_case(
    engine: str,
    model: str,
    params: dict,
    end_time: int,
    n_lps: int = 1,
    seed: int = 0,
    *,
    gaia: HeuristicParams | None = None,
    gaia_mode: str = "heuristic",
    gaia_seed: int | None = None,
    round_ticks: int = 10,
    **engine_kw,
) -> RunResult:
    m = make_model(model, params)
    g = None
    if gaia is not None:
        g = Gaia(gaia, m.n_entities, n_lps, mode=gaia_mode, round_ticks=round_ticks,
                 seed=seed if gaia_seed is None else gaia_seed)
    return make_engine(engine, m, seed=seed, end_time=end_time, n_lps=n_lps, gaia=g, **engine_kw).run()


def sequential(model: str, params: dict, end_time: int, seed: int = 0) -> RunResult:
    return run_case("sequential", model, params, end_time, 1, seed)


# -- oracle matrix ---------------------------------------------------------------

@dataclass
class MatrixRow:
    model: str
    engine: str
    n_lps: int
    seed: int
    gaia: bool
    identical: bool
    seconds: float
    report: RunReport

    def line(self) -> str:
        c = self.report.counters
        return (
            f"{self.model:8s} {self.engine:11s} L={self.n_lps} seed={self.seed} gaia={int(self.gaia)} "
            f"{'identical' if self.identical else 'DIFFERENT'} {self.seconds:6.2f}s wct={self.report.wct:.3f} "
            f"nulls={c.null_messages} rollbacks={c.rollbacks} migrations={c.migrations}"
        )


def oracle_matrix(
    models: dict[str, tuple[dict, int]] = MATRIX_MODELS,
    engines=ENGINES,
    lps=(1, 2, 4, 8),
    seeds=(0, 1, 2),
    gaia=(False, True),
) -> Iterator[MatrixRow]:
    for name, (params, end) in models.items():
        for seed in seeds:
            ref = sequential(name, params, end, seed).trace_text()
            for engine in engines:
                for L in lps:
                    for on in gaia:
                        t0 = time.perf_counter()
                        r = run_case(engine, name, params, end, L, seed, gaia=HeuristicParams() if on else None)
                        dt = time.perf_counter() - t0
                        yield MatrixRow(name, engine, L, seed, on, r.ok and r.trace_text() == ref, dt, r.report)


# -- individual scenarios ------------------------------------------------------------

def heterogeneous_timewarp(seed: int, slowdown: float = 4.0) -> tuple[RunResult, bool]:
    """Time Warp on four LPs, the last one ``slowdown`` times slower."""
    prof = EnvProfile([1000.0, 1000.0, 1000.0, 1000.0 / slowdown])
    r = run_case("timewarp", "gossip", GOSSIP, 200, 4, seed, profile=prof)
    return r, r.trace_text() == sequential("gossip", GOSSIP, 200, seed).trace_text()


def remote_ratio(result: RunResult, since: int) -> float:
    """Share of committed entity-to-entity messages at ``recv_time >= since`` that crossed LPs."""
    msgs = [e for e in result.trace if e.recv_time >= since and e.id.sender != e.target]
    if not msgs:
        return 0.0
    return sum(e.key in result.remote_keys for e in msgs) / len(msgs)


def clustering(engine: str, seed: int, enabled: bool, end_time: int = 200) -> float:
    """Two cliques dealt round robin over two LPs, so every clique is split."""
    r = run_case(engine, "gossip", TWO_CLIQUES, end_time, 2, seed,
                 gaia=HeuristicParams() if enabled else None, placement="round_robin")
    return remote_ratio(r, end_time - end_time // 4)


def slow_lp_profile(n_lps: int = 4, factor: float = 2.0) -> EnvProfile:
    return EnvProfile([1000.0] * n_lps, background=[Episode(n_lps - 1, 0.0, 1e9, factor)])


def balancing(engine: str, seed: int, enabled: bool) -> float:
    """Emulated WCT with the last of four LPs under a 2x background load."""
    params = dict(GOSSIP)
    r = run_case(engine, "gossip", params, 200, 4, seed, gaia=HeuristicParams() if enabled else None,
                 profile=slow_lp_profile())
    return r.report.wct


def consolidation_rounds(engine: str, seed: int, shrink_load: float = 0.5, rounds: int = 20) -> int | None:
    """GAIA round after which all 16 mutually interacting entities share one LP (None: never)."""
    n_lps = 4
    end = 10 * rounds
    r = run_case(engine, "phold", MUTUAL16, end, n_lps, seed, gaia=HeuristicParams(shrink_load=shrink_load))
    homes = initial_placement(16, n_lps, "round_robin", seed)
    if len(set(homes)) == 1:
        return 0
    for rnd, se, _src, dst, _why in r.report.migration_log:
        homes[se] = dst
        if len(set(homes)) == 1:
            return rnd
    return None


def forced_migrations(engine: str, run_no: int, seed: int = 0) -> tuple[bool, int]:
    """A run with random migrations every round; (trace equals the static run, migrations)."""
    ref = run_case(engine, "gossip", GOSSIP, 200, 4, seed).trace_text()
    r = run_case(engine, "gossip", GOSSIP, 200, 4, seed, gaia=HeuristicParams(), gaia_mode="random",
                 gaia_seed=1000 + run_no)
    return r.trace_text() == ref, r.report.counters.migrations


@dataclass
class ReplicationOutcome:
    baseline: RunResult
    replicated: RunResult
    single: RunResult
    crash_at: float

    @property
    def overhead_ratio(self) -> float:
        """Channel messages with r=2 over the crash-free r=1 run."""
        return self.replicated.report.counters.channel_messages / self.baseline.report.counters.channel_messages


def replication(seed: int = 0, crash_lp: int = 1) -> ReplicationOutcome:
    base = run_case("timestepped", "gossip", GOSSIP, 200, 4, seed)
    at = base.report.wct / 2
    prof = EnvProfile([1000.0] * 4, crashes=[CrashSpec(crash_lp, at)])
    two = run_case("timestepped", "gossip", GOSSIP, 200, 4, seed, replicas=2, profile=prof)
    one = run_case("timestepped", "gossip", GOSSIP, 200, 4, seed, replicas=1, profile=prof)
    return ReplicationOutcome(base, two, one, at)


@dataclass
class CostPair:
    timestepped: RunReport
    cmb: RunReport
    pricing: PricingScheme

    @property
    def equal_busy(self) -> bool:
        return self.timestepped.lp_busy == self.cmb.lp_busy

    @property
    def delta(self) -> Fraction:
        return self.cmb.cost_breakdown().total - self.timestepped.cost_breakdown().total

    @property
    def null_cost(self) -> Fraction:
        return Fraction(self.cmb.counters.null_messages) * Fraction(self.pricing.price_per_remote_message)


def cost_pair(seed: int = 0, pricing: PricingScheme | None = None) -> CostPair:
    """CMB and time-stepped on the same run, billed with compute and message prices only.

    Rental is left at zero: the engines finish at different wall-clock times,
    so allocated seconds differ even when busy seconds do not.
    """
    pricing = pricing or PricingScheme(price_per_lp_second=0.5, price_per_remote_message=0.001)
    ts = run_case("timestepped", "gossip", GOSSIP, 200, 4, seed, pricing=pricing).report
    cmb = run_case("cmb", "gossip", GOSSIP, 200, 4, seed, pricing=pricing).report
    return CostPair(ts, cmb, pricing)


def cmb_cycle(end_time: int = 200) -> tuple[RunResult, bool]:
    """Two LPs exchanging one token around a ring, lookahead 1."""
    params = {"n": 2, "topology": "ring", "population": 1, "max_delay": 1}
    r = run_case("cmb", "phold", params, end_time, 2, 0, options=EngineOptions(lookahead=1))
    return r, r.trace_text() == sequential("phold", params, end_time).trace_text()


__all__ = [
    "ENGINES", "GOSSIP", "WIRELESS", "MATRIX_MODELS", "TWO_CLIQUES", "MUTUAL16",
    "run_case", "sequential", "MatrixRow", "oracle_matrix", "heterogeneous_timewarp", "remote_ratio",
    "clustering", "slow_lp_profile", "balancing", "consolidation_rounds", "forced_migrations",
    "ReplicationOutcome", "replication", "CostPair", "cost_pair", "cmb_cycle", "efficiency",
]
