"""Synchronization engines and their common driver."""

from .base import Engine, EngineConfigError, EngineOptions, RunResult
from .cmb import CmbEngine, CmbMsg, DeadlockError, cmb_safe_bound, null_timestamp
from .sequential import SequentialEngine
from .timestepped import TimeSteppedEngine, barrier_time, step_window
from .timewarp import RollbackError, TimeWarpEngine, compute_gvt

ENGINES: dict[str, type[Engine]] = {
    "sequential": SequentialEngine,
    "timestepped": TimeSteppedEngine,
    "cmb": CmbEngine,
    "timewarp": TimeWarpEngine,
}


def make_engine(name: str, model, **kw) -> Engine:
    try:
        cls = ENGINES[name]
    except KeyError:
        raise EngineConfigError(f"unknown engine {name!r}; choose from {sorted(ENGINES)}") from None
    return cls(model, **kw)


__all__ = [
    "ENGINES", "CmbEngine", "CmbMsg", "DeadlockError", "Engine", "EngineConfigError", "EngineOptions",
    "RollbackError", "RunResult", "SequentialEngine", "TimeSteppedEngine", "TimeWarpEngine", "barrier_time",
    "cmb_safe_bound", "compute_gvt", "make_engine", "null_timestamp", "step_window",
]
