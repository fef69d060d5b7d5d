"""Run configuration: a TOML document with one table per concern.

    [run]          engine, end_time, seed, n_lps, placement, explicit_placement
    [model]        name plus the model's own parameters; [model.graph] for gossip
    [engine]       step, lookahead, null_policy, snapshot_every, gvt_period, window_ticks, bytes_per_event
    [gaia]         enabled, mode, round_ticks plus any HeuristicParams field
    [replication]  replicas, re_replication
    [env]          speeds | speed, latency, jitter, crashes, background
    [pricing]      price_per_lp_second, price_per_remote_message, price_per_lp_instance_second
    [output]       trace, report, windows (paths; empty means "don't write")

Only ``run.engine``, ``run.end_time`` and ``model.name`` are required.
Overrides use dotted keys (``gaia.enabled=true``, ``model.graph.kind=random``)
and TOML literals for values; anything that doesn't parse as one is a string.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .gaia import Gaia, HeuristicParams
from .metrics import PricingScheme
from .model import MODELS, Model, ModelConfigError, make_model
from .runtime import CrashSpec, EnvProfile, Episode
from .sync import ENGINES, EngineOptions

PLACEMENTS = ("round_robin", "block", "random")


class ConfigError(ValueError):
    """A bad configuration; ``key`` is the dotted name at fault."""

    def __init__(self, key: str, msg: str) -> None:
        super().__init__(f"{key}: {msg}")
        self.key = key


@dataclass
class RunSection:
    engine: str = ""
    end_time: int = -1
    seed: int = 0
    n_lps: int = 1
    placement: str = "round_robin"
    explicit_placement: list[int] | None = None


@dataclass
class ModelSection:
    name: str = ""
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class EngineSection:
    step: int = 1
    lookahead: int | None = None
    null_policy: str = "on_block"
    snapshot_every: int = 16
    gvt_period: float = 0.02
    window_ticks: int = 10
    bytes_per_event: int = 1024


@dataclass
class GaiaSection:
    enabled: bool = False
    mode: str = "heuristic"
    round_ticks: int = 10
    params: HeuristicParams = field(default_factory=HeuristicParams)


@dataclass
class ReplicationSection:
    replicas: int = 1
    re_replication: bool = False


@dataclass
class EnvSection:
    speeds: list[float] | None = None  # None: ``speed`` on every LP
    speed: float = 1000.0
    latency: float = 0.002
    jitter: float = 0.0
    crashes: list[CrashSpec] = field(default_factory=list)
    background: list[Episode] = field(default_factory=list)


@dataclass
class OutputSection:
    trace: str = ""
    report: str = ""
    windows: str = ""


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    model: ModelSection = field(default_factory=ModelSection)
    engine: EngineSection = field(default_factory=EngineSection)
    gaia: GaiaSection = field(default_factory=GaiaSection)
    replication: ReplicationSection = field(default_factory=ReplicationSection)
    env: EnvSection = field(default_factory=EnvSection)
    pricing: PricingScheme = field(default_factory=PricingScheme)
    output: OutputSection = field(default_factory=OutputSection)

    @property
    def n_entities(self) -> int:
        return self.build_model().n_entities

    # -- builders -----------------------------------------------------------
    def build_model(self) -> Model:
        return make_model(self.model.name, self.model.params)

    def build_profile(self) -> EnvProfile:
        e = self.env
        speeds = list(e.speeds) if e.speeds is not None else [e.speed] * self.run.n_lps
        return EnvProfile(speeds, e.latency, e.jitter, crashes=list(e.crashes), background=list(e.background))

    def build_gaia(self, n_entities: int) -> Gaia | None:
        g = self.gaia
        if not g.enabled:
            return None
        return Gaia(g.params, n_entities, self.run.n_lps, mode=g.mode, seed=self.run.seed, round_ticks=g.round_ticks)

    def engine_options(self) -> EngineOptions:
        s = self.engine
        return EngineOptions(
            step=s.step, lookahead=s.lookahead, null_policy=s.null_policy, snapshot_every=s.snapshot_every,
            gvt_period=s.gvt_period, window_ticks=s.window_ticks, bytes_per_event=s.bytes_per_event,
        )

    def oracle_twin(self) -> "RunConfig":
        """The sequential configuration that must produce the same trace."""
        twin = dataclasses.replace(
            self,
            run=dataclasses.replace(self.run, engine="sequential", n_lps=1, placement="round_robin",
                                    explicit_placement=None),
            engine=dataclasses.replace(self.engine, lookahead=None),
            gaia=dataclasses.replace(self.gaia, enabled=False),
            replication=ReplicationSection(),
            env=EnvSection(speed=self.env.speeds[0] if self.env.speeds else self.env.speed),
            output=OutputSection(),
        )
        return twin


# -- parsing -------------------------------------------------------------------
_SECTIONS = ("run", "model", "engine", "gaia", "replication", "env", "pricing", "output")


def _take(table: dict, key: str, prefix: str, kind: type | tuple, default: Any) -> Any:
    if key not in table:
        return default
    v = table.pop(key)
    name = f"{prefix}.{key}"
    kinds = kind if isinstance(kind, tuple) else (kind,)
    if float in kinds and isinstance(v, int) and not isinstance(v, bool):
        v = float(v)
    if isinstance(v, bool) and bool not in kinds:
        raise ConfigError(name, f"expected {kinds[0].__name__}, got a boolean")
    if not isinstance(v, kinds):
        raise ConfigError(name, f"expected {kinds[0].__name__}, got {type(v).__name__} {v!r}")
    return v


def _no_leftovers(table: dict, prefix: str) -> None:
    if table:
        k = sorted(table)[0]
        raise ConfigError(f"{prefix}.{k}" if prefix else k, "unknown key")


def _section(doc: dict, name: str) -> dict:
    t = doc.pop(name, {})
    if not isinstance(t, dict):
        raise ConfigError(name, "must be a table")
    return dict(t)


def _int_list(v: Any, key: str) -> list[int]:
    if not isinstance(v, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise ConfigError(key, "expected a list of integers")
    return list(v)


def _parse_run(t: dict) -> RunSection:
    p = "run"
    r = RunSection(
        engine=_take(t, "engine", p, str, ""),
        end_time=_take(t, "end_time", p, int, -1),
        seed=_take(t, "seed", p, int, 0),
        n_lps=_take(t, "n_lps", p, int, 1),
        placement=_take(t, "placement", p, str, "round_robin"),
    )
    if "explicit_placement" in t:
        r.explicit_placement = _int_list(t.pop("explicit_placement"), "run.explicit_placement")
    _no_leftovers(t, p)
    if not r.engine:
        raise ConfigError("run.engine", "missing required key")
    if r.engine not in ENGINES:
        raise ConfigError("run.engine", f"unknown engine {r.engine!r}; choose from {sorted(ENGINES)}")
    if r.end_time < 0:
        raise ConfigError("run.end_time", "missing required key" if r.end_time == -1 else "must be >= 0")
    if r.n_lps < 1:
        raise ConfigError("run.n_lps", "must be >= 1")
    if r.placement not in PLACEMENTS + ("explicit",):
        raise ConfigError("run.placement", f"unknown placement {r.placement!r}; choose from {list(PLACEMENTS)}")
    if r.explicit_placement is not None:
        r.placement = "explicit"
    elif r.placement == "explicit":
        raise ConfigError("run.explicit_placement", "placement = 'explicit' needs a list")
    return r


def _parse_model(t: dict) -> ModelSection:
    name = _take(t, "name", "model", str, "")
    if not name:
        raise ConfigError("model.name", "missing required key")
    if name not in MODELS:
        raise ConfigError("model.name", f"unknown model {name!r}; choose from {sorted(MODELS)}")
    return ModelSection(name, t)  # the rest is checked by the model constructor


def _parse_engine(t: dict) -> EngineSection:
    p = "engine"
    e = EngineSection(
        step=_take(t, "step", p, int, 1),
        lookahead=_take(t, "lookahead", p, int, None),
        null_policy=_take(t, "null_policy", p, str, "on_block"),
        snapshot_every=_take(t, "snapshot_every", p, int, 16),
        gvt_period=_take(t, "gvt_period", p, float, 0.02),
        window_ticks=_take(t, "window_ticks", p, int, 10),
        bytes_per_event=_take(t, "bytes_per_event", p, int, 1024),
    )
    _no_leftovers(t, p)
    for k in ("step", "snapshot_every", "window_ticks", "bytes_per_event"):
        if getattr(e, k) < 1:
            raise ConfigError(f"engine.{k}", "must be >= 1")
    if e.lookahead is not None and e.lookahead < 1:
        raise ConfigError("engine.lookahead", "must be >= 1")
    if e.null_policy != "on_block":
        raise ConfigError("engine.null_policy", f"{e.null_policy!r} is not implemented; only 'on_block' is")
    if e.gvt_period <= 0:
        raise ConfigError("engine.gvt_period", "must be > 0")
    return e


def _parse_gaia(t: dict) -> GaiaSection:
    p = "gaia"
    g = GaiaSection(
        enabled=_take(t, "enabled", p, bool, False),
        mode=_take(t, "mode", p, str, "heuristic"),
        round_ticks=_take(t, "round_ticks", p, int, 10),
    )
    if g.mode not in ("heuristic", "random"):
        raise ConfigError("gaia.mode", f"unknown mode {g.mode!r}; choose from ['heuristic', 'random']")
    if g.round_ticks < 1:
        raise ConfigError("gaia.round_ticks", "must be >= 1")
    kw: dict[str, Any] = {}
    for f in dataclasses.fields(HeuristicParams):
        if f.name in t:
            v = t.pop(f.name)
            if isinstance(v, bool) != (f.type in ("bool", bool)):
                raise ConfigError(f"gaia.{f.name}", f"bad value {v!r}")
            kw[f.name] = v
    _no_leftovers(t, p)
    try:
        g.params = HeuristicParams(**kw)
    except ValueError as exc:
        bad = next((k for k in kw if k in str(exc)), next(iter(kw), "params"))
        raise ConfigError(f"gaia.{bad}", str(exc)) from None
    return g


def _parse_replication(t: dict) -> ReplicationSection:
    p = "replication"
    r = ReplicationSection(
        replicas=_take(t, "replicas", p, int, 1),
        re_replication=_take(t, "re_replication", p, bool, False),
    )
    _no_leftovers(t, p)
    if r.replicas < 1:
        raise ConfigError("replication.replicas", "must be >= 1")
    return r


def _records(v: Any, key: str, fields: tuple[str, ...]) -> list[dict]:
    if not isinstance(v, list):
        raise ConfigError(key, "expected an array of tables")
    out = []
    for i, item in enumerate(v):
        if not isinstance(item, dict):
            raise ConfigError(f"{key}[{i}]", "expected a table")
        missing = [f for f in fields if f not in item]
        if missing:
            raise ConfigError(f"{key}[{i}].{missing[0]}", "missing required key")
        extra = sorted(set(item) - set(fields))
        if extra:
            raise ConfigError(f"{key}[{i}].{extra[0]}", "unknown key")
        out.append(item)
    return out


def _parse_env(t: dict) -> EnvSection:
    p = "env"
    e = EnvSection(
        speed=_take(t, "speed", p, float, 1000.0),
        latency=_take(t, "latency", p, float, 0.002),
        jitter=_take(t, "jitter", p, float, 0.0),
    )
    if "speeds" in t:
        v = t.pop("speeds")
        if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
            raise ConfigError("env.speeds", "expected a list of numbers")
        e.speeds = [float(x) for x in v]
    if "crashes" in t:
        e.crashes = [CrashSpec(int(c["lp"]), float(c["at"])) for c in _records(t.pop("crashes"), "env.crashes", ("lp", "at"))]
    if "background" in t:
        e.background = [
            Episode(int(b["lp"]), float(b["start"]), float(b["end"]), float(b["factor"]))
            for b in _records(t.pop("background"), "env.background", ("lp", "start", "end", "factor"))
        ]
    _no_leftovers(t, p)
    if e.speed <= 0 or (e.speeds is not None and any(s <= 0 for s in e.speeds)):
        raise ConfigError("env.speeds" if e.speeds is not None else "env.speed", "speeds must be > 0")
    if e.latency < 0:
        raise ConfigError("env.latency", "must be >= 0")
    if e.jitter < 0:
        raise ConfigError("env.jitter", "must be >= 0")
    return e


def _parse_pricing(t: dict) -> PricingScheme:
    p = "pricing"
    kw = {f.name: _take(t, f.name, p, float, 0.0) for f in dataclasses.fields(PricingScheme)}
    _no_leftovers(t, p)
    for k, v in kw.items():
        if v < 0:
            raise ConfigError(f"pricing.{k}", "must be >= 0")
    return PricingScheme(**kw)


def _parse_output(t: dict) -> OutputSection:
    p = "output"
    o = OutputSection(*(_take(t, k, p, str, "") for k in ("trace", "report", "windows")))
    _no_leftovers(t, p)
    return o


def _cross_check(c: RunConfig) -> None:
    r = c.run
    if c.engine.lookahead is None and r.engine == "cmb":
        raise ConfigError("engine.lookahead", "required by the cmb engine")
    if c.engine.lookahead is not None and r.engine != "cmb":
        raise ConfigError("engine.lookahead", f"only meaningful for the cmb engine, not {r.engine}")
    if r.engine == "sequential":
        if r.n_lps != 1:
            raise ConfigError("run.n_lps", "the sequential engine runs on exactly one LP")
        if c.gaia.enabled:
            raise ConfigError("gaia.enabled", "the sequential engine does not migrate entities")
    rep = c.replication
    if rep.replicas > r.n_lps:
        raise ConfigError("replication.replicas", f"{rep.replicas} replicas need at least as many LPs, have {r.n_lps}")
    if (rep.replicas > 1 or rep.re_replication) and r.engine != "timestepped":
        raise ConfigError("replication.replicas", f"replication runs under the timestepped engine only, not {r.engine}")
    if c.env.speeds is not None and len(c.env.speeds) != r.n_lps:
        raise ConfigError("env.speeds", f"{len(c.env.speeds)} speeds for {r.n_lps} LPs")
    for i, cr in enumerate(c.env.crashes):
        if not 0 <= cr.lp < r.n_lps:
            raise ConfigError(f"env.crashes[{i}].lp", f"no LP {cr.lp}")
    for i, ep in enumerate(c.env.background):
        if not 0 <= ep.lp < r.n_lps:
            raise ConfigError(f"env.background[{i}].lp", f"no LP {ep.lp}")
        if ep.factor < 1.0:
            raise ConfigError(f"env.background[{i}].factor", "must be >= 1")
    try:
        m = c.build_model()
    except (ValueError, ModelConfigError) as exc:
        raise ConfigError("model", str(exc)) from None
    if r.explicit_placement is not None and len(r.explicit_placement) != m.n_entities:
        raise ConfigError("run.explicit_placement", f"{len(r.explicit_placement)} LPs given for {m.n_entities} entities")
    if r.explicit_placement is not None and any(not 0 <= x < r.n_lps for x in r.explicit_placement):
        raise ConfigError("run.explicit_placement", "LP out of range")


def from_dict(doc: dict) -> RunConfig:
    doc = {k: (dict(v) if isinstance(v, dict) else v) for k, v in doc.items()}
    unknown = sorted(set(doc) - set(_SECTIONS))
    if unknown:
        raise ConfigError(unknown[0], "unknown section")
    c = RunConfig(
        run=_parse_run(_section(doc, "run")),
        model=_parse_model(_section(doc, "model")),
        engine=_parse_engine(_section(doc, "engine")),
        gaia=_parse_gaia(_section(doc, "gaia")),
        replication=_parse_replication(_section(doc, "replication")),
        env=_parse_env(_section(doc, "env")),
        pricing=_parse_pricing(_section(doc, "pricing")),
        output=_parse_output(_section(doc, "output")),
    )
    _cross_check(c)
    return c


def parse_literal(text: str) -> Any:
    """A TOML value (``3``, ``true``, ``[1, 2]``, ``"x"``), else the raw string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(doc: dict, item: str) -> None:
    key, sep, value = item.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(item, "override must look like section.key=value")
    parts = key.split(".")
    if len(parts) < 2:
        raise ConfigError(key, "override key needs a section, e.g. run.seed")
    node = doc
    for p in parts[:-1]:
        nxt = node.setdefault(p, {})
        if not isinstance(nxt, dict):
            raise ConfigError(key, f"{p} is not a table")
        node = nxt
    node[parts[-1]] = parse_literal(value.strip())


def load_document(text: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<toml>", str(exc)) from None


def parse_config(text: str, overrides: list[str] | tuple[str, ...] = ()) -> RunConfig:
    doc = load_document(text)
    for item in overrides:
        apply_override(doc, item)
    return from_dict(doc)
