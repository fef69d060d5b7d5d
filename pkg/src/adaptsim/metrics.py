"""Run reports, pay-per-use pricing and efficiency."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from fractions import Fraction


@dataclass
class Counters:
    """Overhead counters, merged from the LPs by the coordinator."""

    total_processed: int = 0
    committed_events: int = 0
    null_messages: int = 0
    rollbacks: int = 0
    rolled_back_events: int = 0
    anti_messages: int = 0
    remote_messages: int = 0
    local_messages: int = 0
    migrations: int = 0
    migration_messages: int = 0
    forwarded_messages: int = 0
    dedup_drops: int = 0
    unsafe_processings: int = 0
    gvt_rounds: int = 0
    barriers: int = 0

    @property
    def channel_messages(self) -> int:
        """Every message that crossed an LP boundary and is billable."""
        return (
            self.remote_messages
            + self.null_messages
            + self.anti_messages
            + self.migration_messages
            + self.forwarded_messages
        )


@dataclass
class LpWindow:
    lp: int
    window: int
    start: float
    end: float
    events: int
    busy: float
    idle: float
    remote_sent: int
    remote_recv: int
    entities: int

    CSV_HEADER = "lp,window,start,end,events,busy,idle,remote_sent,remote_recv,entities"

    @property
    def length(self) -> float:
        return self.end - self.start

    @property
    def load(self) -> float:
        return self.busy / self.length if self.length > 0 else 0.0

    def csv(self) -> str:
        return (
            f"{self.lp},{self.window},{self.start:.9g},{self.end:.9g},{self.events},"
            f"{self.busy:.9g},{self.idle:.9g},{self.remote_sent},{self.remote_recv},{self.entities}"
        )


@dataclass(frozen=True)
class PricingScheme:
    price_per_lp_second: float = 0.0
    price_per_remote_message: float = 0.0
    price_per_lp_instance_second: float = 0.0

    def __post_init__(self) -> None:
        for k, v in asdict(self).items():
            if v < 0:
                raise ValueError(f"{k} must be >= 0")


@dataclass(frozen=True)
class CostBreakdown:
    compute: Fraction
    communication: Fraction
    rental: Fraction

    @property
    def total(self) -> Fraction:
        return self.compute + self.communication + self.rental


@dataclass
class RunReport:
    engine: str
    n_lps: int
    wct: float
    counters: Counters
    lp_busy: list[float]
    lp_idle: list[float]
    lp_allocated: list[float]
    windows: list[LpWindow] = field(default_factory=list)
    migration_log: list[tuple[int, int, int, int, str]] = field(default_factory=list)
    live_replicas: list[tuple[float, int]] = field(default_factory=list)
    status: str = "ok"
    failure: str = ""
    pricing: PricingScheme = field(default_factory=PricingScheme)

    @property
    def committed_events(self) -> int:
        return self.counters.committed_events

    @property
    def total_processed(self) -> int:
        return self.counters.total_processed

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def replication_overhead_ratio(self) -> float:
        """Copies delivered per accepted copy (1.0 without replication)."""
        accepted = self.counters.remote_messages + self.counters.local_messages - self.counters.dedup_drops
        if accepted <= 0:
            return 1.0
        return (self.counters.remote_messages + self.counters.local_messages) / accepted

    def cost_breakdown(self, pricing: PricingScheme | None = None) -> CostBreakdown:
        return cost_terms(self, pricing or self.pricing)

    @property
    def cost(self) -> float:
        return float(self.cost_breakdown().total)

    def to_text(self) -> str:
        c = self.counters
        br = self.cost_breakdown()
        rows: list[tuple[str, object]] = [
            ("status", self.status),
            ("failure", self.failure),
            ("engine", self.engine),
            ("n_lps", self.n_lps),
            ("wct", f"{self.wct:.9g}"),
            ("committed_events", c.committed_events),
            ("total_processed", c.total_processed),
            ("efficiency", f"{efficiency(self):.6f}" if c.total_processed else "nan"),
            ("null_messages", c.null_messages),
            ("rollbacks", c.rollbacks),
            ("rolled_back_events", c.rolled_back_events),
            ("anti_messages", c.anti_messages),
            ("remote_messages", c.remote_messages),
            ("local_messages", c.local_messages),
            ("migrations", c.migrations),
            ("migration_messages", c.migration_messages),
            ("forwarded_messages", c.forwarded_messages),
            ("dedup_drops", c.dedup_drops),
            ("replication_overhead_messages", c.dedup_drops),
            ("replication_overhead_ratio", f"{self.replication_overhead_ratio:.6f}"),
            ("channel_messages", c.channel_messages),
            ("unsafe_processings", c.unsafe_processings),
            ("gvt_rounds", c.gvt_rounds),
            ("barriers", c.barriers),
            ("busy_total", f"{sum(self.lp_busy):.9g}"),
            ("idle_total", f"{sum(self.lp_idle):.9g}"),
            ("lp_busy", " ".join(f"{b:.9g}" for b in self.lp_busy)),
            ("lp_idle", " ".join(f"{b:.9g}" for b in self.lp_idle)),
            ("lp_allocated", " ".join(f"{b:.9g}" for b in self.lp_allocated)),
            ("cost_compute", f"{float(br.compute):.9g}"),
            ("cost_communication", f"{float(br.communication):.9g}"),
            ("cost_rental", f"{float(br.rental):.9g}"),
            ("cost", f"{float(br.total):.9g}"),
        ]
        if self.live_replicas:
            rows.append(("live_replicas", " ".join(f"{t:.6g}:{n}" for t, n in self.live_replicas)))
        return "".join(f"{k}={v}\n" for k, v in rows)

    def windows_csv(self) -> str:
        return LpWindow.CSV_HEADER + "\n" + "".join(w.csv() + "\n" for w in self.windows)

    def migrations_csv(self) -> str:
        return "round,entity,from,to,reason\n" + "".join(
            f"{r},{e},{a},{b},{why}\n" for r, e, a, b, why in self.migration_log
        )


def cost_terms(report: RunReport, pricing: PricingScheme) -> CostBreakdown:
    # Fractions make paired-run cost deltas exact
    f = Fraction
    compute = sum((f(b) for b in report.lp_busy), f(0)) * f(pricing.price_per_lp_second)
    comm = f(report.counters.channel_messages) * f(pricing.price_per_remote_message)
    rental = sum((f(a) for a in report.lp_allocated), f(0)) * f(pricing.price_per_lp_instance_second)
    return CostBreakdown(compute, comm, rental)


def cost(report: RunReport, pricing: PricingScheme) -> float:
    return float(cost_terms(report, pricing).total)


def efficiency(report: RunReport) -> float:
    if report.counters.total_processed <= 0:
        raise ValueError("efficiency undefined: nothing was processed")
    return report.counters.committed_events / report.counters.total_processed
