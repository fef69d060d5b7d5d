"""Batch front-end.

    adaptsim --config run.toml [--override key=value ...] [--oracle]
             [--trace PATH] [--report PATH] [--quiet]
    adaptsim-diff A.trace B.trace

Exit codes: 0 success, 1 configuration error, 2 runtime failure (the
report is still written, with ``status=failed``), 3 oracle mismatch.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from .config import ConfigError, RunConfig, parse_config
from .core import SimError, parse_trace_line
from .metrics import RunReport
from .model import ModelConfigError
from .reliable import ReplicationConfigError
from .runtime import EnvConfigError
from .sync import EngineConfigError, RunResult, make_engine

log = logging.getLogger("adaptsim")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_MISMATCH = 0, 1, 2, 3

# raised while building a run: the configuration was at fault, not the run
CONFIG_ERRORS = (ConfigError, EngineConfigError, ModelConfigError, EnvConfigError, ReplicationConfigError)


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TraceDiff:
    identical: bool
    line: int = 0  # 1-based; 0 when identical
    a: str | None = None  # None: that side had already ended
    b: str | None = None

    def describe(self) -> str:
        if self.identical:
            return "traces identical"
        return f"traces differ at line {self.line}:\n  a: {self.a!r}\n  b: {self.b!r}"


def _check(lines: list[str], label: str) -> None:
    for i, ln in enumerate(lines, 1):
        try:
            parse_trace_line(ln)
        except ValueError:
            raise TraceFormatError(f"{label} line {i}: malformed trace line {ln!r}") from None


def diff_traces(a: str, b: str) -> TraceDiff:
    """Compare two canonical trace texts line by line."""
    la, lb = a.splitlines(), b.splitlines()
    _check(la, "a")
    _check(lb, "b")
    for i in range(max(len(la), len(lb))):
        x = la[i] if i < len(la) else None
        y = lb[i] if i < len(lb) else None
        if x != y:
            return TraceDiff(False, i + 1, x, y)
    if a != b:  # same lines, different bytes (a trailing newline, say)
        return TraceDiff(False, len(la) + 1, "", None)
    return TraceDiff(True)


def diff_trace_files(path_a: str | Path, path_b: str | Path) -> TraceDiff:
    return diff_traces(Path(path_a).read_text(), Path(path_b).read_text())


def run(config: RunConfig) -> RunResult:
    """Execute one configured run; writes whatever [output] asks for."""
    model = config.build_model()
    r = config.run
    engine = make_engine(
        r.engine, model,
        seed=r.seed, end_time=r.end_time, n_lps=r.n_lps, profile=config.build_profile(),
        placement=r.placement if r.explicit_placement is None else "round_robin",
        explicit_placement=r.explicit_placement,
        gaia=config.build_gaia(model.n_entities),
        replicas=config.replication.replicas, re_replication=config.replication.re_replication,
        pricing=config.pricing, options=config.engine_options(),
    )
    result = engine.run()
    o = config.output
    if o.trace:
        Path(o.trace).write_text(result.trace_text())
    if o.report:
        Path(o.report).write_text(result.report.to_text())
    if o.windows:
        Path(o.windows).write_text(result.report.windows_csv())
    return result


def failure_report(config: RunConfig, exc: Exception) -> str:
    """A minimal report for runs that died before producing one."""
    return f"status=failed\nfailure={type(exc).__name__}: {exc}\nengine={config.run.engine}\nn_lps={config.run.n_lps}\n"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adaptsim", description="Run one simulation from a TOML configuration.")
    ap.add_argument("--config", required=True, metavar="PATH", help="run configuration (TOML)")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                    help="dotted-key override, e.g. run.engine=cmb (repeatable)")
    ap.add_argument("--oracle", action="store_true", help="also run the sequential twin and diff the traces")
    ap.add_argument("--trace", metavar="PATH", help="write the committed trace here")
    ap.add_argument("--report", metavar="PATH", help="write the key=value report here")
    ap.add_argument("--quiet", action="store_true", help="print nothing on success")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = parse_config(text, args.override)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.trace:
        config.output.trace = args.trace
    if args.report:
        config.output.report = args.report
    try:
        result = run(config)
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimError as exc:
        return _runtime_failure(config, exc)
    report: RunReport = result.report
    if not report.ok:
        print(f"run failed: {report.failure}", file=sys.stderr)
        return EXIT_RUNTIME
    if not args.quiet:
        sys.stdout.write(report.to_text())
    if args.oracle:
        twin = run(config.oracle_twin())
        d = diff_traces(twin.trace_text(), result.trace_text())
        if not d.identical:
            print(f"oracle mismatch: {d.describe()}", file=sys.stderr)
            return EXIT_MISMATCH
        if not args.quiet:
            print("oracle=identical")
    return EXIT_OK


def _runtime_failure(config: RunConfig, exc: Exception) -> int:
    print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
    if config.output.report:
        Path(config.output.report).write_text(failure_report(config, exc))
    return EXIT_RUNTIME


def diff_main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="adaptsim-diff", description="Compare two committed traces.")
    ap.add_argument("a")
    ap.add_argument("b")
    args = ap.parse_args(argv)
    try:
        d = diff_trace_files(args.a, args.b)
    except (OSError, TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(d.describe())
    return EXIT_OK if d.identical else EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
