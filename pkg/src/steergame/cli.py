"""The ``steergame`` command: simulate, compare, solve and verify.

Exit codes: 0 success, 1 verification failure, 2 configuration error
(including a violated standing assumption), 3 runtime failure.

Output files are plain CSV and JSON so any plotting tool can read them.
Column sets are fixed; see ``TELEMETRY_COLUMNS`` and friends below and
docs/output-formats.md.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Iterable, Sequence

from .game import Agent, ContractError, DomainError, payoff, potential
from .metrics import EpisodeReport, aggregate_report, link_utilizations
from .scenario import (
    CONTROLLERS,
    Scenario,
    ScenarioError,
    bundled_path,
    load_scenario,
    resolve_seed,
)
from .simulator import ConfigError, EpisodeConfig, TelemetrySample, run_episode
from .solver import bri, verify_equilibrium
from .verify import MUTATIONS, run_suite

__all__ = [
    "OUTPUT_VERSION",
    "TELEMETRY_COLUMNS",
    "DECISION_COLUMNS",
    "AGGREGATE_COLUMNS",
    "EXIT_OK",
    "EXIT_VERIFY",
    "EXIT_CONFIG",
    "EXIT_RUNTIME",
    "parse_seeds",
    "parse_overrides",
    "resolve_scenario_path",
    "telemetry_rows",
    "write_telemetry",
    "report_document",
    "summary_table",
    "cmd_simulate",
    "cmd_compare",
    "cmd_solve",
    "cmd_verify",
    "main",
]

OUTPUT_VERSION = 1

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

TELEMETRY_COLUMNS = (
    "time_s",
    "interval",
    "row_type",
    "link",
    "direction",
    "slice_index",
    "slice_class",
    "rtt_ms",
    "jitter_ms",
    "loss",
    "capacity_est_mbps",
    "offered_mbps",
    "delivered_mbps",
    "ntn_fraction",
    "potential",
)
DECISION_COLUMNS = ("time_s", "agent", "slice_index", "slice_class", "ntn_fraction")
AGGREGATE_COLUMNS = ("controller", "runs", "effective_rtt_ms", "loss_pct", "throughput_mbps", "fairness")


class UsageError(ValueError):
    """Malformed command-line value."""


# --- argument helpers ----------------------------------------------------------


def parse_seeds(text: str) -> list[int]:
    """Seed list such as ``0,1,5`` or ``0-9``; inclusive ranges may be mixed in."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        m = re.fullmatch(r"(\d+)(?:-(\d+))?", part)
        if m is None:
            raise UsageError(f"bad seed {part!r}; seeds are non-negative integers")
        lo = int(m.group(1))
        hi = int(m.group(2)) if m.group(2) is not None else lo
        if hi < lo:
            raise UsageError(f"empty seed range {part!r}")
        seeds.extend(range(lo, hi + 1))
    if not seeds:
        raise UsageError("seed list is empty")
    return list(dict.fromkeys(seeds))


def parse_overrides(items: Iterable[str]) -> dict[str, Any]:
    """``dotted.path=value`` pairs; values are read as JSON, else kept as strings."""
    out: dict[str, Any] = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise UsageError(f"override {item!r} is not of the form path=value")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def resolve_scenario_path(value: str) -> Path:
    """A scenario file path, or the name of a bundled scenario."""
    path = Path(value)
    if path.is_file():
        return path
    if path.suffix == "" and path.parent == Path("."):
        return bundled_path(value)
    raise ScenarioError("", f"scenario file {value!r} not found")


def _load(value: str, overrides: dict[str, Any] | None) -> Scenario:
    return load_scenario(resolve_scenario_path(value), overrides)


# --- serialization ---------------------------------------------------------------


def _num(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.9g}"


def _clean(value: Any) -> Any:
    """JSON-safe copy: NaN and infinities become null."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _dump_json(doc: Any, path: Path | None = None) -> str:
    text = json.dumps(_clean(doc), indent=2, allow_nan=False) + "\n"
    if path is not None:
        path.write_text(text, encoding="utf-8")
    return text


def telemetry_rows(samples: Sequence[TelemetrySample], cfg: EpisodeConfig) -> Iterable[list[str]]:
    """Two link rows then one row per slice, for every tick."""
    sides = [("dl", i, s.slice_class) for i, (s, _) in enumerate(cfg.slices_dl)]
    sides += [("ul", i, s.slice_class) for i, (s, _) in enumerate(cfg.slices_ul)]
    for s in samples:
        t = f"{s.time:.3f}"
        for name, link in (("ntn", s.ntn), ("fib", s.fib)):
            yield [
                t, str(s.interval), "link", name, "", "", "",
                _num(link.rtt), _num(link.jitter), _num(link.loss), _num(link.capacity_estimate),
                _num(link.tx_throughput), _num(link.rx_throughput), "", _num(s.potential_value),
            ]
        alloc = s.alloc
        for j, (direction, index, cls) in enumerate(sides):
            yield [
                t, str(s.interval), "slice", "", direction, str(index), cls,
                _num(s.blended_rtt[j]), _num(s.blended_jitter[j]), _num(s.blended_loss[j]), "",
                _num(s.offered[j]), _num(s.delivered[j]), _num(alloc[j]), "",
            ]


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)  # RFC 4180: CRLF line ends, minimal quoting
        writer.writerow(header)
        writer.writerows(rows)


def write_telemetry(path: Path, samples: Sequence[TelemetrySample], cfg: EpisodeConfig) -> None:
    _write_csv(path, TELEMETRY_COLUMNS, telemetry_rows(samples, cfg))


def _decision_rows(log: Sequence[tuple], cfg: EpisodeConfig) -> Iterable[list[str]]:
    classes = {
        "DL": [s.slice_class for s, _ in cfg.slices_dl],
        "UL": [s.slice_class for s, _ in cfg.slices_ul],
    }
    for time, agent, alloc in log:
        for i, frac in enumerate(alloc):
            yield [f"{time:.3f}", agent, str(i), classes[agent][i], _num(frac)]


def _metrics(report: EpisodeReport) -> dict[str, float | None]:
    return {
        "effective_rtt_ms": report.effective_rtt,
        "loss_pct": report.loss_pct,
        "throughput_mbps": report.throughput,
        "fairness": report.fairness,
    }


def report_document(
    report: EpisodeReport,
    scenario: Scenario,
    cfg: EpisodeConfig,
    samples: Sequence[TelemetrySample],
    decisions: int,
) -> dict:
    """The report.json layout. Undefined metrics are null."""
    ntn_util, fib_util = link_utilizations(samples)
    return {
        "version": OUTPUT_VERSION,
        "scenario": scenario.name,
        "controller": report.controller,
        "seed": report.seed,
        "duration_s": cfg.duration,
        "ticks": len(samples),
        "intervals": report.intervals,
        "decisions": decisions,
        "metrics": _metrics(report),
        "link_utilization": {"ntn": ntn_util, "fib": fib_util},
        "violation_rates_pct": dict(report.per_slice_violation_rates),
        "potential": dict(report.potential_stats),
    }


def _cell(x: float | None, digits: int) -> str:
    return "n/a" if x is None else f"{x:.{digits}f}"


def summary_table(rows: Sequence[tuple[str, dict[str, float | None]]]) -> str:
    """Fixed-width table: algorithm, RTT, loss, throughput, fairness."""
    header = f"{'Algorithm':<16} {'RTT (ms)':>10} {'Loss (%)':>9} {'Throughput (Mbps)':>18} {'Fairness':>9}"
    lines = [header, "-" * len(header)]
    for name, m in rows:
        lines.append(
            f"{name:<16} {_cell(m['effective_rtt_ms'], 3):>10} {_cell(m['loss_pct'], 3):>9} "
            f"{_cell(m['throughput_mbps'], 3):>18} {_cell(m['fairness'], 3):>9}"
        )
    return "\n".join(lines) + "\n"


# --- episodes -------------------------------------------------------------------


def _run(scenario: Scenario, controller: str, seed: int, log: list | None = None):
    cfg = scenario.episode_config(seed, controller)
    samples = run_episode(cfg, log)
    report = aggregate_report(samples, cfg.slices, cfg.controller_name, seed)
    return cfg, samples, report


def _compare_task(args: tuple[Scenario, str, int]) -> tuple[str, int, EpisodeReport]:
    scenario, controller, seed = args
    _, _, report = _run(scenario, controller, seed)
    return controller, seed, report


def _mean(values: Sequence[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    return math.fsum(present) / len(present) if present else None


# --- commands --------------------------------------------------------------------


def cmd_simulate(
    scenario_path: str,
    out_dir: str | Path,
    overrides: dict[str, Any] | None = None,
    seed: int | None = None,
    controller: str | None = None,
    stdout=None,
) -> int:
    """Run one episode; write telemetry.csv, decisions.csv, report.json and summary.txt."""
    stdout = stdout or sys.stdout
    scenario = _load(scenario_path, overrides)
    seed = resolve_seed(seed, scenario)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log: list = []
    cfg, samples, report = _run(scenario, controller or scenario.controller, seed, log)
    write_telemetry(out / "telemetry.csv", samples, cfg)
    _write_csv(out / "decisions.csv", DECISION_COLUMNS, _decision_rows(log, cfg))
    _dump_json(report_document(report, scenario, cfg, samples, len(log)), out / "report.json")
    table = summary_table([(report.controller, _metrics(report))])
    (out / "summary.txt").write_text(table, encoding="utf-8")
    stdout.write(table)
    return EXIT_OK


def cmd_compare(
    scenario_path: str,
    controllers: Sequence[str],
    seeds: Sequence[int],
    out_dir: str | Path,
    overrides: dict[str, Any] | None = None,
    jobs: int = 1,
    stdout=None,
) -> int:
    """Run every controller on the same seeds; write comparison.json, heatmap.csv and aggregates.csv.

    Results are ordered by the given controller order, then seed, whatever
    the completion order of parallel jobs.
    """
    stdout = stdout or sys.stdout
    if not controllers:
        raise ScenarioError("controller", "at least one controller is required")
    for c in controllers:
        if c not in CONTROLLERS:
            raise ScenarioError("controller", f"unknown controller {c!r}; expected one of {CONTROLLERS}")
    if not seeds:
        raise ScenarioError("seeds", "at least one seed is required")
    controllers = list(dict.fromkeys(controllers))
    scenario = _load(scenario_path, overrides)
    for c in controllers:
        scenario.episode_config(seeds[0], c)  # configuration errors before any work
    tasks = [(scenario, c, s) for c in controllers for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_compare_task, tasks))
    else:
        results = [_compare_task(t) for t in tasks]

    classes = list(results[0][2].per_slice_violation_rates)
    runs = []
    by_controller: dict[str, list[EpisodeReport]] = {c: [] for c in controllers}
    for c, s, report in results:
        by_controller[c].append(report)
        runs.append({"controller": c, "seed": s, "metrics": _metrics(report),
                     "violation_rates_pct": dict(report.per_slice_violation_rates),
                     "potential": dict(report.potential_stats)})
    means = {}
    for c, reports in by_controller.items():
        metrics = {k: _mean([_metrics(r)[k] for r in reports]) for k in _metrics(reports[0])}
        rates = {cls: _mean([r.per_slice_violation_rates[cls] for r in reports]) for cls in classes}
        means[c] = {"runs": len(reports), "metrics": metrics, "violation_rates_pct": rates}

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(
        {
            "version": OUTPUT_VERSION,
            "scenario": scenario.name,
            "controllers": controllers,
            "seeds": list(seeds),
            "classes": classes,
            "means": means,
            "runs": runs,
        },
        out / "comparison.json",
    )
    _write_csv(
        out / "heatmap.csv",
        ("controller",) + tuple(classes),
        ([c] + [_num(means[c]["violation_rates_pct"][cls]) for cls in classes] for c in controllers),
    )
    _write_csv(
        out / "aggregates.csv",
        AGGREGATE_COLUMNS,
        (
            [c, str(means[c]["runs"])] + [_num(means[c]["metrics"][k]) for k in AGGREGATE_COLUMNS[2:]]
            for c in controllers
        ),
    )
    stdout.write(summary_table([(c, means[c]["metrics"]) for c in controllers]))
    return EXIT_OK


def cmd_solve(scenario_path: str, overrides: dict[str, Any] | None = None, stdout=None) -> int:
    """Solve the scenario's static snapshot by best-response iteration and print JSON.

    Returns 1 when the fixed point fails the equilibrium check.
    """
    stdout = stdout or sys.stdout
    scenario = _load(scenario_path, overrides)
    state = scenario.snapshot_state()
    eq, trace = bri(state, scenario.solver)
    check = verify_equilibrium(eq, scenario.solver)
    doc = {
        "version": OUTPUT_VERSION,
        "scenario": scenario.name,
        "dl_alloc": list(eq.dl_alloc),
        "ul_alloc": list(eq.ul_alloc),
        "payoffs": {"DL": payoff(Agent.DL, eq), "UL": payoff(Agent.UL, eq)},
        "potential": potential(eq),
        "sweeps": trace.sweeps,
        "converged": trace.converged,
        "potential_trajectory": trace.potential_trajectory,
        "final_gradient_norm": trace.final_gradient_norm,
        "verify_equilibrium": {
            "is_equilibrium": check.is_equilibrium,
            "max_unilateral_gain": check.max_unilateral_gain,
            "gain_by_agent": dict(check.gain_by_agent),
        },
    }
    stdout.write(_dump_json(doc))
    return EXIT_OK if check.is_equilibrium else EXIT_VERIFY


def cmd_verify(level: str = "fast", mutation: str | None = None, seed: int = 0, stdout=None) -> int:
    """Run the property suite; one line per property, exit 1 if any fails."""
    stdout = stdout or sys.stdout
    results = run_suite(level, mutation, seed)
    for r in results:
        stdout.write(r.line() + "\n")
    failed = [r for r in results if not r.passed]
    stdout.write(f"{len(results) - len(failed)}/{len(results)} properties passed\n")
    return EXIT_VERIFY if failed else EXIT_OK


# --- entry point -----------------------------------------------------------------


def _add_scenario(p: argparse.ArgumentParser, default: str = "default") -> None:
    p.add_argument("--scenario", default=default, help="scenario file, or a bundled name (default, congestion, symmetric_lossless)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="PATH=VALUE",
                   help="override a scenario field, e.g. links.ntn.capacity=50 (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steergame", description="SLA-aware hybrid backhaul steering as a potential game.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one episode and export telemetry and a report")
    _add_scenario(p)
    p.add_argument("--out", default="steergame-out", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="episode seed (fallback: $STEERGAME_SEED, then the scenario)")
    p.add_argument("--controller", choices=CONTROLLERS, default=None)

    p = sub.add_parser("compare", help="run several controllers on paired seeds")
    _add_scenario(p)
    p.add_argument("--out", default="steergame-compare", help="output directory")
    p.add_argument("--controller", default=",".join(CONTROLLERS), help="comma-separated controllers (default: all)")
    p.add_argument("--seeds", default=None, help="seed list, e.g. 0-9 or 1,4,7 (default: the single resolved seed)")
    p.add_argument("--seed", type=int, default=None, help="single seed when --seeds is absent")
    p.add_argument("--jobs", type=int, default=1, help="parallel episodes")

    p = sub.add_parser("solve", help="equilibrium of the scenario's static snapshot")
    _add_scenario(p)

    p = sub.add_parser("verify", help="numerical property suite")
    p.add_argument("--level", choices=("fast", "full"), default="fast")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mutate", choices=sorted(MUTATIONS), default=None,
                   help="inject a known defect; the matching property must fail")
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "verify":
        return cmd_verify(args.level, args.mutate, args.seed)
    overrides = parse_overrides(args.overrides)
    if args.command == "simulate":
        return cmd_simulate(args.scenario, args.out, overrides, args.seed, args.controller)
    if args.command == "compare":
        controllers = [c.strip() for c in args.controller.split(",") if c.strip()]
        if args.seeds is not None:
            seeds = parse_seeds(args.seeds)
        else:
            seeds = [resolve_seed(args.seed, _load(args.scenario, overrides))]
        return cmd_compare(args.scenario, controllers, seeds, args.out, overrides, args.jobs)
    return cmd_solve(args.scenario, overrides)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ScenarioError, ConfigError, DomainError, ContractError, UsageError) as exc:
        print(f"steergame: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        print(f"steergame: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
