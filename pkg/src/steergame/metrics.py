"""Episode-level evaluation metrics computed from per-tick telemetry samples.

Everything here is a pure function of the sample list, so a report rebuilt
from persisted samples is identical to the one produced live.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .game import STANDARD_CLASSES, SliceSpec
from .simulator import TelemetrySample, account_sla, summarize_interval

__all__ = [
    "UndefinedMetricError",
    "EpisodeReport",
    "effective_rtt",
    "jain_fairness",
    "loss_percent",
    "mean_throughput",
    "link_utilizations",
    "interval_summaries",
    "violation_flags",
    "violation_rates",
    "potential_stats",
    "aggregate_report",
]

DROP_WINDOW = 10


class UndefinedMetricError(ValueError):
    """The metric has no value for this input (for example, no traffic at all)."""


@dataclass(frozen=True)
class EpisodeReport:
    """Network-level summary of one episode.

    ``effective_rtt``, ``loss_pct`` and ``fairness`` are None when undefined
    (an idle episode carries no traffic to weight them by).
    """

    controller: str
    seed: int
    effective_rtt: float | None
    loss_pct: float | None
    throughput: float
    fairness: float | None
    per_slice_violation_rates: dict[str, float]
    potential_stats: dict[str, float | int | None]
    intervals: int

    def to_dict(self) -> dict:
        return asdict(self)


def effective_rtt(samples: Sequence[TelemetrySample]) -> float:
    """RTT weighted by the volume each link actually delivered."""
    weighted = 0.0
    volume = 0.0
    for s in samples:
        weighted += s.ntn.rx_throughput * s.ntn.rtt + s.fib.rx_throughput * s.fib.rtt
        volume += s.ntn.rx_throughput + s.fib.rx_throughput
    if volume <= 0.0:
        raise UndefinedMetricError("effective RTT needs nonzero delivered volume")
    return weighted / volume


def jain_fairness(values: Sequence[float]) -> float:
    """(sum x)^2 / (n * sum x^2).

    Evaluated in exact rational arithmetic on the shortest decimal form of
    each input and rounded once, so decimal inputs give the correctly
    rounded index: (0.9, 0.3) yields 0.8, not 0.7999999999999999.
    """
    xs = [float(v) for v in values]
    if not xs:
        raise UndefinedMetricError("fairness of an empty set")
    if any(not math.isfinite(x) for x in xs):
        raise ValueError("fairness inputs must be finite")
    if any(x < 0 for x in xs):
        raise ValueError("fairness inputs must be >= 0")
    exact = [Fraction(repr(x)) for x in xs]
    squares = sum(x * x for x in exact)
    if squares == 0:
        raise UndefinedMetricError("fairness of all-zero utilizations")
    return float(sum(exact) ** 2 / (len(exact) * squares))


def loss_percent(samples: Sequence[TelemetrySample]) -> float:
    """Offered-weighted loss over the episode, in percent."""
    offered = math.fsum(sum(s.offered) for s in samples)
    delivered = math.fsum(sum(s.delivered) for s in samples)
    if offered <= 0.0:
        raise UndefinedMetricError("loss needs nonzero offered traffic")
    return 100.0 * max(0.0, offered - delivered) / offered


def mean_throughput(samples: Sequence[TelemetrySample]) -> float:
    """Mean bidirectional delivered rate, Mbps."""
    if not samples:
        raise ValueError("no samples")
    return math.fsum(sum(s.delivered) for s in samples) / len(samples)


def link_utilizations(samples: Sequence[TelemetrySample]) -> tuple[float, float]:
    """Time-averaged delivered/capacity-estimate on (NTN, fiber)."""
    if not samples:
        raise ValueError("no samples")
    ntn = math.fsum(s.ntn.rx_throughput / s.ntn.capacity_estimate for s in samples) / len(samples)
    fib = math.fsum(s.fib.rx_throughput / s.fib.capacity_estimate for s in samples) / len(samples)
    return ntn, fib


def interval_summaries(samples: Sequence[TelemetrySample]) -> list[TelemetrySample]:
    """One aggregated sample per decision interval, in time order."""
    groups: list[list[TelemetrySample]] = []
    for s in samples:
        if groups and groups[-1][0].interval == s.interval:
            groups[-1].append(s)
        else:
            groups.append([s])
    return [summarize_interval(g) for g in groups]


def violation_flags(samples: Sequence[TelemetrySample], slices: Sequence[SliceSpec]) -> list[tuple[bool, ...]]:
    return [account_sla(summary, slices) for summary in interval_summaries(samples)]


def violation_rates(samples: Sequence[TelemetrySample], slices: Sequence[SliceSpec]) -> dict[str, float]:
    """Percent of decision intervals in violation, averaged over each class's slices.

    Standard classes are always reported (0 when absent), followed by any
    custom classes in first-seen order.
    """
    flags = violation_flags(samples, slices)
    classes = list(STANDARD_CLASSES) + [s.slice_class for s in slices if s.slice_class not in STANDARD_CLASSES]
    classes = list(dict.fromkeys(classes))
    rates = {}
    for cls in classes:
        members = [i for i, s in enumerate(slices) if s.slice_class == cls]
        if not members or not flags:
            rates[cls] = 0.0
            continue
        per_slice = [100.0 * sum(f[i] for f in flags) / len(flags) for i in members]
        rates[cls] = math.fsum(per_slice) / len(per_slice)
    return rates


def potential_stats(samples: Sequence[TelemetrySample], window: int = DROP_WINDOW) -> dict[str, float | int | None]:
    """Mean, min and drop count of the per-interval potential.

    A drop is an interval whose potential falls below the mean minus two
    standard deviations of the preceding ``window`` intervals.
    """
    values = [s.potential_value for s in interval_summaries(samples)]
    values = [v for v in values if math.isfinite(v)]
    if not values:
        return {"mean": None, "min": None, "drop_count": 0}
    drops = 0
    for k in range(window, len(values)):
        trailing = np.asarray(values[k - window : k])
        if values[k] < trailing.mean() - 2.0 * trailing.std():
            drops += 1
    return {"mean": math.fsum(values) / len(values), "min": min(values), "drop_count": drops}


def _maybe(fn, *args):
    try:
        return fn(*args)
    except UndefinedMetricError:
        return None


def aggregate_report(
    samples: Sequence[TelemetrySample],
    slices: Sequence[SliceSpec],
    controller: str = "",
    seed: int = 0,
) -> EpisodeReport:
    """Assemble every episode metric; ``slices`` lists DL slices then UL slices."""
    if not samples:
        raise ValueError("no samples")
    utilization = link_utilizations(samples)
    return EpisodeReport(
        controller=controller,
        seed=seed,
        effective_rtt=_maybe(effective_rtt, samples),
        loss_pct=_maybe(loss_percent, samples),
        throughput=mean_throughput(samples),
        fairness=_maybe(jain_fairness, utilization),
        per_slice_violation_rates=violation_rates(samples, slices),
        potential_stats=potential_stats(samples),
        intervals=samples[-1].interval - samples[0].interval + 1,
    )
