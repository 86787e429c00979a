"""Comparison steering policies.

Every policy returns a per-slice NTN-fraction tuple, like the game solver,
so the simulator can swap controllers freely.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .game import LinkTelemetry, SliceSpec

__all__ = [
    "BaselinePolicy",
    "equal_split",
    "weighted_rr",
    "random_alloc",
    "heuristic_score",
    "sla_heuristic",
]

KINDS = ("equal_split", "weighted_rr", "random", "sla_heuristic")


@dataclass(frozen=True)
class BaselinePolicy:
    kind: str
    seed: int | None = None
    utilization_threshold: float = 0.9

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown baseline {self.kind!r}; expected one of {KINDS}")
        if self.kind == "random" and self.seed is None:
            raise ValueError("the random baseline needs an explicit seed")
        if not 0.0 < self.utilization_threshold <= 1.0:
            raise ValueError("utilization_threshold must lie in (0, 1]")


def equal_split(slices: Sequence[SliceSpec]) -> tuple[float, ...]:
    if not slices:
        raise ValueError("at least one slice is required")
    return tuple(0.5 for _ in slices)


def weighted_rr(slices: Sequence[SliceSpec], ntn_cap: float, fib_cap: float) -> tuple[float, ...]:
    """Capacity-proportional split, identical for every slice."""
    if ntn_cap <= 0 or fib_cap <= 0:
        raise ValueError("capacities must be > 0")
    share = ntn_cap / (ntn_cap + fib_cap)
    return tuple(share for _ in slices)


def random_alloc(slices: Sequence[SliceSpec], seed: int | np.random.Generator) -> tuple[float, ...]:
    """I.i.d. uniform fractions. Pass a Generator to draw successive vectors from one stream."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return tuple(float(x) for x in rng.uniform(0.0, 1.0, len(slices)))


def heuristic_score(spec: SliceSpec, link: LinkTelemetry) -> float:
    """Class-weighted normalized SLA headroom of one link for one slice.

    RTT headroom is weighted by the latency weight, loss headroom by the
    reliability weight and jitter headroom by the severity-scaled penalty
    weight. Negative headroom counts as zero.
    """
    w = spec.weights
    sla = spec.sla
    rtt = max(0.0, (sla.max_rtt - link.rtt) / sla.max_rtt)
    loss = max(0.0, (sla.max_loss - link.loss) / sla.max_loss)
    jitter = max(0.0, (sla.max_jitter - link.jitter) / sla.max_jitter)
    return w.latency * rtt + w.reliability * loss + w.penalty * w.severity * jitter


def sla_heuristic(
    slices: Sequence[SliceSpec],
    ntn: LinkTelemetry,
    fib: LinkTelemetry,
    utilization_threshold: float = 0.9,
    background: tuple[float, float] = (0.0, 0.0),
) -> tuple[float, ...]:
    """Score-based all-or-nothing placement followed by overload redistribution.

    Each slice goes wholly to the link with the larger headroom score (ties go
    to fiber). Then, for at most ``len(slices)`` sweeps, while a link's
    projected utilization exceeds ``utilization_threshold``, the
    lowest-priority slice on it is moved to the other link, provided the move
    lowers the larger of the two utilizations. ``background`` is load on
    (NTN, fiber) that this policy does not control, such as the opposite
    direction's traffic.
    """
    alloc = [0.0 if heuristic_score(s, fib) >= heuristic_score(s, ntn) else 1.0 for s in slices]
    caps = (ntn.capacity_estimate, fib.capacity_estimate)

    def utilizations(a: Sequence[float]) -> tuple[float, float]:
        load_ntn, load_fib = background
        for frac, spec in zip(a, slices):
            load_ntn += frac * spec.demand_estimate
            load_fib += (1.0 - frac) * spec.demand_estimate
        return load_ntn / caps[0], load_fib / caps[1]

    for _ in range(len(slices)):
        u_ntn, u_fib = utilizations(alloc)
        if max(u_ntn, u_fib) <= utilization_threshold:
            break
        moved = False
        # try the more loaded link first
        for src in sorted((1.0, 0.0), key=lambda side: -(u_ntn if side == 1.0 else u_fib)):
            util = u_ntn if src == 1.0 else u_fib
            if util <= utilization_threshold:
                continue
            candidates = sorted(
                (i for i, a in enumerate(alloc) if a == src),
                key=lambda i: (slices[i].priority, i),
            )
            for i in candidates:
                trial = list(alloc)
                trial[i] = 1.0 - src
                if max(utilizations(trial)) < max(u_ntn, u_fib):
                    alloc = trial
                    moved = True
                    break
            if moved:
                break
        if not moved:
            break
    return tuple(alloc)
