"""Domain types and closed-form mathematics of the DL/UL steering game.

Two agents (downlink and uplink) each pick, per slice, the fraction of that
slice's traffic sent over the NTN (satellite) link; the remainder uses the
fiber link. Each agent maximizes a priority-weighted sum of per-slice
utilities minus a shared quadratic penalty on aggregate link oversubscription.
Because that penalty is the same term in both payoffs, the game has an exact
potential (``potential``) whose gradient is given by ``potential_gradient``.

All functions here are pure; every sum runs left to right in slice order so
results are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np

__all__ = [
    "Agent",
    "DomainError",
    "ContractError",
    "StandingAssumptionError",
    "STANDARD_CLASSES",
    "SlaProfile",
    "UtilityWeights",
    "SliceSpec",
    "LinkTelemetry",
    "GameState",
    "make_allocation",
    "throughput_utility",
    "latency_utility",
    "reliability_utility",
    "blended_metric",
    "sla_penalty",
    "slice_utility",
    "slice_utility_derivative",
    "slice_utility_curvature",
    "agent_link_demands",
    "coupling_penalty",
    "coupling_gradient",
    "oversubscription_indicator",
    "payoff",
    "potential",
    "potential_gradient",
    "potential_hessian",
]

SLA_DIMENSIONS = ("rtt", "loss", "jitter")

# Built-in traffic classes. Scenario files may declare further classes.
V2X = "V2X"
EMERGENCY = "Emergency"
VIDEO = "VideoStreaming"
IOT = "IoT"
BEST_EFFORT = "BestEffort"
STANDARD_CLASSES = (V2X, EMERGENCY, VIDEO, IOT, BEST_EFFORT)


class DomainError(ValueError):
    """An input lies outside the mathematical domain of an operation."""


class ContractError(ValueError):
    """Arguments are individually valid but inconsistent with each other."""


class StandingAssumptionError(DomainError):
    """NTN and fiber capacity estimates coincide.

    Strict concavity of the potential (and hence uniqueness of the Nash
    equilibrium) needs the two capacity estimates to differ.
    """

    def __init__(self, capacity: float):
        super().__init__(
            "standing assumption violated: NTN and fiber capacity estimates "
            f"must differ (both are {capacity!r} Mbps); equal capacities make "
            "the throughput utility flat and the equilibrium non-unique"
        )
        self.capacity = capacity


class Agent(str, Enum):
    DL = "DL"
    UL = "UL"

    @property
    def other(self) -> "Agent":
        return Agent.UL if self is Agent.DL else Agent.DL


def _finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return value


def _fraction(name: str, value: float) -> float:
    value = _finite(name, value)
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def _positive(name: str, value: float) -> float:
    value = _finite(name, value)
    if value <= 0.0:
        raise DomainError(f"{name} must be > 0, got {value!r}")
    return value


def _nonnegative(name: str, value: float) -> float:
    value = _finite(name, value)
    if value < 0.0:
        raise DomainError(f"{name} must be >= 0, got {value!r}")
    return value


@dataclass(frozen=True)
class SlaProfile:
    """Transport-layer SLA ceilings of one traffic class.

    ``max_loss`` is a fraction (0.005 means 0.5 %). ``latency_ceiling``
    normalizes the latency utility and defaults to ``max_rtt``.
    """

    max_rtt: float
    max_jitter: float
    max_loss: float
    latency_ceiling: float | None = None

    def __post_init__(self):
        _positive("max_rtt", self.max_rtt)
        _positive("max_jitter", self.max_jitter)
        _positive("max_loss", self.max_loss)
        if self.max_loss > 1.0:
            raise DomainError(f"max_loss is a fraction in (0, 1], got {self.max_loss!r}")
        if self.latency_ceiling is not None:
            _positive("latency_ceiling", self.latency_ceiling)

    @property
    def ceiling(self) -> float:
        return self.max_rtt if self.latency_ceiling is None else self.latency_ceiling

    def threshold(self, dimension: str) -> float:
        if dimension == "rtt":
            return self.max_rtt
        if dimension == "loss":
            return self.max_loss
        if dimension == "jitter":
            return self.max_jitter
        raise KeyError(dimension)


@dataclass(frozen=True)
class UtilityWeights:
    throughput: float
    latency: float
    reliability: float
    penalty: float
    severity: float

    def __post_init__(self):
        for name in ("throughput", "latency", "reliability", "penalty", "severity"):
            _nonnegative(name, getattr(self, name))


@dataclass(frozen=True)
class SliceSpec:
    slice_class: str
    priority: float
    sla: SlaProfile
    weights: UtilityWeights
    demand_estimate: float

    def __post_init__(self):
        _positive("priority", self.priority)
        _positive("demand_estimate", self.demand_estimate)

    def with_demand(self, demand: float) -> "SliceSpec":
        return replace(self, demand_estimate=demand)


@dataclass(frozen=True)
class LinkTelemetry:
    """Measured state of one backhaul link. Times in ms, rates in Mbps."""

    rtt: float
    jitter: float
    loss: float
    capacity_estimate: float
    rx_throughput: float = 0.0
    tx_throughput: float = 0.0

    def __post_init__(self):
        _nonnegative("rtt", self.rtt)
        _nonnegative("jitter", self.jitter)
        _fraction("loss", self.loss)
        _positive("capacity_estimate", self.capacity_estimate)

    def metric(self, dimension: str) -> float:
        if dimension == "rtt":
            return self.rtt
        if dimension == "loss":
            return self.loss
        if dimension == "jitter":
            return self.jitter
        raise KeyError(dimension)


def make_allocation(values: Sequence[float], size: int | None = None) -> tuple[float, ...]:
    """Validate a per-slice NTN-fraction vector and return it as a tuple."""
    alloc = tuple(_fraction(f"alloc[{i}]", v) for i, v in enumerate(values))
    if size is not None and len(alloc) != size:
        raise ContractError(f"allocation has {len(alloc)} entries, expected {size}")
    return alloc


@dataclass(frozen=True)
class GameState:
    """Joint strategy profile plus the shared estimates both payoffs read."""

    dl_slices: tuple[SliceSpec, ...]
    ul_slices: tuple[SliceSpec, ...]
    dl_alloc: tuple[float, ...]
    ul_alloc: tuple[float, ...]
    ntn: LinkTelemetry
    fib: LinkTelemetry
    coupling_coeff: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "dl_slices", tuple(self.dl_slices))
        object.__setattr__(self, "ul_slices", tuple(self.ul_slices))
        object.__setattr__(self, "dl_alloc", make_allocation(self.dl_alloc, len(self.dl_slices)))
        object.__setattr__(self, "ul_alloc", make_allocation(self.ul_alloc, len(self.ul_slices)))
        # mu = 0 is allowed so the decoupled game can be studied
        _nonnegative("coupling_coeff", self.coupling_coeff)
        if self.ntn.capacity_estimate == self.fib.capacity_estimate:
            raise StandingAssumptionError(self.ntn.capacity_estimate)

    def slices(self, agent: Agent | str) -> tuple[SliceSpec, ...]:
        return self.dl_slices if Agent(agent) is Agent.DL else self.ul_slices

    def alloc(self, agent: Agent | str) -> tuple[float, ...]:
        return self.dl_alloc if Agent(agent) is Agent.DL else self.ul_alloc

    def with_alloc(self, agent: Agent | str, alloc: Sequence[float]) -> "GameState":
        if Agent(agent) is Agent.DL:
            return replace(self, dl_alloc=tuple(alloc))
        return replace(self, ul_alloc=tuple(alloc))

    def joint_alloc(self) -> np.ndarray:
        return np.array(self.dl_alloc + self.ul_alloc, dtype=float)

    def with_joint_alloc(self, joint: Sequence[float]) -> "GameState":
        n = len(self.dl_slices)
        joint = [float(x) for x in joint]
        return replace(self, dl_alloc=tuple(joint[:n]), ul_alloc=tuple(joint[n:]))

    @property
    def demands(self) -> np.ndarray:
        return np.array([s.demand_estimate for s in self.dl_slices + self.ul_slices])


# --- per-slice utility terms -------------------------------------------------


def throughput_utility(alpha: float, ntn_cap: float, fib_cap: float) -> float:
    """Log utility of the capacity blended by the NTN fraction ``alpha``."""
    _positive("ntn_cap", ntn_cap)
    _positive("fib_cap", fib_cap)
    return math.log(1.0 + alpha * ntn_cap + (1.0 - alpha) * fib_cap)


def latency_utility(alpha: float, ntn_rtt: float, fib_rtt: float, latency_ceiling: float) -> float:
    _positive("latency_ceiling", latency_ceiling)
    return -(alpha * ntn_rtt + (1.0 - alpha) * fib_rtt) / latency_ceiling


def reliability_utility(alpha: float, ntn_loss: float, fib_loss: float) -> float:
    _fraction("ntn_loss", ntn_loss)
    _fraction("fib_loss", fib_loss)
    return alpha * (1.0 - ntn_loss) + (1.0 - alpha) * (1.0 - fib_loss)


def blended_metric(alpha: float, ntn_value: float, fib_value: float) -> float:
    return alpha * ntn_value + (1.0 - alpha) * fib_value


def sla_penalty(alpha: float, ntn: LinkTelemetry, fib: LinkTelemetry, sla: SlaProfile) -> float:
    """Quadratic barrier on blended RTT, loss and jitter above their SLA ceilings."""
    total = 0.0
    for dim in SLA_DIMENSIONS:
        s = sla.threshold(dim)
        if s <= 0.0:
            raise DomainError(f"SLA threshold for {dim} must be > 0")
        excess = blended_metric(alpha, ntn.metric(dim), fib.metric(dim)) - s
        if excess > 0.0:
            total += (excess / s) ** 2
    return total


def slice_utility(alpha: float, spec: SliceSpec, ntn: LinkTelemetry, fib: LinkTelemetry) -> float:
    w = spec.weights
    t = throughput_utility(alpha, ntn.capacity_estimate, fib.capacity_estimate)
    lat = latency_utility(alpha, ntn.rtt, fib.rtt, spec.sla.ceiling)
    r = reliability_utility(alpha, ntn.loss, fib.loss)
    p = sla_penalty(alpha, ntn, fib, spec.sla)
    return w.throughput * t + w.latency * lat + w.reliability * r - w.penalty * w.severity * p


def slice_utility_derivative(alpha: float, spec: SliceSpec, ntn: LinkTelemetry, fib: LinkTelemetry) -> float:
    """dU/dalpha; the hinge derivative is taken as 0 exactly at the kink."""
    w = spec.weights
    d_cap = ntn.capacity_estimate - fib.capacity_estimate
    blended_cap = 1.0 + fib.capacity_estimate + alpha * d_cap
    grad = w.throughput * d_cap / blended_cap
    grad -= w.latency * (ntn.rtt - fib.rtt) / spec.sla.ceiling
    grad += w.reliability * (fib.loss - ntn.loss)
    pen = 0.0
    for dim in SLA_DIMENSIONS:
        s = spec.sla.threshold(dim)
        slope = ntn.metric(dim) - fib.metric(dim)
        excess = blended_metric(alpha, ntn.metric(dim), fib.metric(dim)) - s
        if excess > 0.0:
            pen += 2.0 * excess * slope / (s * s)
    return grad - w.penalty * w.severity * pen


def slice_utility_curvature(alpha: float, spec: SliceSpec, ntn: LinkTelemetry, fib: LinkTelemetry) -> float:
    """d2U/dalpha2 away from hinge kinks; always <= 0."""
    w = spec.weights
    d_cap = ntn.capacity_estimate - fib.capacity_estimate
    blended_cap = 1.0 + fib.capacity_estimate + alpha * d_cap
    curv = -w.throughput * d_cap * d_cap / (blended_cap * blended_cap)
    pen = 0.0
    for dim in SLA_DIMENSIONS:
        s = spec.sla.threshold(dim)
        slope = ntn.metric(dim) - fib.metric(dim)
        if blended_metric(alpha, ntn.metric(dim), fib.metric(dim)) > s:
            pen += 2.0 * slope * slope / (s * s)
    return curv - w.penalty * w.severity * pen


# --- coupling ----------------------------------------------------------------


def agent_link_demands(alloc: Sequence[float], slices: Sequence[SliceSpec]) -> tuple[float, float]:
    """Planned (NTN, fiber) load of one agent from its per-slice demand estimates."""
    if len(alloc) != len(slices):
        raise ContractError(f"allocation has {len(alloc)} entries for {len(slices)} slices")
    ntn = 0.0
    fib = 0.0
    for a, spec in zip(alloc, slices):
        ntn += a * spec.demand_estimate
        fib += (1.0 - a) * spec.demand_estimate
    return ntn, fib


def _hinge_sq(x: float) -> float:
    return x * x if x > 0.0 else 0.0


def coupling_penalty(
    dl_alloc: Sequence[float],
    ul_alloc: Sequence[float],
    dl_slices: Sequence[SliceSpec],
    ul_slices: Sequence[SliceSpec],
    ntn_cap: float,
    fib_cap: float,
) -> float:
    """Squared oversubscription of both links by the combined DL+UL demand."""
    dl_ntn, dl_fib = agent_link_demands(dl_alloc, dl_slices)
    ul_ntn, ul_fib = agent_link_demands(ul_alloc, ul_slices)
    return _hinge_sq(dl_ntn + ul_ntn - ntn_cap) + _hinge_sq(dl_fib + ul_fib - fib_cap)


def _aggregate_demands(state: GameState) -> tuple[float, float]:
    dl_ntn, dl_fib = agent_link_demands(state.dl_alloc, state.dl_slices)
    ul_ntn, ul_fib = agent_link_demands(state.ul_alloc, state.ul_slices)
    return dl_ntn + ul_ntn, dl_fib + ul_fib


def _state_coupling(state: GameState) -> float:
    d_ntn, d_fib = _aggregate_demands(state)
    return _hinge_sq(d_ntn - state.ntn.capacity_estimate) + _hinge_sq(d_fib - state.fib.capacity_estimate)


def coupling_gradient(state: GameState) -> np.ndarray:
    """dC/dalpha for every slice, DL block first."""
    d_ntn, d_fib = _aggregate_demands(state)
    over_ntn = max(0.0, d_ntn - state.ntn.capacity_estimate)
    over_fib = max(0.0, d_fib - state.fib.capacity_estimate)
    per_mbps = 2.0 * over_ntn - 2.0 * over_fib
    return per_mbps * state.demands


def oversubscription_indicator(state: GameState) -> int:
    """kappa in {0, 2, 4}: twice the number of links whose demand exceeds capacity."""
    d_ntn, d_fib = _aggregate_demands(state)
    return 2 * (int(d_ntn > state.ntn.capacity_estimate) + int(d_fib > state.fib.capacity_estimate))


# --- payoffs and potential ---------------------------------------------------


def _weighted_utility_sum(slices, alloc, ntn, fib) -> float:
    total = 0.0
    for a, spec in zip(alloc, slices):
        total += spec.priority * slice_utility(a, spec, ntn, fib)
    return total


def payoff(agent: Agent, state: GameState) -> float:
    agent = Agent(agent)
    own = _weighted_utility_sum(state.slices(agent), state.alloc(agent), state.ntn, state.fib)
    return own - state.coupling_coeff * _state_coupling(state)


def potential(state: GameState) -> float:
    dl = _weighted_utility_sum(state.dl_slices, state.dl_alloc, state.ntn, state.fib)
    ul = _weighted_utility_sum(state.ul_slices, state.ul_alloc, state.ntn, state.fib)
    return dl + ul - state.coupling_coeff * _state_coupling(state)


def potential_gradient(state: GameState) -> np.ndarray:
    own = [
        spec.priority * slice_utility_derivative(a, spec, state.ntn, state.fib)
        for a, spec in zip(state.dl_alloc + state.ul_alloc, state.dl_slices + state.ul_slices)
    ]
    return np.array(own) - state.coupling_coeff * coupling_gradient(state)


def potential_hessian(state: GameState) -> np.ndarray:
    """Analytic Hessian: diagonal utility curvature minus mu*kappa*b b^T."""
    diag = [
        spec.priority * slice_utility_curvature(a, spec, state.ntn, state.fib)
        for a, spec in zip(state.dl_alloc + state.ul_alloc, state.dl_slices + state.ul_slices)
    ]
    b = state.demands
    kappa = oversubscription_indicator(state)
    return np.diag(diag) - state.coupling_coeff * kappa * np.outer(b, b)
