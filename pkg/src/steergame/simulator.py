"""Deterministic discrete-time fluid simulator of a two-link (NTN + fiber) backhaul.

Both directions share each link's capacity. Per tick: every slice offers a
rate from its burst/pause source, allocations split it across the links, the
links respond with RTT, loss and delivered rate, and the estimators are
updated. Every ``decision_interval`` ticks each agent recomputes its own
allocation from local observations only.

All randomness comes from ``stream(seed, name)``, one independent generator
per named component, so adding a slice never perturbs another slice's draws.
"""

from __future__ import annotations

import hashlib
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence

import numpy as np

from .baselines import BaselinePolicy, equal_split, random_alloc, sla_heuristic, weighted_rr
from .game import (
    Agent,
    GameState,
    LinkTelemetry,
    SliceSpec,
    blended_metric,
    potential,
)
from .solver import SolverConfig, best_response_to_load

__all__ = [
    "TrafficProfile",
    "TrafficSource",
    "LinkModel",
    "EwmaParams",
    "EpisodeConfig",
    "ConfigError",
    "GameController",
    "TelemetrySample",
    "Observation",
    "RxCounters",
    "Estimates",
    "stream",
    "generate_offered_load",
    "step_links",
    "observe_local",
    "update_estimates",
    "account_sla",
    "summarize_interval",
    "run_episode",
]


class ConfigError(ValueError):
    """Invalid episode configuration, detected before the simulation starts."""


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for component ``name``, derived by stable hashing."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *words])))


# --- traffic -----------------------------------------------------------------


@dataclass(frozen=True)
class TrafficProfile:
    """Burst/pause source. Rates in Mbps, durations in seconds."""

    mean_rate: float
    burst_rate: float
    burst_duration_range: tuple[float, float] = (0.0, 0.0)
    pause_duration_range: tuple[float, float] = (1.0, 1.0)
    rate_jitter: float = 0.0

    def __post_init__(self):
        if self.mean_rate < 0 or self.burst_rate < 0:
            raise ConfigError("traffic rates must be >= 0")
        for name in ("burst_duration_range", "pause_duration_range"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise ConfigError(f"{name} must be an ordered pair of non-negative durations")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if not 0.0 <= self.rate_jitter < 1.0:
            raise ConfigError("rate_jitter must lie in [0, 1)")

    @property
    def never_bursts(self) -> bool:
        return self.burst_duration_range[1] <= 0.0


class TrafficSource:
    """Alternating pause/burst state machine; starts in a pause."""

    def __init__(self, profile: TrafficProfile, rng: np.random.Generator):
        self.profile = profile
        self.rng = rng
        self.bursting = False
        self.remaining = self._draw(profile.pause_duration_range)

    def _draw(self, bounds: tuple[float, float]) -> float:
        lo, hi = bounds
        return lo if hi == lo else float(self.rng.uniform(lo, hi))

    def _advance_phase(self):
        p = self.profile
        for _ in range(4):
            self.bursting = not self.bursting
            if self.bursting and p.never_bursts:
                continue
            self.remaining += self._draw(p.burst_duration_range if self.bursting else p.pause_duration_range)
            if self.remaining > 0.0:
                return
        if self.remaining <= 0.0:
            # both ranges degenerate at zero: hold the pause level
            self.bursting = False
            self.remaining = math.inf

    def next_rate(self, dt: float) -> float:
        """Rate offered during the next tick of length ``dt``."""
        p = self.profile
        level = p.burst_rate if self.bursting else p.mean_rate
        if p.rate_jitter > 0.0:
            level *= 1.0 + float(self.rng.uniform(-p.rate_jitter, p.rate_jitter))
        self.remaining -= dt
        if self.remaining <= 0.0:
            self._advance_phase()
        return level


def generate_offered_load(profile: TrafficProfile, ticks: int, tick: float, rng: np.random.Generator) -> np.ndarray:
    """Offered rate for ``ticks`` consecutive ticks of one source."""
    source = TrafficSource(profile, rng)
    return np.array([source.next_rate(tick) for _ in range(ticks)])


# --- links -------------------------------------------------------------------


@dataclass(frozen=True)
class LinkModel:
    """Parametric delay/loss response of one link.

    RTT rises by ``queue_sensitivity`` ms per unit of overload above
    capacity, plus a quarter of that slope above 80 % utilization. Loss drops
    the excess over capacity; ``base_loss`` adds load-independent random loss
    (0 disables it).
    """

    base_rtt: float
    jitter_std: float
    capacity: float
    queue_sensitivity: float = 200.0
    loss_mode: str = "excess-drop"
    base_loss: float = 0.0
    jitter_window: int = 10

    def __post_init__(self):
        if not self.capacity > 0:
            raise ConfigError("link capacity must be > 0")
        if self.base_rtt < 0 or self.jitter_std < 0 or self.queue_sensitivity < 0:
            raise ConfigError("base_rtt, jitter_std and queue_sensitivity must be >= 0")
        if self.loss_mode != "excess-drop":
            raise ConfigError(f"unsupported loss_mode {self.loss_mode!r}")
        if not 0.0 <= self.base_loss < 1.0:
            raise ConfigError("base_loss must lie in [0, 1)")
        if self.jitter_window < 2:
            raise ConfigError("jitter_window must be >= 2")


def _link_response(load: float, model: LinkModel, rng: np.random.Generator, history: deque) -> LinkTelemetry:
    rho = load / model.capacity
    qs = model.queue_sensitivity
    rtt = model.base_rtt + qs * max(0.0, rho - 1.0) + 0.25 * qs * max(0.0, rho - 0.8)
    rtt += float(rng.normal(0.0, model.jitter_std)) if model.jitter_std > 0 else 0.0
    rtt = max(rtt, 0.5 * model.base_rtt)
    history.append(rtt)
    jitter = float(np.std(history)) if len(history) > 1 else 0.0
    excess = (load - model.capacity) / load if load > model.capacity else 0.0
    loss = 1.0 - (1.0 - model.base_loss) * (1.0 - excess) if load > 0.0 else 0.0
    return LinkTelemetry(
        rtt=rtt,
        jitter=jitter,
        loss=loss,
        capacity_estimate=model.capacity,
        rx_throughput=load * (1.0 - loss),
        tx_throughput=load,
    )


def step_links(
    ntn_load: float,
    fib_load: float,
    models: tuple[LinkModel, LinkModel],
    rngs: tuple[np.random.Generator, np.random.Generator],
    histories: tuple[deque, deque] | None = None,
) -> tuple[LinkTelemetry, LinkTelemetry]:
    """One tick of both links. ``histories`` hold recent RTTs for the jitter window."""
    if ntn_load < 0 or fib_load < 0:
        raise ValueError("link loads must be >= 0")
    if histories is None:
        histories = tuple(deque(maxlen=m.jitter_window) for m in models)
    ntn = _link_response(ntn_load, models[0], rngs[0], histories[0])
    fib = _link_response(fib_load, models[1], rngs[1], histories[1])
    return ntn, fib


# --- local observation -------------------------------------------------------


@dataclass(frozen=True)
class RxCounters:
    """Cumulative Mbit received at one agent's end of each link."""

    ntn_mbit: float = 0.0
    fib_mbit: float = 0.0


@dataclass(frozen=True)
class Observation:
    """Everything an agent sees: link telemetry and the opposing aggregate load."""

    agent: Agent
    ntn: LinkTelemetry
    fib: LinkTelemetry
    opposing_ntn: float
    opposing_fib: float


def observe_local(
    agent: Agent | str,
    ntn: LinkTelemetry,
    fib: LinkTelemetry,
    rx_now: RxCounters,
    rx_before: RxCounters,
    elapsed: float,
) -> Observation:
    """Infer the opposing agent's per-link load from this agent's RX counters.

    Traffic received at an agent's end was sent by the other agent, so the
    counter deltas are the opposing direction's delivered rates.
    """
    if elapsed <= 0:
        raise ValueError("elapsed must be > 0")
    d_ntn = rx_now.ntn_mbit - rx_before.ntn_mbit
    d_fib = rx_now.fib_mbit - rx_before.fib_mbit
    if d_ntn < 0 or d_fib < 0:
        raise ValueError("RX counters must be monotone")
    return Observation(Agent(agent), ntn, fib, d_ntn / elapsed, d_fib / elapsed)


# --- estimators --------------------------------------------------------------


@dataclass(frozen=True)
class EwmaParams:
    beta_capacity: float = 0.2
    beta_demand: float = 0.2
    peak_window: int = 300

    def __post_init__(self):
        for name in ("beta_capacity", "beta_demand"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ConfigError(f"{name} must lie in (0, 1]")
        if self.peak_window < 1:
            raise ConfigError("peak_window must be >= 1")


DEMAND_FLOOR = 0.1


@dataclass(frozen=True)
class Estimates:
    capacity_ntn: float
    capacity_fib: float
    demand: tuple[float, ...]
    opposing_ntn: float = 0.0
    opposing_fib: float = 0.0


def _achievable(link: LinkTelemetry, capacity: float, loss_floor: float) -> float:
    """Capacity implied by one observation; holds ``capacity`` unless saturated."""
    congestion_drop = link.loss > loss_floor + 1e-9
    if link.tx_throughput >= capacity or congestion_drop:
        return link.rx_throughput / (1.0 - loss_floor)
    return capacity


def update_estimates(
    prev: Estimates,
    ntn: LinkTelemetry,
    fib: LinkTelemetry,
    demand_peaks: Sequence[float],
    opposing_peaks: tuple[float, float],
    params: EwmaParams,
    loss_floor: tuple[float, float] = (0.0, 0.0),
) -> Estimates:
    """One EWMA step of the capacity, own-demand and opposing-load estimates.

    ``ntn``/``fib`` carry the link's offered (tx) and delivered (rx) rates.
    A link counts as saturated when its offered rate reaches the current
    estimate or it drops more than its non-congestive ``loss_floor``; only
    then does the delivered rate (corrected for that floor) move the
    capacity estimate. Demand estimates track the windowed peak offered rate.
    All estimates are floored at 0.1 Mbps.
    """
    bc, bd = params.beta_capacity, params.beta_demand
    cap_ntn = (1.0 - bc) * prev.capacity_ntn + bc * _achievable(ntn, prev.capacity_ntn, loss_floor[0])
    cap_fib = (1.0 - bc) * prev.capacity_fib + bc * _achievable(fib, prev.capacity_fib, loss_floor[1])
    if len(demand_peaks) != len(prev.demand):
        raise ValueError("demand_peaks length does not match the estimate vector")
    demand = tuple(
        max(DEMAND_FLOOR, (1.0 - bd) * old + bd * peak) for old, peak in zip(prev.demand, demand_peaks)
    )
    opp_ntn = max(0.0, (1.0 - bd) * prev.opposing_ntn + bd * opposing_peaks[0])
    opp_fib = max(0.0, (1.0 - bd) * prev.opposing_fib + bd * opposing_peaks[1])
    return Estimates(
        capacity_ntn=max(DEMAND_FLOOR, cap_ntn),
        capacity_fib=max(DEMAND_FLOOR, cap_fib),
        demand=demand,
        opposing_ntn=opp_ntn,
        opposing_fib=opp_fib,
    )


class _AgentEstimator:
    """Windowed peaks feeding ``update_estimates`` for one agent.

    The demand windows start out holding the configured priors, so a prior
    keeps acting as a peak until a full window of real traffic replaces it.
    """

    def __init__(self, priors: Estimates, params: EwmaParams):
        self.params = params
        self.current = priors
        w = params.peak_window
        self.demand_windows = [deque([d], maxlen=w) for d in priors.demand]
        self.opposing_windows = (deque(maxlen=w), deque(maxlen=w))
        self.loss_windows = (deque(maxlen=w), deque(maxlen=w))

    def step(self, ntn: LinkTelemetry, fib: LinkTelemetry, offered: Sequence[float], opposing: tuple[float, float]):
        for window, rate in zip(self.demand_windows, offered):
            window.append(rate)
        for window, rate in zip(self.opposing_windows, opposing):
            window.append(rate)
        caps = (self.current.capacity_ntn, self.current.capacity_fib)
        for window, link, cap in zip(self.loss_windows, (ntn, fib), caps):
            # only loss seen below the capacity estimate tells us the floor
            if 0.0 < link.tx_throughput < cap:
                window.append(link.loss)
        floor = tuple(min(w) if w else 0.0 for w in self.loss_windows)
        self.current = update_estimates(
            self.current,
            ntn,
            fib,
            [max(w) for w in self.demand_windows],
            (max(self.opposing_windows[0]), max(self.opposing_windows[1])),
            self.params,
            floor,
        )
        return self.current


# --- controllers -------------------------------------------------------------


class Controller(Protocol):
    def decide(
        self, slices: Sequence[SliceSpec], obs: Observation, estimates: Estimates, previous: Sequence[float]
    ) -> tuple[float, ...]:
        ...


def _decision_telemetry(obs: Observation, est: Estimates) -> tuple[LinkTelemetry, LinkTelemetry]:
    ntn = replace(obs.ntn, capacity_estimate=est.capacity_ntn)
    fib = replace(obs.fib, capacity_estimate=est.capacity_fib)
    return ntn, fib


def _with_demands(slices: Sequence[SliceSpec], est: Estimates) -> list[SliceSpec]:
    return [s.with_demand(d) for s, d in zip(slices, est.demand)]


@dataclass
class GameController:
    """One best response per decision against the inferred opposing load."""

    solver: SolverConfig = field(default_factory=SolverConfig)
    coupling_coeff: float = 1.0

    def decide(self, slices, obs, estimates, previous):
        ntn, fib = _decision_telemetry(obs, estimates)
        if ntn.capacity_estimate == fib.capacity_estimate:
            # standing assumption momentarily violated by the estimates: hold
            return tuple(previous)
        return best_response_to_load(
            _with_demands(slices, estimates),
            ntn,
            fib,
            estimates.opposing_ntn,
            estimates.opposing_fib,
            self.coupling_coeff,
            previous,
            self.solver,
        )


@dataclass
class BaselineController:
    policy: BaselinePolicy
    rng: np.random.Generator | None = None
    link_capacities: tuple[float, float] = (1.0, 1.0)

    def decide(self, slices, obs, estimates, previous):
        kind = self.policy.kind
        if kind == "equal_split":
            return equal_split(slices)
        if kind == "weighted_rr":
            return weighted_rr(slices, *self.link_capacities)
        if kind == "random":
            return random_alloc(slices, self.rng)
        ntn, fib = _decision_telemetry(obs, estimates)
        return sla_heuristic(
            _with_demands(slices, estimates),
            ntn,
            fib,
            self.policy.utilization_threshold,
            background=(estimates.opposing_ntn, estimates.opposing_fib),
        )


# --- episode -----------------------------------------------------------------


@dataclass(frozen=True)
class EpisodeConfig:
    slices_dl: tuple[tuple[SliceSpec, TrafficProfile], ...]
    slices_ul: tuple[tuple[SliceSpec, TrafficProfile], ...]
    ntn: LinkModel
    fib: LinkModel
    controller: SolverConfig | BaselinePolicy = field(default_factory=SolverConfig)
    coupling_coeff: float = 1.0
    duration: float = 300.0
    tick: float = 0.1
    decision_interval: int = 10
    seed: int = 0
    estimator: EwmaParams = field(default_factory=EwmaParams)
    record_potential: bool = True

    def __post_init__(self):
        object.__setattr__(self, "slices_dl", tuple(tuple(p) for p in self.slices_dl))
        object.__setattr__(self, "slices_ul", tuple(tuple(p) for p in self.slices_ul))
        if not self.duration > 0 or not self.tick > 0:
            raise ConfigError("duration and tick must be > 0")
        if self.decision_interval < 1:
            raise ConfigError("decision_interval must be >= 1")
        if not self.slices_dl and not self.slices_ul:
            raise ConfigError("at least one slice is required")
        if self.coupling_coeff < 0:
            raise ConfigError("coupling_coeff must be >= 0")
        if isinstance(self.controller, SolverConfig) and self.ntn.capacity == self.fib.capacity:
            raise ConfigError(
                "standing assumption violated: the potential-game controller needs "
                "NTN and fiber capacities that differ"
            )

    @property
    def ticks(self) -> int:
        return int(round(self.duration / self.tick))

    @property
    def slices(self) -> tuple[SliceSpec, ...]:
        return tuple(s for s, _ in self.slices_dl) + tuple(s for s, _ in self.slices_ul)

    @property
    def controller_name(self) -> str:
        return "potential_game" if isinstance(self.controller, SolverConfig) else self.controller.kind


@dataclass(frozen=True)
class TelemetrySample:
    """State of one tick. Per-slice tuples list DL slices first, then UL."""

    time: float
    interval: int
    ntn: LinkTelemetry
    fib: LinkTelemetry
    offered: tuple[float, ...]
    delivered: tuple[float, ...]
    blended_rtt: tuple[float, ...]
    blended_jitter: tuple[float, ...]
    blended_loss: tuple[float, ...]
    dl_alloc: tuple[float, ...]
    ul_alloc: tuple[float, ...]
    potential_value: float

    @property
    def alloc(self) -> tuple[float, ...]:
        return self.dl_alloc + self.ul_alloc


def _blend(alloc: Sequence[float], ntn: LinkTelemetry, fib: LinkTelemetry):
    rtt = tuple(blended_metric(a, ntn.rtt, fib.rtt) for a in alloc)
    jitter = tuple(blended_metric(a, ntn.jitter, fib.jitter) for a in alloc)
    loss = tuple(blended_metric(a, ntn.loss, fib.loss) for a in alloc)
    return rtt, jitter, loss


def _mean(values: Sequence[float]) -> float:
    total = 0.0
    for v in values:
        total += v
    return total / len(values)


def _summarize_link(links: Sequence[LinkTelemetry]) -> LinkTelemetry:
    return LinkTelemetry(
        rtt=_mean([l.rtt for l in links]),
        jitter=_mean([l.jitter for l in links]),
        loss=_mean([l.loss for l in links]),
        capacity_estimate=links[-1].capacity_estimate,
        rx_throughput=_mean([l.rx_throughput for l in links]),
        tx_throughput=_mean([l.tx_throughput for l in links]),
    )


def summarize_interval(samples: Sequence[TelemetrySample]) -> TelemetrySample:
    """Collapse the ticks of one decision interval into a single sample.

    Every link and per-slice field is the tick mean. The allocation fields
    hold the allocation in force at the end of the interval; while it was
    constant, the blended means equal ``blended_metric`` of the link means.
    """
    if not samples:
        raise ValueError("empty interval")
    n = len(samples[0].offered)

    def column(attr: str) -> tuple[float, ...]:
        return tuple(_mean([getattr(s, attr)[i] for s in samples]) for i in range(n))

    last = samples[-1]
    finite = [s.potential_value for s in samples if math.isfinite(s.potential_value)]
    return TelemetrySample(
        time=samples[0].time,
        interval=samples[0].interval,
        ntn=_summarize_link([s.ntn for s in samples]),
        fib=_summarize_link([s.fib for s in samples]),
        offered=column("offered"),
        delivered=column("delivered"),
        blended_rtt=column("blended_rtt"),
        blended_jitter=column("blended_jitter"),
        blended_loss=column("blended_loss"),
        dl_alloc=last.dl_alloc,
        ul_alloc=last.ul_alloc,
        potential_value=_mean(finite) if finite else math.nan,
    )


def account_sla(sample: TelemetrySample, slices: Sequence[SliceSpec]) -> tuple[bool, ...]:
    """Per-slice flag: any blended metric above its SLA ceiling."""
    if len(slices) != len(sample.blended_rtt):
        raise ValueError("slice list does not match the sample")
    return tuple(
        sample.blended_rtt[i] > s.sla.max_rtt
        or sample.blended_jitter[i] > s.sla.max_jitter
        or sample.blended_loss[i] > s.sla.max_loss
        for i, s in enumerate(slices)
    )


def _idle_telemetry(model: LinkModel) -> LinkTelemetry:
    return LinkTelemetry(rtt=model.base_rtt, jitter=model.jitter_std, loss=model.base_loss, capacity_estimate=model.capacity)


def _make_controller(cfg: EpisodeConfig, agent: Agent) -> Controller:
    if isinstance(cfg.controller, SolverConfig):
        return GameController(cfg.controller, cfg.coupling_coeff)
    rng = None
    if cfg.controller.kind == "random":
        rng = stream(cfg.controller.seed, f"policy/random/{agent.value}")
    return BaselineController(cfg.controller, rng, (cfg.ntn.capacity, cfg.fib.capacity))


def _is_adaptive(cfg: EpisodeConfig) -> bool:
    """Controllers that react to telemetry; static rules need no observation."""
    return isinstance(cfg.controller, SolverConfig) or cfg.controller.kind == "sla_heuristic"


def decision_offsets(cfg: EpisodeConfig) -> dict[Agent, int]:
    """Tick offset of each agent's decisions within an interval.

    The UL agent decides half an interval after the DL agent, so the two best
    responses alternate instead of reacting to the same snapshot.
    """
    return {Agent.DL: 0, Agent.UL: cfg.decision_interval // 2}


def run_episode(cfg: EpisodeConfig, decision_log: list | None = None) -> list[TelemetrySample]:
    """Simulate one episode and return its per-tick samples.

    Every agent decides once per ``decision_interval`` from the telemetry of
    the preceding interval. Adaptive controllers hold the capacity-
    proportional split until they have observed a full interval; static
    baselines apply their rule from the first tick. Build the report with
    ``metrics.aggregate_report(samples, cfg.slices, ...)``.

    If ``decision_log`` is given, one ``(time, agent, allocation)`` tuple is
    appended to it per controller decision.
    """
    sides = {Agent.DL: cfg.slices_dl, Agent.UL: cfg.slices_ul}
    specs = {a: [s for s, _ in pairs] for a, pairs in sides.items()}
    sources = {
        a: [
            TrafficSource(profile, stream(cfg.seed, f"traffic/{a.value}/{i}/{spec.slice_class}"))
            for i, (spec, profile) in enumerate(pairs)
        ]
        for a, pairs in sides.items()
    }
    link_rngs = (stream(cfg.seed, "link/ntn"), stream(cfg.seed, "link/fib"))
    histories = (deque(maxlen=cfg.ntn.jitter_window), deque(maxlen=cfg.fib.jitter_window))
    controllers = {a: _make_controller(cfg, a) for a in sides}
    estimators = {
        a: _AgentEstimator(
            Estimates(cfg.ntn.capacity, cfg.fib.capacity, tuple(s.demand_estimate for s in specs[a])),
            cfg.estimator,
        )
        for a in sides
    }
    neutral = cfg.ntn.capacity / (cfg.ntn.capacity + cfg.fib.capacity)
    alloc = {a: tuple(neutral for _ in specs[a]) for a in sides}
    offsets = decision_offsets(cfg)
    adaptive = _is_adaptive(cfg)
    rx = {a: RxCounters() for a in sides}
    rx_at_decision = dict(rx)
    recent: deque = deque(maxlen=cfg.decision_interval)
    samples: list[TelemetrySample] = []
    dt = cfg.tick

    for k in range(cfg.ticks):
        for a in sides:
            if not specs[a] or k % cfg.decision_interval != offsets[a]:
                continue
            if adaptive and len(recent) < cfg.decision_interval:
                continue
            if recent:
                ntn_view = _summarize_link([r[0] for r in recent])
                fib_view = _summarize_link([r[1] for r in recent])
                elapsed = dt * len(recent)
            else:
                ntn_view, fib_view = _idle_telemetry(cfg.ntn), _idle_telemetry(cfg.fib)
                elapsed = dt
            obs = observe_local(a, ntn_view, fib_view, rx[a], rx_at_decision[a], elapsed)
            alloc[a] = tuple(controllers[a].decide(specs[a], obs, estimators[a].current, alloc[a]))
            rx_at_decision[a] = rx[a]
            if decision_log is not None:
                decision_log.append((round(k * dt, 9), a.value, alloc[a]))

        offered = {a: [src.next_rate(dt) for src in sources[a]] for a in sides}
        load = {}
        for a in sides:
            ntn_load = 0.0
            fib_load = 0.0
            for frac, rate in zip(alloc[a], offered[a]):
                ntn_load += frac * rate
                fib_load += (1.0 - frac) * rate
            load[a] = (ntn_load, fib_load)
        ntn, fib = step_links(
            load[Agent.DL][0] + load[Agent.UL][0],
            load[Agent.DL][1] + load[Agent.UL][1],
            (cfg.ntn, cfg.fib),
            link_rngs,
            histories,
        )
        keep_ntn = 1.0 - ntn.loss
        keep_fib = 1.0 - fib.loss
        delivered = {
            a: [rate * (frac * keep_ntn + (1.0 - frac) * keep_fib) for frac, rate in zip(alloc[a], offered[a])]
            for a in sides
        }
        for a in sides:
            # each agent receives what the other one sent
            sent_ntn, sent_fib = load[a.other]
            got = (sent_ntn * keep_ntn, sent_fib * keep_fib)
            rx[a] = RxCounters(rx[a].ntn_mbit + got[0] * dt, rx[a].fib_mbit + got[1] * dt)
            estimators[a].step(ntn, fib, offered[a], got)

        est = estimators[Agent.DL].current
        ntn_rec = replace(ntn, capacity_estimate=est.capacity_ntn)
        fib_rec = replace(fib, capacity_estimate=est.capacity_fib)
        recent.append((ntn_rec, fib_rec))
        phi = math.nan
        if cfg.record_potential and est.capacity_ntn != est.capacity_fib:
            state = GameState(
                _with_demands(specs[Agent.DL], estimators[Agent.DL].current),
                _with_demands(specs[Agent.UL], estimators[Agent.UL].current),
                alloc[Agent.DL],
                alloc[Agent.UL],
                ntn_rec,
                fib_rec,
                cfg.coupling_coeff,
            )
            phi = potential(state)
        joint = alloc[Agent.DL] + alloc[Agent.UL]
        rtt, jitter, loss = _blend(joint, ntn_rec, fib_rec)
        samples.append(
            TelemetrySample(
                time=round(k * dt, 9),
                interval=k // cfg.decision_interval,
                ntn=ntn_rec,
                fib=fib_rec,
                offered=tuple(offered[Agent.DL] + offered[Agent.UL]),
                delivered=tuple(delivered[Agent.DL] + delivered[Agent.UL]),
                blended_rtt=rtt,
                blended_jitter=jitter,
                blended_loss=loss,
                dl_alloc=alloc[Agent.DL],
                ul_alloc=alloc[Agent.UL],
                potential_value=phi,
            )
        )
    return samples
