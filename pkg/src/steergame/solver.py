"""Best responses, Best Response Iteration and equilibrium diagnostics.

An agent's best response maximizes

    sum_u pi_u U_u(a_u) - mu * C(D_ntn)

over its own box [0, 1]^n. The utilities are separable and the coupling
depends on the agent's allocation only through its planned NTN load
``x = sum_u a_u b_u`` (the fiber load is the agent's total demand minus
``x``). So the problem is solved exactly through a scalar congestion price:
for a price ``p`` every slice independently solves

    max_a  pi_u U_u(a) - p * b_u * a,

which is a 1-D strictly concave problem (safeguarded Newton with bisection
fallback). The NTN load this produces is non-increasing in ``p`` and the
coupling's marginal cost is non-decreasing in the load, so the equilibrium
price is the root of a strictly increasing scalar function, found by
bisection. Each price evaluation is O(n), hence O(n) per best response.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .game import (
    SLA_DIMENSIONS,
    Agent,
    DomainError,
    GameState,
    LinkTelemetry,
    SliceSpec,
    agent_link_demands,
    oversubscription_indicator,
    payoff,
    potential,
    potential_gradient,
    potential_hessian,
    slice_utility,
    slice_utility_curvature,
)

__all__ = [
    "SolverConfig",
    "SolveTrace",
    "SolverError",
    "EquilibriumReport",
    "ConcavityReport",
    "best_response",
    "best_response_to_load",
    "bri",
    "verify_equilibrium",
    "check_concavity",
    "projected_gradient_norm",
    "near_kink",
]


class SolverError(RuntimeError):
    """Inner search exhausted its budget; ``best`` holds the last iterate."""

    def __init__(self, message: str, best: tuple[float, ...]):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-4
    max_sweeps: int = 50
    inner_max_iters: int = 200
    fd_step: float = 1e-6
    order: tuple[str, str] = ("DL", "UL")

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.inner_max_iters < 1:
            raise ValueError("inner_max_iters must be >= 1")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be > 0")
        order = tuple(Agent(a) for a in self.order)
        if set(order) != {Agent.DL, Agent.UL} or len(order) != 2:
            raise ValueError(f"order must be a permutation of DL, UL, got {self.order!r}")
        object.__setattr__(self, "order", order)


@dataclass
class SolveTrace:
    sweeps: int = 0
    potential_trajectory: list[float] = field(default_factory=list)
    final_gradient_norm: float = float("nan")
    converged: bool = False


# --- per-slice marginal utility ---------------------------------------------


class _Marginal:
    """pi_u * dU_u/da and its derivative, with telemetry-dependent constants folded in."""

    __slots__ = ("pi", "wt", "dcap", "cap0", "linear", "hinges")

    def __init__(self, spec: SliceSpec, ntn: LinkTelemetry, fib: LinkTelemetry):
        w = spec.weights
        self.pi = spec.priority
        self.wt = w.throughput
        self.dcap = ntn.capacity_estimate - fib.capacity_estimate
        self.cap0 = 1.0 + fib.capacity_estimate
        self.linear = -w.latency * (ntn.rtt - fib.rtt) / spec.sla.ceiling + w.reliability * (fib.loss - ntn.loss)
        scale = w.penalty * w.severity
        hinges = []
        if scale > 0.0:
            for dim in SLA_DIMENSIONS:
                s = spec.sla.threshold(dim)
                base = fib.metric(dim)
                slope = ntn.metric(dim) - base
                hinges.append((base - s, slope, 2.0 * scale / (s * s)))
        self.hinges = tuple(hinges)

    def slope(self, a: float) -> float:
        g = self.wt * self.dcap / (self.cap0 + a * self.dcap) + self.linear
        for offset, slope, coef in self.hinges:
            excess = offset + a * slope
            if excess > 0.0:
                g -= coef * excess * slope
        return self.pi * g

    def curvature(self, a: float) -> float:
        denom = self.cap0 + a * self.dcap
        c = -self.wt * self.dcap * self.dcap / (denom * denom)
        for offset, slope, coef in self.hinges:
            if offset + a * slope > 0.0:
                c -= coef * slope * slope
        return self.pi * c


def _solve_slice(m: _Marginal, price: float, demand: float, prev: float) -> float:
    """argmax over [0, 1] of pi*U(a) - price*demand*a."""
    target = price * demand
    h0 = m.slope(0.0) - target
    h1 = m.slope(1.0) - target
    if h0 == 0.0 and h1 == 0.0:
        # flat objective: keep the previous allocation
        return prev
    if h0 <= 0.0:
        return 0.0
    if h1 >= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    a = min(max(prev, 0.0), 1.0)
    for _ in range(100):
        h = m.slope(a) - target
        if h > 0.0:
            lo = a
        elif h < 0.0:
            hi = a
        else:
            return a
        if hi - lo <= 1e-15:
            break
        c = m.curvature(a)
        nxt = a - h / c if c < 0.0 else 0.5 * (lo + hi)
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - a) <= 1e-15:
            a = nxt
            break
        a = nxt
    return a


def _coupling_slope(x: float, opp_ntn: float, opp_fib: float, own_total: float, cap_ntn: float, cap_fib: float) -> float:
    """dC/dx where x is the agent's own planned NTN load."""
    over_ntn = opp_ntn + x - cap_ntn
    over_fib = opp_fib + own_total - x - cap_fib
    return 2.0 * max(0.0, over_ntn) - 2.0 * max(0.0, over_fib)


def best_response_to_load(
    slices: Sequence[SliceSpec],
    ntn: LinkTelemetry,
    fib: LinkTelemetry,
    opposing_ntn: float,
    opposing_fib: float,
    coupling_coeff: float,
    previous: Sequence[float],
    cfg: SolverConfig = SolverConfig(),
) -> tuple[float, ...]:
    """Best response of one agent given only the opposing per-link aggregate loads.

    This is the decentralized form: the caller needs no knowledge of the other
    agent's slices or allocation vector.
    """
    if len(previous) != len(slices):
        raise ValueError(f"previous allocation has {len(previous)} entries for {len(slices)} slices")
    marginals = [_Marginal(s, ntn, fib) for s in slices]
    demands = [s.demand_estimate for s in slices]
    prev = [float(p) for p in previous]

    def allocate(price: float) -> list[float]:
        return [_solve_slice(m, price, b, p) for m, b, p in zip(marginals, demands, prev)]

    if coupling_coeff == 0.0:
        return tuple(allocate(0.0))

    own_total = 0.0
    for b in demands:
        own_total += b
    cap_ntn = ntn.capacity_estimate
    cap_fib = fib.capacity_estimate

    def price_gap(price: float) -> tuple[float, list[float]]:
        alloc = allocate(price)
        x = 0.0
        for a, b in zip(alloc, demands):
            x += a * b
        return price - coupling_coeff * _coupling_slope(x, opposing_ntn, opposing_fib, own_total, cap_ntn, cap_fib), alloc

    lo = coupling_coeff * _coupling_slope(0.0, opposing_ntn, opposing_fib, own_total, cap_ntn, cap_fib)
    hi = coupling_coeff * _coupling_slope(own_total, opposing_ntn, opposing_fib, own_total, cap_ntn, cap_fib)
    if lo == hi:
        return tuple(allocate(lo))
    # the root of a strictly increasing gap; check for an exact hit at zero
    # price first since it is the common uncongested case
    if lo < 0.0 < hi:
        gap0, alloc0 = price_gap(0.0)
        if gap0 == 0.0:
            return tuple(alloc0)
        if gap0 < 0.0:
            lo = 0.0
        else:
            hi = 0.0
    alloc = allocate(0.5 * (lo + hi))
    for _ in range(cfg.inner_max_iters):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 1e-13 * (1.0 + abs(mid)) or mid in (lo, hi):
            return tuple(allocate(mid))
        gap, alloc = price_gap(mid)
        if gap > 0.0:
            hi = mid
        elif gap < 0.0:
            lo = mid
        else:
            return tuple(alloc)
    raise SolverError(
        f"congestion-price search did not converge in {cfg.inner_max_iters} iterations "
        f"(bracket [{lo!r}, {hi!r}])",
        best=tuple(alloc),
    )


def best_response(agent: Agent | str, state: GameState, cfg: SolverConfig = SolverConfig()) -> tuple[float, ...]:
    """argmax of ``agent``'s payoff over its own box, the other agent fixed."""
    agent = Agent(agent)
    other = agent.other
    opp_ntn, opp_fib = agent_link_demands(state.alloc(other), state.slices(other))
    return best_response_to_load(
        state.slices(agent),
        state.ntn,
        state.fib,
        opp_ntn,
        opp_fib,
        state.coupling_coeff,
        state.alloc(agent),
        cfg,
    )


def projected_gradient_norm(state: GameState) -> float:
    """Max-norm of the potential gradient after zeroing components blocked by the box."""
    g = potential_gradient(state)
    x = state.joint_alloc()
    g = np.where((x <= 0.0) & (g < 0.0), 0.0, g)
    g = np.where((x >= 1.0) & (g > 0.0), 0.0, g)
    return float(np.max(np.abs(g))) if g.size else 0.0


def _max_change(a: Sequence[float], b: Sequence[float]) -> float:
    return max((abs(x - y) for x, y in zip(a, b)), default=0.0)


def bri(initial: GameState, cfg: SolverConfig = SolverConfig()) -> tuple[GameState, SolveTrace]:
    """Alternating best responses until a fixed point.

    A sweep is one best response of each agent in ``cfg.order``. After each
    sweep the first agent's next best response is computed; if it moves no
    coordinate by ``cfg.tolerance`` or more, the profile is a mutual best
    response and the iteration stops (that probe becomes the next sweep's
    first half otherwise, so no work is wasted). Exhausting ``max_sweeps``
    returns ``converged=False`` rather than raising.
    """
    first, second = cfg.order
    state = initial
    trace = SolveTrace(potential_trajectory=[potential(state)])
    pending = best_response(first, state, cfg)
    while True:
        if trace.sweeps > 0 and _max_change(pending, state.alloc(first)) < cfg.tolerance:
            trace.converged = True
            break
        if trace.sweeps >= cfg.max_sweeps:
            break
        state = state.with_alloc(first, pending)
        state = state.with_alloc(second, best_response(second, state, cfg))
        trace.sweeps += 1
        trace.potential_trajectory.append(potential(state))
        pending = best_response(first, state, cfg)
    trace.final_gradient_norm = projected_gradient_norm(state)
    return state, trace


# --- diagnostics -------------------------------------------------------------


@dataclass(frozen=True)
class EquilibriumReport:
    max_unilateral_gain: float
    is_equilibrium: bool
    gain_by_agent: dict


def _deviations(current: np.ndarray, samples: int, rng: np.random.Generator):
    n = current.size
    if n == 0:
        return
    for _ in range(samples):
        yield rng.uniform(0.0, 1.0, n)
    for _ in range(samples):
        dev = current.copy()
        dev[rng.integers(n)] = rng.uniform(0.0, 1.0)
        yield dev
    for i in range(n):
        for value in (0.0, 1.0):
            dev = current.copy()
            dev[i] = value
            yield dev
        for step in (1e-2, -1e-2, 1e-3, -1e-3):
            dev = current.copy()
            dev[i] = min(1.0, max(0.0, dev[i] + step))
            yield dev


def verify_equilibrium(
    state: GameState,
    cfg: SolverConfig = SolverConfig(),
    samples: int = 200,
    seed: int = 0,
) -> EquilibriumReport:
    """Largest payoff gain any probed unilateral deviation achieves.

    Probes per agent: ``samples`` uniform random vectors, ``samples`` random
    single-coordinate moves, each coordinate at 0 and 1, and small +/- steps
    per coordinate.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    gains = {}
    for agent in (Agent.DL, Agent.UL):
        base = payoff(agent, state)
        current = np.array(state.alloc(agent), dtype=float)
        best = -math.inf
        for dev in _deviations(current, samples, rng):
            best = max(best, payoff(agent, state.with_alloc(agent, dev)) - base)
        gains[agent.value] = best if best > -math.inf else 0.0
    max_gain = max(gains.values())
    return EquilibriumReport(max_gain, max_gain <= cfg.tolerance, gains)


@dataclass(frozen=True)
class ConcavityReport:
    max_eigenvalue: float
    all_negative: bool
    max_diagonal_rel_error: float
    kappa_consistent: bool
    max_hessian_abs_error: float
    points: int
    preconditions_met: bool


def _numeric_hessian(f, x: np.ndarray, h: float) -> np.ndarray:
    n = x.size
    H = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        e_i = np.zeros(n)
        e_i[i] = h
        H[i, i] = (f(x + e_i) - 2.0 * f0 + f(x - e_i)) / (h * h)
        for j in range(i + 1, n):
            e_j = np.zeros(n)
            e_j[j] = h
            v = (f(x + e_i + e_j) - f(x + e_i - e_j) - f(x - e_i + e_j) + f(x - e_i - e_j)) / (4.0 * h * h)
            H[i, j] = H[j, i] = v
    return H


def near_kink(state: GameState, margin: float) -> bool:
    """True when a hinge (link capacity or SLA ceiling) lies within ``margin`` of the profile.

    Margins are in allocation units: a link counts as near its kink when
    its load is within ``margin`` times the total demand of its capacity
    estimate, and a slice when moving its fraction by ``margin`` could cross
    an SLA ceiling.
    """
    b = state.demands
    reach = margin * float(b.sum())
    d_ntn = 0.0
    d_fib = 0.0
    for a, spec in zip(state.dl_alloc + state.ul_alloc, state.dl_slices + state.ul_slices):
        d_ntn += a * spec.demand_estimate
        d_fib += (1.0 - a) * spec.demand_estimate
        for dim in SLA_DIMENSIONS:
            slope = state.ntn.metric(dim) - state.fib.metric(dim)
            m = state.fib.metric(dim) + a * slope
            if abs(m - spec.sla.threshold(dim)) <= margin * abs(slope):
                return True
    return abs(d_ntn - state.ntn.capacity_estimate) <= reach or abs(d_fib - state.fib.capacity_estimate) <= reach


def check_concavity(
    state: GameState,
    points: int = 50,
    fd_step: float = 1e-3,
    seed: int = 0,
    max_tries: int = 10_000,
) -> ConcavityReport:
    """Numerical Hessian eigen-check of the potential at random interior points.

    Slices and telemetry come from ``state``; only the allocations are
    resampled, uniformly in (0.05, 0.95), rejecting points within a few
    finite-difference steps of any hinge kink. At each point the report also
    compares the analytic per-slice curvature with second differences of
    ``pi_u * U_u`` and the off-diagonal block with ``-mu * kappa * b b^T``.
    A slice with zero throughput weight does not raise; it only clears
    ``preconditions_met``, since negativity is then no longer guaranteed.
    """
    if state.ntn.capacity_estimate == state.fib.capacity_estimate:
        raise DomainError("standing assumption violated: NTN and fiber capacity estimates must differ")
    specs = state.dl_slices + state.ul_slices
    preconditions = all(s.weights.throughput > 0.0 for s in specs)
    rng = np.random.default_rng(seed)
    n = len(specs)
    worst_eig = -math.inf
    worst_diag = 0.0
    worst_abs = 0.0
    kappa_ok = True
    done = 0
    tries = 0
    while done < points:
        tries += 1
        if tries > max_tries:
            raise RuntimeError(f"could not find {points} kink-free interior points in {max_tries} draws")
        x = rng.uniform(0.05, 0.95, n)
        probe = state.with_joint_alloc(x)
        if near_kink(probe, 3.0 * fd_step):
            continue
        H = _numeric_hessian(lambda z: potential(state.with_joint_alloc(z)), x, fd_step)
        H = 0.5 * (H + H.T)
        worst_eig = max(worst_eig, float(np.linalg.eigvalsh(H).max()))

        for u, spec in enumerate(specs):
            analytic = spec.priority * slice_utility_curvature(x[u], spec, state.ntn, state.fib)
            f = lambda a: spec.priority * slice_utility(a, spec, state.ntn, state.fib)
            numeric = (f(x[u] + fd_step) - 2.0 * f(x[u]) + f(x[u] - fd_step)) / fd_step**2
            denom = max(abs(analytic), 1e-12)
            worst_diag = max(worst_diag, abs(numeric - analytic) / denom)

        kappa = oversubscription_indicator(probe)
        H_exact = potential_hessian(probe)
        worst_abs = max(worst_abs, float(np.max(np.abs(H - H_exact))))
        if state.coupling_coeff > 0.0 and n > 1:
            b = probe.demands
            off = ~np.eye(n, dtype=bool)
            implied = -H[off] / (state.coupling_coeff * np.outer(b, b)[off])
            estimate = float(np.median(implied))
            nearest = min((0, 2, 4), key=lambda k: abs(k - estimate))
            kappa_ok = kappa_ok and nearest == kappa and abs(estimate - kappa) < 1e-2
        done += 1
    return ConcavityReport(
        max_eigenvalue=worst_eig,
        all_negative=worst_eig < 0.0,
        max_diagonal_rel_error=worst_diag,
        kappa_consistent=kappa_ok,
        max_hessian_abs_error=worst_abs,
        points=done,
        preconditions_met=preconditions,
    )
