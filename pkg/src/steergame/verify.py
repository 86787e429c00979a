"""Numerical property suite for the game and its solver.

Each check draws seeded random instances, tests one mathematical property
and returns a ``PropertyResult``. On failure the result names the instance
seed that reproduces it. ``run_suite`` bundles the checks for the CLI.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .game import (
    STANDARD_CLASSES,
    Agent,
    GameState,
    LinkTelemetry,
    payoff,
    potential,
    potential_gradient,
    slice_utility,
)
from .presets import default_slice
from .solver import SolverConfig, bri, check_concavity, near_kink

__all__ = [
    "PropertyResult",
    "random_instance",
    "grid_maximize",
    "check_exact_potential",
    "check_gradient",
    "check_concavity_points",
    "check_ascent",
    "check_grid_oracle",
    "MUTATIONS",
    "run_suite",
]


@dataclass(frozen=True)
class PropertyResult:
    """Outcome of one check. A failure names the first instance that
    reproduces it: ``numpy.random.default_rng([seed, failing_instance])``
    regenerates it."""

    name: str
    passed: bool
    detail: str
    seed: int = 0
    failing_instance: int | None = None
    elapsed: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = ""
        if self.failing_instance is not None:
            extra = f" (reproduce: seed {self.seed}, instance {self.failing_instance})"
        return f"{status} {self.name}: {self.detail}{extra} [{self.elapsed:.2f}s]"


def random_instance(
    rng: np.random.Generator,
    n_dl: int = 5,
    n_ul: int = 5,
    coupling_coeff: float = 1.0,
    demand_range: tuple[float, float] = (2.0, 40.0),
) -> GameState:
    """Random game with default class presets and a random profile.

    Classes are drawn uniformly from the five standard classes. The NTN
    path is slower and lossier than fiber; capacity ranges overlap, so
    either link may be the larger one.
    """
    dl = [default_slice(STANDARD_CLASSES[rng.integers(5)], rng.uniform(*demand_range)) for _ in range(n_dl)]
    ul = [default_slice(STANDARD_CLASSES[rng.integers(5)], rng.uniform(*demand_range)) for _ in range(n_ul)]
    ntn = LinkTelemetry(
        rtt=rng.uniform(40, 70),
        jitter=rng.uniform(2, 20),
        loss=rng.uniform(0, 0.03),
        capacity_estimate=rng.uniform(30, 80),
    )
    fib = LinkTelemetry(
        rtt=rng.uniform(5, 30),
        jitter=rng.uniform(0.5, 5),
        loss=rng.uniform(0, 0.01),
        capacity_estimate=rng.uniform(60, 120),
    )
    return GameState(dl, ul, rng.uniform(0, 1, n_dl), rng.uniform(0, 1, n_ul), ntn, fib, coupling_coeff)


def grid_maximize(state: GameState, resolution: int = 100) -> tuple[np.ndarray, float]:
    """Exhaustive maximization of the potential on a regular grid over the joint box.

    Separable utilities are tabulated once per slice; the coupling term is
    evaluated on the full grid one slab of the first coordinate at a time.
    Cost grows as (resolution+1)^(N+M); intended for N+M <= 4.
    """
    g = np.linspace(0.0, 1.0, resolution + 1)
    specs = state.dl_slices + state.ul_slices
    n = len(specs)
    if n == 0:
        return np.empty(0), potential(state)
    tables = [np.array([s.priority * slice_utility(a, s, state.ntn, state.fib) for a in g]) for s in specs]
    b = [s.demand_estimate for s in specs]
    total = math.fsum(b)
    mu = state.coupling_coeff
    cn, cf = state.ntn.capacity_estimate, state.fib.capacity_estimate

    rest_shape = (len(g),) * (n - 1)
    rest_util = np.zeros(rest_shape)
    rest_ntn = np.zeros(rest_shape)
    for k in range(1, n):
        shape = [1] * (n - 1)
        shape[k - 1] = len(g)
        rest_util = rest_util + tables[k].reshape(shape)
        rest_ntn = rest_ntn + (b[k] * g).reshape(shape)

    best = -math.inf
    arg = None
    for i, a0 in enumerate(g):
        d_ntn = rest_ntn + b[0] * a0
        d_fib = total - d_ntn
        phi = tables[0][i] + rest_util - mu * (np.maximum(0.0, d_ntn - cn) ** 2 + np.maximum(0.0, d_fib - cf) ** 2)
        k = int(np.argmax(phi))
        if phi.flat[k] > best:
            best = float(phi.flat[k])
            arg = (a0,) + tuple(g[j] for j in np.unravel_index(k, rest_shape)) if n > 1 else (a0,)
    return np.array(arg), best


def _timed(name: str, seed: int, fn: Callable[[], tuple[bool, str, int | None]]) -> PropertyResult:
    start = time.perf_counter()
    passed, detail, instance = fn()
    return PropertyResult(name, passed, detail, seed, instance, time.perf_counter() - start)


def check_exact_potential(pairs: int = 1000, seed: int = 0, tol: float = 1e-9) -> PropertyResult:
    """Unilateral deviations change the deviator's payoff and the potential equally."""

    def run():
        worst = 0.0
        first_bad = None
        for k in range(pairs):
            rng = np.random.default_rng([seed, k])
            state = random_instance(rng, int(rng.integers(1, 6)), int(rng.integers(1, 6)))
            for agent in (Agent.DL, Agent.UL):
                dev = state.with_alloc(agent, rng.uniform(0, 1, len(state.slices(agent))))
                gap = abs((payoff(agent, dev) - payoff(agent, state)) - (potential(dev) - potential(state)))
                worst = max(worst, gap)
                if gap >= tol and first_bad is None:
                    first_bad = k
        ok = first_bad is None
        return ok, f"max |dJ - dPhi| = {worst:.3e} over {pairs} pairs per agent (< {tol:g})", first_bad

    return _timed("exact-potential", seed, run)


def check_gradient(
    points: int = 200,
    seed: int = 0,
    h: float = 1e-6,
    rtol: float = 1e-5,
    gradient: Callable[[GameState], np.ndarray] = potential_gradient,
) -> PropertyResult:
    """Analytic gradient against central differences at kink-free interior points.

    The error is measured in the max norm relative to the finite-difference
    gradient's max norm (floored at 1).
    """

    def run():
        worst = 0.0
        first_bad = None
        done = 0
        k = 0
        while done < points:
            rng = np.random.default_rng([seed, k])
            k += 1
            state = random_instance(rng)
            x = rng.uniform(0.02, 0.98, len(state.dl_slices) + len(state.ul_slices))
            state = state.with_joint_alloc(x)
            if near_kink(state, 1e-4):
                continue
            fd = np.empty_like(x)
            for i in range(x.size):
                e = np.zeros_like(x)
                e[i] = h
                fd[i] = (potential(state.with_joint_alloc(x + e)) - potential(state.with_joint_alloc(x - e))) / (2 * h)
            err = float(np.max(np.abs(np.asarray(gradient(state)) - fd))) / max(1.0, float(np.max(np.abs(fd))))
            worst = max(worst, err)
            if err >= rtol and first_bad is None:
                first_bad = k - 1
            done += 1
        ok = first_bad is None
        return ok, f"max relative error {worst:.3e} at {points} points (< {rtol:g})", first_bad

    return _timed("gradient-fd", seed, run)


def check_concavity_points(points: int = 50, seed: int = 0) -> PropertyResult:
    """Largest eigenvalue of the numerical Hessian is negative at random interior points."""

    def run():
        worst = -math.inf
        first_bad = None
        diag_ok = True
        kappa_ok = True
        for k in range(points):
            rng = np.random.default_rng([seed, k])
            state = random_instance(rng)
            report = check_concavity(state, points=1, seed=k)
            diag = report.max_diagonal_rel_error < 1e-3
            diag_ok &= diag
            kappa_ok &= report.kappa_consistent
            worst = max(worst, report.max_eigenvalue)
            if first_bad is None and not (report.max_eigenvalue < 0.0 and diag and report.kappa_consistent):
                first_bad = k
        ok = first_bad is None
        detail = f"max eigenvalue {worst:.3e} over {points} points; diagonal check {'ok' if diag_ok else 'FAILED'}; kappa {'ok' if kappa_ok else 'FAILED'}"
        return ok, detail, first_bad

    return _timed("concavity", seed, run)


def check_ascent(instances: int = 100, seed: int = 0, slack: float = 1e-9) -> PropertyResult:
    """Best-response iteration never decreases the potential."""

    def run():
        worst = 0.0
        first_bad = None
        for k in range(instances):
            rng = np.random.default_rng([seed, k])
            _, trace = bri(random_instance(rng))
            drops = np.diff(trace.potential_trajectory)
            drop = float(-drops.min()) if drops.size else 0.0
            worst = max(worst, drop)
            if drop > slack and first_bad is None:
                first_bad = k
        ok = first_bad is None
        return ok, f"largest potential decrease {worst:.3e} over {instances} runs (<= {slack:g})", first_bad

    return _timed("potential-ascent", seed, run)


def check_grid_oracle(
    instances: int = 25,
    seed: int = 0,
    resolution: int = 100,
    cfg: SolverConfig = SolverConfig(),
) -> PropertyResult:
    """BRI's fixed point matches the grid maximizer of the potential for N = M = 2.

    Agreement means every coordinate lies within one grid cell.
    """
    cell = 1.0 / resolution

    def run():
        mismatches = []
        notes = []
        for k in range(instances):
            rng = np.random.default_rng([seed, k])
            state = random_instance(rng, 2, 2)
            eq, trace = bri(state, cfg)
            arg, grid_best = grid_maximize(state, resolution)
            dist = float(np.max(np.abs(eq.joint_alloc() - arg)))
            if dist > cell + 1e-9:
                mismatches.append(k)
                # positive gap: the grid point beats BRI's profile
                notes.append(
                    f"#{k}: dist {dist:.3f}, Phi(grid)-Phi(BRI) {grid_best - potential(eq):+.2e}, "
                    f"sweeps {trace.sweeps}, converged {trace.converged}"
                )
        ok = not mismatches
        detail = f"{instances - len(mismatches)}/{instances} instances within one cell"
        if notes:
            detail += "; mismatches: " + "; ".join(notes)
        return ok, detail, mismatches[0] if mismatches else None

    return _timed("grid-oracle", seed, run)


MUTATIONS: dict[str, Callable[[GameState], np.ndarray]] = {
    "gradient-sign": lambda state: -potential_gradient(state),
}


def run_suite(level: str = "fast", mutation: str | None = None, seed: int = 0) -> list[PropertyResult]:
    """Run the property checks; ``full`` adds the grid oracle.

    ``mutation`` swaps in a deliberately broken component (see ``MUTATIONS``)
    as a negative control: the matching check must then fail.
    """
    if level not in ("fast", "full"):
        raise ValueError("level must be 'fast' or 'full'")
    if mutation is not None and mutation not in MUTATIONS:
        raise ValueError(f"unknown mutation {mutation!r}; expected one of {sorted(MUTATIONS)}")
    gradient = MUTATIONS[mutation] if mutation else potential_gradient
    results = [
        check_exact_potential(seed=seed),
        check_gradient(seed=seed, gradient=gradient),
        check_concavity_points(seed=seed),
        check_ascent(instances=40, seed=seed),
    ]
    if level == "full":
        results.append(check_grid_oracle(seed=seed))
    return results


def summarize(results: Sequence[PropertyResult]) -> str:
    return "\n".join(r.line() for r in results)
