"""Where alternating best responses struggle: a binding coupling ridge.

When the summed demand pins fiber at its capacity, the shared
oversubscription penalty has a curvature of order mu * demand^2 across
the ridge, while the utilities are almost flat along it. Each best
response therefore moves only a hair (here about 7e-5), the default stop
rule (max change below 1e-4) fires, and the result is an
epsilon-equilibrium well short of the joint maximizer. Tightening the
tolerance shows the iteration is right, just slow: it creeps along the
ridge and reaches the grid maximizer after many thousands of sweeps.

Run with ``python demos/03_stiff_coupling.py`` (about 20 s).
"""

import numpy as np

from steergame.game import Agent, agent_link_demands, potential
from steergame.solver import SolverConfig, best_response, bri
from steergame.verify import grid_maximize, random_instance

state = random_instance(np.random.default_rng([0, 7]), 2, 2)
print("NTN cap", round(state.ntn.capacity_estimate, 2), " fiber cap", round(state.fib.capacity_estimate, 2))
print("total demand", round(sum(s.demand_estimate for s in state.dl_slices + state.ul_slices), 2))

arg, best = grid_maximize(state, resolution=100)
print("grid maximizer (1e-2 cells)", np.round(arg, 3), " potential", round(best, 4))

eq, trace = bri(state)
fib_load = sum(agent_link_demands(eq.alloc(a), eq.slices(a))[1] for a in (Agent.DL, Agent.UL))
print(f"\ndefault settings: {trace.sweeps} sweep(s), converged={trace.converged}")
print("  profile", np.round(eq.joint_alloc(), 4), " potential", round(potential(eq), 4), " fiber load", round(fib_load, 4))
print("  next DL best response moves its first slice to", f"{best_response(Agent.DL, eq)[0]:.1e}")

for tol, budget in ((1e-9, 2000), (1e-12, 20000)):
    eq, trace = bri(state, SolverConfig(tolerance=tol, max_sweeps=budget))
    print(f"\ntolerance {tol:g}: {trace.sweeps} sweeps, converged={trace.converged}")
    print("  profile", np.round(eq.joint_alloc(), 4), " potential", round(potential(eq), 4))
