"""Two agents, a handful of slices: solve the steering game and check the result.

Run with ``python demos/01_equilibrium.py``.
"""

import numpy as np

from steergame import presets
from steergame.game import EMERGENCY, IOT, V2X, VIDEO, Agent, GameState, LinkTelemetry, payoff, potential
from steergame.solver import bri, check_concavity, verify_equilibrium

ntn = LinkTelemetry(rtt=55.0, jitter=8.0, loss=0.01, capacity_estimate=60.0)
fib = LinkTelemetry(rtt=10.0, jitter=1.0, loss=0.0, capacity_estimate=100.0)

# downlink carries a heavy video flow; uplink is mostly sensor traffic
dl = [presets.default_slice(V2X, 8.0), presets.default_slice(VIDEO, 70.0), presets.default_slice(IOT, 20.0)]
ul = [presets.default_slice(EMERGENCY, 5.0), presets.default_slice(IOT, 30.0)]
start = GameState(dl, ul, [0.0] * 3, [0.0] * 2, ntn, fib, coupling_coeff=1.0)

print("all traffic on fiber: potential", round(potential(start), 3))
eq, trace = bri(start)
print(f"best-response iteration: {trace.sweeps} sweeps, converged={trace.converged}")
print("potential per sweep:", np.round(trace.potential_trajectory, 3))
print("DL NTN fractions:", np.round(eq.dl_alloc, 4), " UL:", np.round(eq.ul_alloc, 4))

# the critical slices stay on fiber, bulk traffic spills onto the satellite path
report = verify_equilibrium(eq)
print("largest unilateral gain found:", f"{report.max_unilateral_gain:.2e}", "equilibrium:", report.is_equilibrium)

# nudging the video slice by hand only hurts the downlink agent
nudged = eq.with_alloc(Agent.DL, np.array(eq.dl_alloc) + np.array([0.0, -0.2, 0.0]))
print("DL payoff at equilibrium", round(payoff(Agent.DL, eq), 4), "after nudge", round(payoff(Agent.DL, nudged), 4))

conc = check_concavity(eq, points=20)
print(f"Hessian max eigenvalue over 20 points: {conc.max_eigenvalue:.3e} (all negative: {conc.all_negative})")
