"""A five-minute congested episode, game controller against the baselines.

The bundled ``congestion`` scenario offers more traffic than fiber can carry.
Each controller sees the same traffic (same seed); the table shows what
that does to the network and to each slice class.

Run with ``python demos/02_congestion_episode.py [seed]``.
"""

import sys

from steergame.metrics import aggregate_report
from steergame.scenario import CONTROLLERS, bundled_path, load_scenario
from steergame.simulator import run_episode

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
scenario = load_scenario(bundled_path("congestion"))
print(f"scenario {scenario.name}, seed {seed}, {scenario.duration:g} s\n")

reports = {}
for name in CONTROLLERS:
    samples = run_episode(scenario.episode_config(seed, name))
    reports[name] = aggregate_report(samples, scenario.slices, name, seed)

classes = list(reports["potential_game"].per_slice_violation_rates)
print(f"{'controller':<16}{'RTT ms':>8}{'loss %':>8}{'Mbps':>8}{'Jain':>7}   " + "  ".join(f"{c[:9]:>9}" for c in classes))
for name, r in reports.items():
    rates = "  ".join(f"{r.per_slice_violation_rates[c]:>9.2f}" for c in classes)
    print(f"{name:<16}{r.effective_rtt:>8.2f}{r.loss_pct:>8.3f}{r.throughput:>8.1f}{r.fairness:>7.3f}   {rates}")

print("\nviolation columns are percent of one-second decision intervals out of SLA")
game = reports["potential_game"].potential_stats
print(f"potential over the episode: mean {game['mean']:.2f}, min {game['min']:.2f}, {game['drop_count']} sharp drops")
