import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracle
from steergame.game import EMERGENCY, IOT, V2X, VIDEO, LinkTelemetry
from steergame.metrics import (
    UndefinedMetricError,
    aggregate_report,
    effective_rtt,
    interval_summaries,
    jain_fairness,
    link_utilizations,
    loss_percent,
    mean_throughput,
    potential_stats,
    violation_rates,
)
from steergame.presets import default_slice
from steergame.scenario import bundled_path, load_scenario
from steergame.simulator import TelemetrySample, run_episode


def sample(ntn_rx, fib_rx, ntn_rtt=60.0, fib_rtt=10.0, offered=(1.0,), delivered=(1.0,), rtt=(30.0,),
           interval=0, time=0.0, potential=0.0):
    ntn = LinkTelemetry(ntn_rtt, 1.0, 0.0, 60.0, rx_throughput=ntn_rx, tx_throughput=ntn_rx)
    fib = LinkTelemetry(fib_rtt, 1.0, 0.0, 100.0, rx_throughput=fib_rx, tx_throughput=fib_rx)
    n = len(offered)
    return TelemetrySample(time, interval, ntn, fib, offered, delivered, rtt, (1.0,) * n, (0.0,) * n,
                           (0.0,) * n, (), potential)


def test_effective_rtt_volume_weighting():
    assert effective_rtt([sample(25.0, 75.0)]) == pytest.approx(22.5)
    with pytest.raises(UndefinedMetricError):
        effective_rtt([sample(0.0, 0.0)])


def test_jain_values():
    assert jain_fairness([0.5, 0.5]) == 1.0
    assert jain_fairness([0.9, 0.3]) == 0.8
    assert jain_fairness([0.7, 0.0]) == 0.5
    with pytest.raises(UndefinedMetricError):
        jain_fairness([0.0, 0.0])
    with pytest.raises(ValueError):
        jain_fairness([-0.1, 0.2])


@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=8).filter(lambda xs: sum(xs) > 1e-6), st.floats(1e-3, 1e3))
def test_jain_bounds_scale_invariance_and_oracle(xs, c):
    j = jain_fairness(xs)
    assert 1.0 / len(xs) - 1e-12 <= j <= 1.0 + 1e-12
    assert jain_fairness([c * x for x in xs]) == pytest.approx(j, rel=1e-9)
    assert j == pytest.approx(oracle.jain(xs), rel=1e-12)


def test_loss_and_throughput():
    s = [sample(10, 10, offered=(10.0, 10.0), delivered=(9.0, 10.0), rtt=(1.0, 1.0))] * 4
    assert loss_percent(s) == pytest.approx(5.0)
    assert mean_throughput(s) == pytest.approx(19.0)
    with pytest.raises(UndefinedMetricError):
        loss_percent([sample(0, 0, offered=(0.0,), delivered=(0.0,))])


def test_link_utilizations():
    assert link_utilizations([sample(30.0, 50.0), sample(0.0, 100.0)]) == pytest.approx((0.25, 0.75))


def test_violation_rates_include_all_standard_classes():
    slices = [default_slice(V2X)]
    # ten intervals, one with blended RTT 70 (over 60)
    samples = [sample(1, 1, rtt=(70.0 if k == 3 else 30.0,), interval=k, time=k) for k in range(10)]
    rates = violation_rates(samples, slices)
    assert rates[V2X] == pytest.approx(10.0)
    assert rates[VIDEO] == 0.0 and rates[IOT] == 0.0


def test_three_of_three_hundred_intervals_is_one_percent():
    slices = [default_slice(EMERGENCY)]
    samples = [sample(1, 1, rtt=(80.0 if k in (5, 100, 250) else 20.0,), interval=k, time=k) for k in range(300)]
    assert violation_rates(samples, slices)[EMERGENCY] == pytest.approx(1.0)


def test_violations_use_interval_means():
    slices = [default_slice(V2X)]
    # one spike tick inside an interval whose mean stays under 60
    samples = [sample(1, 1, rtt=(100.0 if t == 0 else 50.0,), interval=0, time=t / 10) for t in range(10)]
    assert violation_rates(samples, slices)[V2X] == 0.0


def test_potential_drop_count():
    values = [1.0, 1.1, 0.9, 1.0, 1.05, 0.95, 1.0, 1.0, 1.02, 0.98, -5.0, 1.0]
    samples = [sample(1, 1, interval=k, time=k, potential=v) for k, v in enumerate(values)]
    stats = potential_stats(samples)
    assert stats["drop_count"] == 1 and stats["min"] == -5.0
    nan_only = potential_stats([sample(1, 1, potential=math.nan)])
    assert nan_only == {"mean": None, "min": None, "drop_count": 0}


@pytest.fixture(scope="module")
def default_run():
    sc = load_scenario(bundled_path("default"), {"episode.duration": 30})
    samples = run_episode(sc.episode_config(seed=2))
    return sc, samples


def test_report_is_reproducible_from_persisted_samples(default_run):
    sc, samples = default_run
    live = aggregate_report(samples, sc.slices, "potential_game", 2)
    replay = aggregate_report(list(samples), sc.slices, "potential_game", 2)
    assert json.dumps(live.to_dict()) == json.dumps(replay.to_dict())
    assert live.intervals == len(interval_summaries(samples))


def test_loosened_thresholds_never_raise_violations(default_run):
    sc, samples = default_run
    tight = violation_rates(samples, sc.slices)
    loose_slices = []
    for s in sc.slices:
        sla = type(s.sla)(s.sla.max_rtt * 1.5, s.sla.max_jitter * 1.5, min(1.0, s.sla.max_loss * 1.5))
        loose_slices.append(type(s)(s.slice_class, s.priority, sla, s.weights, s.demand_estimate))
    loose = violation_rates(samples, loose_slices)
    assert all(loose[c] <= tight[c] for c in tight)
