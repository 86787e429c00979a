import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import game_states
from steergame.baselines import BaselinePolicy
from steergame.game import EMERGENCY, IOT, V2X, VIDEO, Agent, GameState, LinkTelemetry, potential
from steergame.presets import default_slice
from steergame.solver import SolverConfig, best_response_to_load
from steergame.game import agent_link_demands
from steergame.simulator import (
    ConfigError,
    EpisodeConfig,
    Estimates,
    EwmaParams,
    LinkModel,
    Observation,
    RxCounters,
    TelemetrySample,
    TrafficProfile,
    account_sla,
    generate_offered_load,
    observe_local,
    run_episode,
    step_links,
    stream,
    update_estimates,
)

NTN = LinkModel(base_rtt=55.0, jitter_std=8.0, capacity=60.0)
FIB = LinkModel(base_rtt=10.0, jitter_std=1.0, capacity=100.0)


def steady(rate):
    return TrafficProfile(mean_rate=rate, burst_rate=rate)


def episode(dl, ul, controller=SolverConfig(), duration=20.0, seed=0, ntn=NTN, fib=FIB, **kw):
    return EpisodeConfig(dl, ul, ntn, fib, controller=controller, duration=duration, seed=seed, **kw)


# --- traffic ----------------------------------------------------------------------------


def test_pause_without_jitter_emits_mean_rate():
    profile = TrafficProfile(mean_rate=7.0, burst_rate=20.0, burst_duration_range=(1, 2), pause_duration_range=(5, 5))
    rates = generate_offered_load(profile, 50, 0.1, stream(0, "t"))
    assert np.all(rates[:49] == 7.0)


def test_degenerate_burst_range_never_bursts():
    profile = TrafficProfile(mean_rate=3.0, burst_rate=50.0, burst_duration_range=(0, 0), pause_duration_range=(0.5, 2))
    rates = generate_offered_load(profile, 2000, 0.1, stream(1, "t"))
    assert np.all(rates == 3.0)


@pytest.mark.parametrize("seed", range(3))
def test_long_run_average_between_mean_and_burst(seed):
    profile = TrafficProfile(4.0, 12.0, (1.0, 5.0), (2.0, 8.0), rate_jitter=0.3)
    rates = generate_offered_load(profile, 100_000, 0.1, stream(seed, "long"))
    assert 4.0 <= rates.mean() <= 12.0
    assert rates.min() >= 4.0 * 0.7 and rates.max() <= 12.0 * 1.3


def test_traffic_profile_validation():
    with pytest.raises(ConfigError):
        TrafficProfile(-1, 1)
    with pytest.raises(ConfigError):
        TrafficProfile(1, 1, burst_duration_range=(3, 1))
    with pytest.raises(ConfigError):
        TrafficProfile(1, 1, rate_jitter=1.0)


def test_streams_are_independent_and_reproducible():
    a = stream(5, "traffic/DL/0/V2X").uniform(size=4)
    assert np.array_equal(a, stream(5, "traffic/DL/0/V2X").uniform(size=4))
    assert not np.array_equal(a, stream(5, "traffic/DL/1/V2X").uniform(size=4))
    assert not np.array_equal(a, stream(6, "traffic/DL/0/V2X").uniform(size=4))


# --- links ------------------------------------------------------------------------------


def test_idle_link():
    quiet = LinkModel(base_rtt=20.0, jitter_std=0.0, capacity=50.0)
    ntn, fib = step_links(0.0, 0.0, (quiet, quiet), (stream(0, "a"), stream(0, "b")))
    assert ntn.rtt == 20.0 and ntn.loss == 0.0 and ntn.rx_throughput == 0.0


def test_double_load_halves_delivery():
    ntn, fib = step_links(120.0, 200.0, (NTN, FIB), (stream(0, "a"), stream(0, "b")))
    assert ntn.loss == 0.5 and fib.loss == 0.5
    assert ntn.rx_throughput == 60.0 and fib.rx_throughput == 100.0


def test_base_loss_compounds_with_excess_drop():
    lossy = LinkModel(base_rtt=55.0, jitter_std=0.0, capacity=60.0, base_loss=0.02)
    ntn, _ = step_links(30.0, 0.0, (lossy, FIB), (stream(0, "a"), stream(0, "b")))
    assert ntn.loss == pytest.approx(0.02)
    ntn, _ = step_links(120.0, 0.0, (lossy, FIB), (stream(0, "a"), stream(0, "b")))
    assert ntn.loss == pytest.approx(1 - 0.98 * 0.5)


def test_half_load_rtt_mean_is_base():
    rng = stream(3, "rtt")
    hist = deque(maxlen=10)
    samples = [step_links(30.0, 50.0, (NTN, FIB), (rng, stream(0, "x")), (hist, deque(maxlen=10)))[0].rtt
               for _ in range(10_000)]
    mean = float(np.mean(samples))
    assert abs(mean - 55.0) < 3 * 8.0 / math.sqrt(10_000)


def test_queueing_ramp():
    quiet = LinkModel(base_rtt=10.0, jitter_std=0.0, capacity=100.0, queue_sensitivity=200.0)
    rngs = (stream(0, "a"), stream(0, "b"))
    assert step_links(90.0, 0.0, (quiet, quiet), rngs)[0].rtt == pytest.approx(10 + 50 * 0.1)
    assert step_links(150.0, 0.0, (quiet, quiet), rngs)[0].rtt == pytest.approx(10 + 200 * 0.5 + 50 * 0.7)


def test_jitter_is_windowed_std():
    rng = stream(9, "j")
    hist = deque(maxlen=10)
    for _ in range(25):
        ntn, _ = step_links(10.0, 10.0, (NTN, FIB), (rng, stream(0, "f")), (hist, deque(maxlen=10)))
    assert ntn.jitter == pytest.approx(float(np.std(list(hist))))


def test_link_model_validation():
    with pytest.raises(ConfigError):
        LinkModel(10, 1, 0)
    with pytest.raises(ConfigError):
        LinkModel(10, 1, 10, loss_mode="tail-drop")
    with pytest.raises(ValueError):
        step_links(-1.0, 0.0, (NTN, FIB), (stream(0, "a"), stream(0, "b")))


# --- observation and estimation ------------------------------------------------------------


def test_rx_counters_reveal_opposing_delivered_load():
    loss = 0.1
    before = RxCounters(100.0, 50.0)
    # the UL agent sent 30 Mbps over NTN and 5 over fiber for 2 s
    now = RxCounters(100.0 + 30.0 * (1 - loss) * 2.0, 50.0 + 5.0 * 2.0)
    link = LinkTelemetry(55, 8, loss, 60)
    obs = observe_local(Agent.DL, link, LinkTelemetry(10, 1, 0, 100), now, before, 2.0)
    assert obs.opposing_ntn == pytest.approx(27.0)
    assert obs.opposing_fib == pytest.approx(5.0)
    idle = observe_local("DL", link, link, before, before, 1.0)
    assert (idle.opposing_ntn, idle.opposing_fib) == (0.0, 0.0)
    with pytest.raises(ValueError):
        observe_local(Agent.DL, link, link, before, now, 1.0)


def test_observation_exposes_only_aggregates():
    assert set(Observation.__dataclass_fields__) == {"agent", "ntn", "fib", "opposing_ntn", "opposing_fib"}


def test_full_replacement_of_capacity_on_saturation():
    prev = Estimates(100.0, 60.0, (10.0,))
    sat = LinkTelemetry(10, 1, 0.05, 100, rx_throughput=95.0, tx_throughput=100.0)
    idle = LinkTelemetry(55, 8, 0.0, 60, rx_throughput=20.0, tx_throughput=20.0)
    est = update_estimates(prev, idle, sat, [10.0], (0.0, 0.0), EwmaParams(beta_capacity=1.0))
    assert est.capacity_fib == 95.0
    assert est.capacity_ntn == 100.0  # not saturated: prior kept


def test_never_saturated_link_holds_prior():
    est = Estimates(60.0, 100.0, (5.0,))
    light = LinkTelemetry(10, 1, 0.0, 100, rx_throughput=20.0, tx_throughput=20.0)
    for _ in range(200):
        est = update_estimates(est, light, light, [5.0], (0.0, 0.0), EwmaParams())
    assert (est.capacity_ntn, est.capacity_fib) == (60.0, 100.0)


@given(st.floats(0.5, 100), st.floats(0.05, 1.0))
def test_demand_converges_geometrically(rate, beta):
    params = EwmaParams(beta_demand=beta)
    est = Estimates(60.0, 100.0, (1.0,))
    link = LinkTelemetry(10, 1, 0.0, 100)
    for _ in range(math.ceil(5 / beta)):
        est = update_estimates(est, link, link, [rate], (0.0, 0.0), params)
    assert abs(est.demand[0] - rate) <= 0.01 * max(rate, abs(1.0 - rate)) + 1e-12


def test_estimates_stay_positive():
    est = Estimates(0.2, 0.2, (0.2,))
    dead = LinkTelemetry(10, 1, 1.0, 0.2, rx_throughput=0.0, tx_throughput=5.0)
    for _ in range(50):
        est = update_estimates(est, dead, dead, [0.0], (0.0, 0.0), EwmaParams(1.0, 1.0))
    assert min(est.capacity_ntn, est.capacity_fib, *est.demand) >= 0.1


def test_ewma_params_validation():
    with pytest.raises(ConfigError):
        EwmaParams(beta_capacity=0.0)
    with pytest.raises(ConfigError):
        EwmaParams(peak_window=0)


# --- SLA accounting --------------------------------------------------------------------------


def _sample(rtt, jitter, loss):
    link = LinkTelemetry(10, 1, 0, 100)
    return TelemetrySample(0.0, 0, link, link, (1.0,), (1.0,), (rtt,), (jitter,), (loss,), (0.0,), (), 0.0)


def test_account_sla_flags():
    v2x = [default_slice(V2X)]
    assert account_sla(_sample(70.0, 1.0, 0.0), v2x) == (True,)
    assert account_sla(_sample(30.0, 1.0, 0.0), v2x) == (False,)
    assert account_sla(_sample(30.0, 16.0, 0.0), v2x) == (True,)
    assert account_sla(_sample(30.0, 1.0, 0.006), v2x) == (True,)


# --- episodes ----------------------------------------------------------------------------------


def test_config_validation():
    pairs = [(default_slice(V2X, 5.0), steady(5.0))]
    with pytest.raises(ConfigError):
        episode(pairs, pairs, duration=0)
    with pytest.raises(ConfigError, match="standing assumption"):
        episode(pairs, pairs, fib=LinkModel(10.0, 1.0, 60.0))
    with pytest.raises(ConfigError):
        episode([], [])
    # baselines do not need distinct capacities
    episode(pairs, pairs, controller=BaselinePolicy("equal_split"), fib=LinkModel(10.0, 1.0, 60.0))


def test_episode_is_deterministic():
    pairs = [(default_slice(V2X, 6.0), TrafficProfile(4.0, 8.0, (1, 3), (2, 5), 0.1)),
             (default_slice(IOT, 10.0), TrafficProfile(6.0, 12.0, (1, 3), (2, 5), 0.1))]
    cfg = episode(pairs, pairs, duration=30.0, seed=11)
    assert run_episode(cfg) == run_episode(cfg)
    other = run_episode(episode(pairs, pairs, duration=30.0, seed=12))
    assert run_episode(cfg) != other


def test_adding_a_slice_does_not_perturb_other_streams():
    base = [(default_slice(V2X, 6.0), TrafficProfile(4.0, 8.0, (1, 3), (2, 5), 0.2))]
    extra = base + [(default_slice(IOT, 6.0), TrafficProfile(4.0, 8.0, (1, 3), (2, 5), 0.2))]
    ctrl = BaselinePolicy("equal_split")
    a = run_episode(episode(base, [], controller=ctrl, seed=3))
    b = run_episode(episode(extra, [], controller=ctrl, seed=3))
    assert [s.offered[0] for s in a] == [s.offered[0] for s in b]


def test_idle_episode():
    pairs = [(default_slice(c, 1.0), steady(0.0)) for c in (V2X, EMERGENCY, VIDEO, IOT)]
    samples = run_episode(episode(pairs, pairs, duration=10.0))
    assert all(sum(s.delivered) == 0.0 and sum(s.offered) == 0.0 for s in samples)
    from steergame.metrics import aggregate_report

    report = aggregate_report(samples, [p[0] for p in pairs + pairs])
    assert report.loss_pct is None and report.throughput == 0.0
    assert all(v == 0.0 for v in report.per_slice_violation_rates.values())


def test_single_v2x_slice_stays_on_uncongested_fiber():
    samples = run_episode(episode([(default_slice(V2X, 5.0), steady(5.0))], [], duration=60.0))
    # after the first observed interval the game keeps the slice on fiber
    later = [s.dl_alloc[0] for s in samples if s.time >= 1.0]
    assert max(later) < 1e-3


def test_samples_are_consistent():
    pairs = [(default_slice(V2X, 8.0), TrafficProfile(5, 8, (1, 3), (2, 4), 0.1)),
             (default_slice(VIDEO, 40.0), TrafficProfile(30, 40, (1, 3), (2, 4), 0.1))]
    samples = run_episode(episode(pairs, pairs, duration=30.0, seed=4))
    times = [s.time for s in samples]
    assert times == sorted(times) and len(set(times)) == len(times)
    for s in samples:
        for off, got in zip(s.offered, s.delivered):
            assert got <= off + 1e-12
        for j, a in enumerate(s.alloc):
            assert s.blended_rtt[j] == pytest.approx(a * s.ntn.rtt + (1 - a) * s.fib.rtt)
            assert s.blended_loss[j] == pytest.approx(a * s.ntn.loss + (1 - a) * s.fib.loss)
        if s.ntn.tx_throughput <= NTN.capacity and s.fib.tx_throughput <= FIB.capacity:
            assert sum(s.delivered) == pytest.approx(sum(s.offered))


def test_decisions_alternate_between_agents():
    pairs = [(default_slice(V2X, 5.0), steady(5.0))]
    log = []
    run_episode(episode(pairs, pairs, duration=5.0), log)
    agents = [a for _, a, _ in log]
    assert agents[:4] == ["DL", "UL", "DL", "UL"]
    assert log[0][0] == pytest.approx(1.0) and log[1][0] == pytest.approx(1.5)


@given(game_states(max_slices=4))
@settings(max_examples=40)
def test_decision_never_lowers_frozen_potential(state):
    for agent in (Agent.DL, Agent.UL):
        opp_ntn, opp_fib = agent_link_demands(state.alloc(agent.other), state.slices(agent.other))
        new = best_response_to_load(
            state.slices(agent), state.ntn, state.fib, opp_ntn, opp_fib,
            state.coupling_coeff, state.alloc(agent), SolverConfig(),
        )
        assert potential(state.with_alloc(agent, new)) >= potential(state) - 1e-9
