import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

from steergame.game import STANDARD_CLASSES, GameState, LinkTelemetry  # noqa: E402
from steergame.presets import default_slice  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def to_oracle(state: GameState) -> dict:
    """Flatten a GameState into the plain-dict form used by tests/oracle.py."""

    def slice_dict(s):
        w = s.weights
        return {
            "priority": s.priority,
            "demand": s.demand_estimate,
            "sla": (s.sla.max_rtt, s.sla.max_jitter, s.sla.max_loss, s.sla.ceiling),
            "weights": (w.throughput, w.latency, w.reliability, w.penalty, w.severity),
        }

    return {
        "slices_dl": [slice_dict(s) for s in state.dl_slices],
        "slices_ul": [slice_dict(s) for s in state.ul_slices],
        "caps": (state.ntn.capacity_estimate, state.fib.capacity_estimate),
        "rtts": (state.ntn.rtt, state.fib.rtt),
        "jitters": (state.ntn.jitter, state.fib.jitter),
        "losses": (state.ntn.loss, state.fib.loss),
        "mu": state.coupling_coeff,
    }


fractions = st.floats(0.0, 1.0, allow_nan=False)


@st.composite
def links(draw):
    ntn = LinkTelemetry(
        rtt=draw(st.floats(20, 120)),
        jitter=draw(st.floats(0, 40)),
        loss=draw(st.floats(0, 0.1)),
        capacity_estimate=draw(st.floats(10, 150)),
    )
    fib_cap = draw(st.floats(10, 150).filter(lambda c: abs(c - ntn.capacity_estimate) > 1e-6))
    fib = LinkTelemetry(
        rtt=draw(st.floats(1, 60)),
        jitter=draw(st.floats(0, 20)),
        loss=draw(st.floats(0, 0.05)),
        capacity_estimate=fib_cap,
    )
    return ntn, fib


@st.composite
def game_states(draw, max_slices=5, mu=None):
    n = draw(st.integers(1, max_slices))
    m = draw(st.integers(1, max_slices))
    cls = st.sampled_from(STANDARD_CLASSES)
    demand = st.floats(0.5, 60)
    dl = [default_slice(draw(cls), draw(demand)) for _ in range(n)]
    ul = [default_slice(draw(cls), draw(demand)) for _ in range(m)]
    ntn, fib = draw(links())
    coupling = draw(st.floats(0, 3)) if mu is None else mu
    return GameState(
        dl,
        ul,
        [draw(fractions) for _ in range(n)],
        [draw(fractions) for _ in range(m)],
        ntn,
        fib,
        coupling,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    verdicts = getattr(module, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for number in sorted(verdicts):
            terminalreporter.write_line(verdicts[number])
