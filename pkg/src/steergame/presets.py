"""Built-in traffic-class presets.

SLA ceilings per class are the transport-layer limits used throughout the
package (loss as a fraction). Numeric priorities and utility weights are
declared defaults; override them per slice in a scenario file.
"""

from __future__ import annotations

from .game import (
    BEST_EFFORT,
    EMERGENCY,
    IOT,
    V2X,
    VIDEO,
    SlaProfile,
    SliceSpec,
    UtilityWeights,
)

PRIORITY_LEVELS = {"high": 1.0, "medium": 0.6, "low": 0.3}

SLA_TABLE = {
    V2X: SlaProfile(max_rtt=60.0, max_jitter=15.0, max_loss=0.005),
    EMERGENCY: SlaProfile(max_rtt=70.0, max_jitter=20.0, max_loss=0.005),
    VIDEO: SlaProfile(max_rtt=200.0, max_jitter=80.0, max_loss=0.03),
    IOT: SlaProfile(max_rtt=500.0, max_jitter=150.0, max_loss=0.10),
    BEST_EFFORT: SlaProfile(max_rtt=800.0, max_jitter=100.0, max_loss=0.05),
}

CLASS_PRIORITY = {
    V2X: "high",
    EMERGENCY: "high",
    VIDEO: "medium",
    IOT: "low",
    BEST_EFFORT: "low",
}

_CRITICAL = UtilityWeights(throughput=0.5, latency=2.0, reliability=1.0, penalty=2.0, severity=4.0)
_VIDEO = UtilityWeights(throughput=1.0, latency=1.0, reliability=1.0, penalty=1.5, severity=2.0)
_TOLERANT = UtilityWeights(throughput=1.0, latency=0.25, reliability=0.5, penalty=1.0, severity=1.0)

CLASS_WEIGHTS = {
    V2X: _CRITICAL,
    EMERGENCY: _CRITICAL,
    VIDEO: _VIDEO,
    IOT: _TOLERANT,
    BEST_EFFORT: _TOLERANT,
}


def default_slice(slice_class: str, demand_estimate: float = 10.0) -> SliceSpec:
    """SliceSpec for a built-in class with its default priority and weights."""
    return SliceSpec(
        slice_class=slice_class,
        priority=PRIORITY_LEVELS[CLASS_PRIORITY[slice_class]],
        sla=SLA_TABLE[slice_class],
        weights=CLASS_WEIGHTS[slice_class],
        demand_estimate=demand_estimate,
    )
