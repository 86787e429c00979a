"""SLA-aware traffic steering over a fiber + satellite backhaul as a two-agent potential game.

The downlink and uplink agents each choose, per traffic slice, the share
sent over the satellite (NTN) path. Their payoffs share a congestion term,
which makes the game an exact potential game: alternating best responses
climb a single potential and stop at a pure Nash equilibrium.

Modules:

- ``game``: domain types, utilities, payoffs, the potential and its derivatives
- ``solver``: exact best responses, best-response iteration, equilibrium checks
- ``baselines``: comparison steering policies
- ``simulator``: discrete-time two-link simulator with decentralized agents
- ``metrics``: episode reports (effective RTT, loss, fairness, SLA violations)
- ``scenario``: versioned JSON scenario files
- ``cli``: the ``steergame`` command
"""

from .game import (
    Agent,
    ContractError,
    DomainError,
    GameState,
    LinkTelemetry,
    SlaProfile,
    SliceSpec,
    StandingAssumptionError,
    UtilityWeights,
    payoff,
    potential,
    potential_gradient,
    potential_hessian,
)
from .presets import default_slice
from .solver import SolverConfig, best_response, bri, check_concavity, verify_equilibrium

__version__ = "0.1.0"

__all__ = [
    "Agent",
    "ContractError",
    "DomainError",
    "GameState",
    "LinkTelemetry",
    "SlaProfile",
    "SliceSpec",
    "StandingAssumptionError",
    "UtilityWeights",
    "payoff",
    "potential",
    "potential_gradient",
    "potential_hessian",
    "default_slice",
    "SolverConfig",
    "best_response",
    "bri",
    "check_concavity",
    "verify_equilibrium",
]
