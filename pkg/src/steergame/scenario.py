"""Versioned JSON scenario files.

A scenario describes the links, the slices of both agents with their
traffic sources, the controller and the episode timing. Structure is
checked against a JSON schema (unknown keys are errors); value checks then
run through the domain constructors. Every error names the offending path,
for example ``slices.dl[2].traffic.burst_rate``.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .baselines import KINDS, BaselinePolicy
from .game import GameState, LinkTelemetry, SlaProfile, SliceSpec, UtilityWeights
from .presets import CLASS_PRIORITY, CLASS_WEIGHTS, PRIORITY_LEVELS, SLA_TABLE
from .simulator import EpisodeConfig, EwmaParams, LinkModel, TrafficProfile
from .solver import SolverConfig

__all__ = [
    "SCHEMA_VERSION",
    "SCENARIO_SCHEMA",
    "CONTROLLERS",
    "ScenarioError",
    "Scenario",
    "load_scenario",
    "parse_scenario",
    "bundled_scenarios",
    "bundled_path",
    "apply_overrides",
    "resolve_seed",
]

SCHEMA_VERSION = 1
CONTROLLERS = ("potential_game",) + KINDS
SEED_ENV = "STEERGAME_SEED"

_NUM = {"type": "number"}
_PAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}


def _obj(properties: dict, required: tuple = ()) -> dict:
    return {"type": "object", "properties": properties, "required": list(required), "additionalProperties": False}


_SLA = _obj({"max_rtt": _NUM, "max_jitter": _NUM, "max_loss": _NUM, "latency_ceiling": _NUM},
            ("max_rtt", "max_jitter", "max_loss"))
_WEIGHTS = _obj({k: _NUM for k in ("throughput", "latency", "reliability", "penalty", "severity")},
                ("throughput", "latency", "reliability", "penalty", "severity"))
_PRIORITY = {"oneOf": [{"type": "number"}, {"enum": sorted(PRIORITY_LEVELS)}]}
_TRAFFIC = _obj(
    {
        "mean_rate": _NUM,
        "burst_rate": _NUM,
        "burst_duration": _PAIR,
        "pause_duration": _PAIR,
        "rate_jitter": _NUM,
    },
    ("mean_rate", "burst_rate"),
)
_SLICE = _obj(
    {
        "class": {"type": "string"},
        "demand_prior": _NUM,
        "priority": _PRIORITY,
        "sla": _SLA,
        "weights": _WEIGHTS,
        "traffic": _TRAFFIC,
    },
    ("class", "traffic"),
)
_LINK = _obj(
    {
        "base_rtt": _NUM,
        "jitter_std": _NUM,
        "capacity": _NUM,
        "queue_sensitivity": _NUM,
        "loss_mode": {"enum": ["excess-drop"]},
        "base_loss": _NUM,
        "jitter_window": {"type": "integer"},
    },
    ("base_rtt", "jitter_std", "capacity"),
)
_SNAPSHOT_LINK = _obj({"rtt": _NUM, "jitter": _NUM, "loss": _NUM, "capacity": _NUM})

SCENARIO_SCHEMA = _obj(
    {
        "version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "seed": {"type": "integer"},
        "episode": _obj({"duration": _NUM, "tick": _NUM, "decision_interval": {"type": "integer"}}),
        "controller": _obj(
            {
                "kind": {"enum": list(CONTROLLERS)},
                "tolerance": _NUM,
                "max_sweeps": {"type": "integer"},
                "utilization_threshold": _NUM,
            }
        ),
        "coupling_coeff": _NUM,
        "estimator": _obj({"beta_capacity": _NUM, "beta_demand": _NUM, "peak_window": {"type": "integer"}}),
        "links": _obj({"ntn": _LINK, "fib": _LINK}, ("ntn", "fib")),
        "classes": {
            "type": "object",
            "additionalProperties": _obj({"priority": _PRIORITY, "sla": _SLA, "weights": _WEIGHTS}),
        },
        "slices": _obj(
            {"dl": {"type": "array", "items": _SLICE}, "ul": {"type": "array", "items": _SLICE}},
            ("dl", "ul"),
        ),
        "snapshot": _obj(
            {
                "ntn": _SNAPSHOT_LINK,
                "fib": _SNAPSHOT_LINK,
                "initial_dl": {"type": "array", "items": _NUM},
                "initial_ul": {"type": "array", "items": _NUM},
            }
        ),
    },
    ("version", "links", "slices"),
)


class ScenarioError(ValueError):
    """Invalid scenario document; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path or '<root>'}: {message}")


def _format_path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


class _At:
    """Re-raise value errors from domain constructors with a document path."""

    def __init__(self, path: str):
        self.path = path

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and issubclass(exc_type, ValueError) and not isinstance(exc, ScenarioError):
            raise ScenarioError(self.path, str(exc)) from exc
        return False


@dataclass(frozen=True)
class Scenario:
    """A validated scenario document plus the objects built from it."""

    name: str
    document: dict
    seed: int | None
    ntn: LinkModel
    fib: LinkModel
    slices_dl: tuple[tuple[SliceSpec, TrafficProfile], ...]
    slices_ul: tuple[tuple[SliceSpec, TrafficProfile], ...]
    controller: str
    solver: SolverConfig
    utilization_threshold: float
    coupling_coeff: float
    estimator: EwmaParams
    duration: float
    tick: float
    decision_interval: int

    def episode_config(self, seed: int, controller: str | None = None) -> EpisodeConfig:
        """EpisodeConfig for one run; ``controller`` overrides the scenario's."""
        kind = controller or self.controller
        if kind not in CONTROLLERS:
            raise ScenarioError("controller.kind", f"unknown controller {kind!r}; expected one of {CONTROLLERS}")
        if kind == "potential_game":
            ctrl: SolverConfig | BaselinePolicy = self.solver
        else:
            ctrl = BaselinePolicy(kind, seed=seed, utilization_threshold=self.utilization_threshold)
        with _At("links"):
            return EpisodeConfig(
                slices_dl=self.slices_dl,
                slices_ul=self.slices_ul,
                ntn=self.ntn,
                fib=self.fib,
                controller=ctrl,
                coupling_coeff=self.coupling_coeff,
                duration=self.duration,
                tick=self.tick,
                decision_interval=self.decision_interval,
                seed=seed,
                estimator=self.estimator,
            )

    @property
    def slices(self) -> tuple[SliceSpec, ...]:
        return tuple(s for s, _ in self.slices_dl) + tuple(s for s, _ in self.slices_ul)

    def snapshot_state(self) -> GameState:
        """Static game built from the scenario: demand priors and fixed telemetry.

        Link telemetry defaults to each link's idle figures (base RTT, jitter
        spread, base loss, configured capacity); the ``snapshot`` section
        overrides any of them.
        """
        snap = self.document.get("snapshot", {})

        def telemetry(key: str, model: LinkModel) -> LinkTelemetry:
            over = snap.get(key, {})
            with _At(f"snapshot.{key}"):
                return LinkTelemetry(
                    rtt=over.get("rtt", model.base_rtt),
                    jitter=over.get("jitter", model.jitter_std),
                    loss=over.get("loss", model.base_loss),
                    capacity_estimate=over.get("capacity", model.capacity),
                )

        dl = [s for s, _ in self.slices_dl]
        ul = [s for s, _ in self.slices_ul]
        with _At("snapshot"):
            return GameState(
                dl_slices=dl,
                ul_slices=ul,
                dl_alloc=snap.get("initial_dl", [0.0] * len(dl)),
                ul_alloc=snap.get("initial_ul", [0.0] * len(ul)),
                ntn=telemetry("ntn", self.ntn),
                fib=telemetry("fib", self.fib),
                coupling_coeff=self.coupling_coeff,
            )


def _priority(value, path: str) -> float:
    if isinstance(value, str):
        return PRIORITY_LEVELS[value]
    if not value > 0:
        raise ScenarioError(path, "priority must be > 0")
    return float(value)


def _class_defaults(doc: dict) -> dict[str, dict]:
    presets = {
        cls: {"priority": PRIORITY_LEVELS[CLASS_PRIORITY[cls]], "sla": SLA_TABLE[cls], "weights": CLASS_WEIGHTS[cls]}
        for cls in SLA_TABLE
    }
    for cls, body in doc.get("classes", {}).items():
        path = f"classes.{cls}"
        base = dict(presets.get(cls, {}))
        if "priority" in body:
            base["priority"] = _priority(body["priority"], f"{path}.priority")
        if "sla" in body:
            with _At(f"{path}.sla"):
                base["sla"] = SlaProfile(**body["sla"])
        if "weights" in body:
            with _At(f"{path}.weights"):
                base["weights"] = UtilityWeights(**body["weights"])
        missing = [k for k in ("priority", "sla", "weights") if k not in base]
        if missing:
            raise ScenarioError(path, f"new class needs {', '.join(missing)}")
        presets[cls] = base
    return presets


def _slice(entry: dict, path: str, classes: dict) -> tuple[SliceSpec, TrafficProfile]:
    cls = entry["class"]
    if cls not in classes:
        raise ScenarioError(f"{path}.class", f"unknown class {cls!r}; declare it under 'classes'")
    base = classes[cls]
    t = entry["traffic"]
    with _At(f"{path}.traffic"):
        profile = TrafficProfile(
            mean_rate=t["mean_rate"],
            burst_rate=t["burst_rate"],
            burst_duration_range=tuple(t.get("burst_duration", (0.0, 0.0))),
            pause_duration_range=tuple(t.get("pause_duration", (1.0, 1.0))),
            rate_jitter=t.get("rate_jitter", 0.0),
        )
    priority = _priority(entry["priority"], f"{path}.priority") if "priority" in entry else base["priority"]
    with _At(f"{path}.sla"):
        sla = SlaProfile(**entry["sla"]) if "sla" in entry else base["sla"]
    with _At(f"{path}.weights"):
        weights = UtilityWeights(**entry["weights"]) if "weights" in entry else base["weights"]
    prior = entry.get("demand_prior", max(profile.mean_rate, 0.1))
    with _At(f"{path}.demand_prior"):
        spec = SliceSpec(cls, priority, sla, weights, prior)
    return spec, profile


def _link(body: dict, path: str) -> LinkModel:
    with _At(path):
        return LinkModel(**body)


def parse_scenario(doc: Any) -> Scenario:
    """Validate a decoded document and build the scenario objects."""
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = errors[0]
        raise ScenarioError(_format_path(err.absolute_path), err.message)
    classes = _class_defaults(doc)
    links = doc["links"]
    ntn = _link(links["ntn"], "links.ntn")
    fib = _link(links["fib"], "links.fib")
    dl = tuple(_slice(e, f"slices.dl[{i}]", classes) for i, e in enumerate(doc["slices"]["dl"]))
    ul = tuple(_slice(e, f"slices.ul[{i}]", classes) for i, e in enumerate(doc["slices"]["ul"]))
    if not dl and not ul:
        raise ScenarioError("slices", "at least one slice is required")
    ctrl = doc.get("controller", {})
    with _At("controller"):
        solver = SolverConfig(tolerance=ctrl.get("tolerance", 1e-4), max_sweeps=ctrl.get("max_sweeps", 50))
    with _At("estimator"):
        estimator = EwmaParams(**doc.get("estimator", {}))
    episode = doc.get("episode", {})
    scenario = Scenario(
        name=doc.get("name", "unnamed"),
        document=copy.deepcopy(doc),
        seed=doc.get("seed"),
        ntn=ntn,
        fib=fib,
        slices_dl=dl,
        slices_ul=ul,
        controller=ctrl.get("kind", "potential_game"),
        solver=solver,
        utilization_threshold=ctrl.get("utilization_threshold", 0.9),
        coupling_coeff=doc.get("coupling_coeff", 1.0),
        estimator=estimator,
        duration=episode.get("duration", 300.0),
        tick=episode.get("tick", 0.1),
        decision_interval=episode.get("decision_interval", 10),
    )
    if scenario.coupling_coeff < 0:
        raise ScenarioError("coupling_coeff", "must be >= 0")
    if not 0.0 < scenario.utilization_threshold <= 1.0:
        raise ScenarioError("controller.utilization_threshold", "must lie in (0, 1]")
    # surface timing and standing-assumption problems at load time
    scenario.episode_config(seed=0)
    return scenario


def load_scenario(path: str | os.PathLike, overrides: dict[str, Any] | None = None) -> Scenario:
    """Read, override and validate a scenario file."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError("", f"cannot read {p}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("", f"{p} is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}") from exc
    if overrides:
        doc = apply_overrides(doc, overrides)
    return parse_scenario(doc)


def apply_overrides(doc: dict, overrides: dict[str, Any]) -> dict:
    """Return a copy of ``doc`` with dotted paths replaced, e.g. ``links.ntn.capacity``.

    Integer path components index into lists: ``slices.dl.0.demand_prior``.
    """
    out = copy.deepcopy(doc)
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        node = out
        for i, part in enumerate(parts[:-1]):
            key: Any = int(part) if isinstance(node, list) else part
            try:
                node = node[key]
            except (KeyError, IndexError, TypeError):
                if isinstance(node, dict):
                    node[key] = {}
                    node = node[key]
                else:
                    raise ScenarioError(".".join(parts[: i + 1]), "override path does not exist") from None
        last = parts[-1]
        if isinstance(node, list):
            try:
                node[int(last)] = value
            except (ValueError, IndexError):
                raise ScenarioError(dotted, "override path does not exist") from None
        else:
            node[last] = value
    return out


def bundled_scenarios() -> list[str]:
    files = resources.files("steergame").joinpath("scenarios").iterdir()
    return sorted(f.name[: -len(".json")] for f in files if f.name.endswith(".json"))


def bundled_path(name: str) -> Path:
    """Path of a bundled scenario such as ``congestion``."""
    path = Path(str(resources.files("steergame").joinpath("scenarios").joinpath(f"{name}.json")))
    if not path.is_file():
        raise ScenarioError("", f"no bundled scenario {name!r}; available: {', '.join(bundled_scenarios())}")
    return path


def resolve_seed(explicit: int | None, scenario: Scenario | None = None) -> int:
    """Seed precedence: explicit flag, then STEERGAME_SEED, then the scenario, then 0."""
    if explicit is not None:
        return int(explicit)
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise ScenarioError(SEED_ENV, f"not an integer: {env!r}") from None
    if scenario is not None and scenario.seed is not None:
        return scenario.seed
    return 0
