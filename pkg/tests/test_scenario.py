import json

import pytest

from steergame.game import V2X
from steergame.presets import SLA_TABLE
from steergame.scenario import (
    ScenarioError,
    apply_overrides,
    bundled_path,
    bundled_scenarios,
    load_scenario,
    parse_scenario,
    resolve_seed,
)


def minimal():
    return {
        "version": 1,
        "links": {
            "ntn": {"base_rtt": 55, "jitter_std": 8, "capacity": 60},
            "fib": {"base_rtt": 10, "jitter_std": 1, "capacity": 100},
        },
        "slices": {"dl": [{"class": "V2X", "traffic": {"mean_rate": 4, "burst_rate": 8}}], "ul": []},
    }


def test_bundled_scenarios_load():
    names = bundled_scenarios()
    assert {"default", "congestion", "symmetric_lossless"} <= set(names)
    for name in names:
        sc = load_scenario(bundled_path(name))
        assert sc.slices
        if sc.controller == "potential_game":
            sc.snapshot_state()


def test_symmetric_scenario_is_baseline_only():
    sc = load_scenario(bundled_path("symmetric_lossless"))
    assert sc.controller == "equal_split"
    with pytest.raises(ScenarioError, match="standing assumption"):
        sc.episode_config(seed=0, controller="potential_game")


def test_minimal_document_defaults():
    sc = parse_scenario(minimal())
    assert sc.controller == "potential_game"
    assert (sc.duration, sc.tick, sc.decision_interval) == (300.0, 0.1, 10)
    spec, profile = sc.slices_dl[0]
    assert spec.sla == SLA_TABLE[V2X]
    assert spec.demand_estimate == 4.0
    assert profile.burst_rate == 8


def test_unknown_field_is_rejected_with_path():
    doc = minimal()
    doc["slices"]["dl"][0]["traffic"]["burst_ratee"] = 3
    with pytest.raises(ScenarioError) as info:
        parse_scenario(doc)
    assert info.value.path == "slices.dl[0].traffic"
    assert "burst_ratee" in str(info.value)


@pytest.mark.parametrize(
    "mutate, path",
    [
        (lambda d: d["links"]["ntn"].update(capacity=-1), "links.ntn"),
        (lambda d: d["slices"]["dl"][0]["traffic"].update(mean_rate=-2), "slices.dl[0].traffic"),
        (lambda d: d["slices"]["dl"][0].update({"class": "Gaming"}), "slices.dl[0].class"),
        (lambda d: d.update(version=2), "version"),
        (lambda d: d.update(coupling_coeff=-1), "coupling_coeff"),
        (lambda d: d["links"]["fib"].update(capacity=60), "links"),
    ],
)
def test_invalid_values_name_their_path(mutate, path):
    doc = minimal()
    mutate(doc)
    with pytest.raises(ScenarioError) as info:
        parse_scenario(doc)
    assert info.value.path == path


def test_equal_capacities_fail_the_standing_assumption():
    doc = minimal()
    doc["links"]["fib"]["capacity"] = 60
    with pytest.raises(ScenarioError, match="standing assumption"):
        parse_scenario(doc)
    doc["controller"] = {"kind": "equal_split"}
    parse_scenario(doc)


def test_custom_class_needs_full_definition():
    doc = minimal()
    doc["slices"]["dl"][0]["class"] = "Gaming"
    doc["classes"] = {"Gaming": {"priority": "high"}}
    with pytest.raises(ScenarioError) as info:
        parse_scenario(doc)
    assert info.value.path == "classes.Gaming"
    doc["classes"]["Gaming"].update(
        sla={"max_rtt": 40, "max_jitter": 10, "max_loss": 0.01},
        weights={"throughput": 1, "latency": 2, "reliability": 1, "penalty": 2, "severity": 3},
    )
    sc = parse_scenario(doc)
    assert sc.slices[0].slice_class == "Gaming" and sc.slices[0].sla.max_rtt == 40


def test_overrides():
    doc = minimal()
    out = apply_overrides(doc, {"links.ntn.capacity": 80, "slices.dl.0.demand_prior": 3, "episode.duration": 5})
    assert out["links"]["ntn"]["capacity"] == 80
    assert out["slices"]["dl"][0]["demand_prior"] == 3
    assert out["episode"] == {"duration": 5}
    assert doc["links"]["ntn"]["capacity"] == 60
    with pytest.raises(ScenarioError):
        apply_overrides(doc, {"slices.dl.4.demand_prior": 1})


def test_load_reports_bad_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{ nope")
    with pytest.raises(ScenarioError, match="not valid JSON"):
        load_scenario(p)
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario(tmp_path / "missing.json")


def test_load_roundtrip(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps(minimal()))
    assert load_scenario(p, {"seed": 9}).seed == 9


def test_seed_precedence(monkeypatch):
    doc = minimal()
    doc["seed"] = 5
    sc = parse_scenario(doc)
    monkeypatch.delenv("STEERGAME_SEED", raising=False)
    assert resolve_seed(None, sc) == 5
    assert resolve_seed(None) == 0
    monkeypatch.setenv("STEERGAME_SEED", "7")
    assert resolve_seed(None, sc) == 7
    assert resolve_seed(3, sc) == 3
    monkeypatch.setenv("STEERGAME_SEED", "x")
    with pytest.raises(ScenarioError):
        resolve_seed(None, sc)


def test_snapshot_overrides_telemetry():
    doc = minimal()
    doc["snapshot"] = {"ntn": {"loss": 0.02}, "initial_dl": [0.3]}
    state = parse_scenario(doc).snapshot_state()
    assert state.ntn.loss == 0.02 and state.ntn.rtt == 55
    assert tuple(state.dl_alloc) == (0.3,)


def test_unknown_bundled_name():
    with pytest.raises(ScenarioError, match="available"):
        bundled_path("nope")
