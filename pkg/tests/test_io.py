import json
import math
from pathlib import Path

import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from hardynls.errors import ConfigurationError, DataAvailabilityError, IntegratorFailure
from hardynls.io import persist
from hardynls.io.cache import read_groundstate, read_groundstate_text, write_groundstate, write_groundstate_from
from hardynls.io.config import parse_config, validate
from hardynls.io.runner import run, verify_manifest

CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.yaml"))

MODEL = {"d": 3, "c": "3/16", "alpha": "4/3"}
SMALL_GRID = {"N": 512, "Rmax": 20, "grading": 1.02}


def doc(task, **blocks):
    return {"task": task, "model": dict(MODEL), "grid": dict(SMALL_GRID), **blocks}


# -- persistence ---------------------------------------------------------------------------


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips_exactly(x):
    assert float(persist.fmt(x)) == x


def test_fmt_nonfinite():
    assert [persist.fmt(v) for v in (math.nan, math.inf, -math.inf)] == ["nan", "inf", "-inf"]


def test_csv_uses_lf_and_seventeen_digits(tmp_path):
    path = persist.write_csv(tmp_path / "x.csv", ["a", "b"], [(1.0, 1 / 3), (2.0, math.nan)])
    raw = path.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    assert raw.splitlines()[1] == b"1.0000000000000000e+00,3.3333333333333331e-01"
    header, data = persist.read_csv(path)
    assert header == ["a", "b"] and data[0, 1] == 1 / 3 and math.isnan(data[1, 1])


def test_json_sorted_and_nan_is_null():
    text = persist.dumps({"b": np.float64(math.nan), "a": [np.int64(1), (np.bool_(True), math.inf)]})
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [1, [True, None]], "b": None}


# -- ground-state cache ----------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_gs():
    from hardynls.groundstate import maximize_weinstein
    from hardynls.radial import ModelParams, make_grid

    return maximize_weinstein(ModelParams(3, 3 / 16, 4 / 3), make_grid(512, 20.0, 1.02))


def test_cache_round_trip_is_byte_exact(tmp_path, small_gs):
    a = write_groundstate_from(tmp_path / "a.cache", small_gs)
    head, Q, p = read_groundstate(a)
    assert p == small_gs.params and head["omega"] == small_gs.omega
    assert np.array_equal(Q.values, small_gs.Q.values)
    assert np.array_equal(np.asarray(Q.grid.r), np.asarray(small_gs.Q.grid.r))
    extra = {k: head[k] for k in ("M", "energy", "e1", "e2", "e3", "residual")}
    extra["method"] = head["method"]
    b = write_groundstate(tmp_path / "b.cache", Q, p, head["omega"], extra)
    assert a.read_bytes() == b.read_bytes()
    ha, ra, qa = read_groundstate_text(a)
    hb, rb, qb = read_groundstate_text(b)
    assert (ha, ra, qa) == (hb, rb, qb)


def test_cache_errors(tmp_path, small_gs):
    with pytest.raises(DataAvailabilityError):
        read_groundstate(tmp_path / "missing.cache")
    (tmp_path / "junk.cache").write_text("r,Q\n1,2\n")
    with pytest.raises(DataAvailabilityError):
        read_groundstate(tmp_path / "junk.cache")
    path = write_groundstate_from(tmp_path / "t.cache", small_gs)
    lines = path.read_text().split("\n")
    (tmp_path / "short.cache").write_text("\n".join(lines[:-5]) + "\n")
    with pytest.raises(DataAvailabilityError):
        read_groundstate(tmp_path / "short.cache")
    with pytest.raises(DataAvailabilityError):
        write_groundstate(tmp_path / "c.cache", 1j * small_gs.Q, small_gs.params, 1.0)


# -- configuration ---------------------------------------------------------------------------


def test_hardy_threshold_rejected():
    d = doc("groundstate")
    d["model"]["c"] = 0.25
    with pytest.raises(ConfigurationError) as exc:
        validate(d)
    assert "c < lambda(3) = 0.25" in exc.value.violations[0]


def test_energy_critical_power_bound_named():
    d = doc("groundstate", groundstate={"omega": 1.0})
    d["model"]["alpha"] = 5
    with pytest.raises(ConfigurationError) as exc:
        validate(d)
    assert any("alpha <= 4/(d-2)" in v for v in exc.value.violations)


def test_stability_requires_subcritical_power():
    with pytest.raises(ConfigurationError) as exc:
        validate(doc("stability", stability={"M": 1.0}))
    assert "stability driver requires alpha < 4/d" in exc.value.violations[0]


def test_instability_requires_critical_power():
    d = doc("instability-I", instability={"n_values": [1]})
    d["model"]["alpha"] = 1
    with pytest.raises(ConfigurationError):
        validate(d)


def test_all_violations_listed():
    d = {"task": "groundstate", "model": {"d": 3, "c": 0.5, "alpha": 5}, "grid": {"N": 8, "Rmax": -1}}
    with pytest.raises(ConfigurationError) as exc:
        validate(d)
    v = exc.value.violations
    assert len(v) == 4
    assert any("/grid/N" in s for s in v) and any("/grid/Rmax" in s for s in v)
    assert any("lambda(3)" in s for s in v) and any("4/(d-2)" in s for s in v)


def test_physics_parameters_have_no_defaults():
    with pytest.raises(ConfigurationError):
        validate({"task": "groundstate", "model": {"d": 3, "c": 0.1}, "grid": SMALL_GRID})
    d = doc("groundstate")
    d["model"]["alpha"] = 1
    with pytest.raises(ConfigurationError) as exc:
        validate(d)
    assert "mass M" in exc.value.violations[0]
    with pytest.raises(ConfigurationError):
        validate(doc("stability", stability={}))


def test_minimal_config_defaults_filled():
    cfg = validate(doc("groundstate"))
    assert cfg.block == {"method": "auto", "cert_tol": 1e-4, "flow": {}}
    assert cfg.params.c == 3 / 16 and cfg.params.alpha == 4 / 3
    assert cfg.resolved["seed"] == 0 and cfg.resolved["model"]["c"] == 3 / 16
    assert cfg.echo()["as_written"] == doc("groundstate")


def test_unknown_keys_warn_or_fail():
    d = doc("groundstate", groundstate={"omega": 1.0, "colour": "blue"})
    assert validate(d).warnings == ("/groundstate/colour",)
    with pytest.raises(ConfigurationError) as exc:
        validate(d, strict=True)
    assert "colour" in exc.value.violations[0]


def test_task_mismatch_and_missing_task():
    with pytest.raises(ConfigurationError):
        validate(doc("groundstate"), task="evolve")
    d = doc("groundstate")
    del d["task"]
    with pytest.raises(ConfigurationError):
        validate(d)
    assert validate(d, task="groundstate").task == "groundstate"


def test_referenced_cache_must_exist(tmp_path):
    d = doc("instability-I", instability={"n_values": [1], "ground_state_cache": "nowhere.cache"})
    with pytest.raises(ConfigurationError) as exc:
        validate(d, base=tmp_path)
    assert "nowhere.cache" in exc.value.violations[0]


def test_yaml_and_json_documents(tmp_path):
    d = doc("groundstate")
    (tmp_path / "a.yaml").write_text(yaml.safe_dump(d))
    (tmp_path / "a.json").write_text(json.dumps(d))
    a, b = parse_config(tmp_path / "a.yaml"), parse_config(tmp_path / "a.json")
    assert a.resolved == b.resolved and a.source.endswith("a.yaml")
    (tmp_path / "bad.yaml").write_text("model: [1,\n")
    with pytest.raises(ConfigurationError):
        parse_config(tmp_path / "bad.yaml")
    with pytest.raises(ConfigurationError):
        parse_config(tmp_path / "absent.yaml")


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_shipped_configs_are_strictly_valid(path):
    cfg = parse_config(path, strict=True)
    assert cfg.warnings == ()


# -- runner ------------------------------------------------------------------------------------


def load(path):
    return json.loads(Path(path).read_text())


def test_groundstate_run_artifacts(tmp_path):
    cfg = validate(doc("groundstate"))
    assert run(cfg, tmp_path) == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["groundstate.cache", "manifest.json", "pohozaev.json"]
    man = load(tmp_path / "manifest.json")
    assert man["status"] == "ok" and man["exit_code"] == 0
    assert man["config"]["as_written"] == doc("groundstate")
    assert set(man["files"]) == {"groundstate.cache", "pohozaev.json"}
    assert man["grid_audit"]["hardy_slack"] is not None
    assert verify_manifest(tmp_path)
    rep = load(tmp_path / "pohozaev.json")
    head, Q, _ = read_groundstate(tmp_path / "groundstate.cache")
    assert rep["omega"] == man["summary"]["omega"] == head["omega"]
    assert Q.grid.N == 512


def test_manifest_detects_tampering(tmp_path):
    run(validate(doc("groundstate")), tmp_path)
    (tmp_path / "pohozaev.json").write_text("{}\n")
    assert not verify_manifest(tmp_path)


def test_repeated_runs_are_byte_identical(tmp_path):
    d = doc("evolve", evolve={"initial": {"kind": "hardy-gaussian"}, "t_end": 0.2, "record_every": 5})
    for sub in ("a", "b"):
        assert run(validate(d), tmp_path / sub) == 0
    for name in ("series.csv", "outcome.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ma, mb = load(tmp_path / "a" / "manifest.json"), load(tmp_path / "b" / "manifest.json")
    ma.pop("wall_clock_seconds"), mb.pop("wall_clock_seconds")
    assert ma == mb


def test_evolve_blowup_outputs(tmp_path):
    d = doc("evolve", evolve={"initial": {"kind": "groundstate", "mu": 1.2}, "t_end": 5.0, "record_every": 5})
    assert run(validate(d), tmp_path) == 0
    out = load(tmp_path / "outcome.json")["outcome"]
    assert out["kind"] == "BlowUp"
    lo, hi = out["T_bracket"]
    assert lo == out["t_final"] < hi < 5.0
    header, data = persist.read_csv(tmp_path / "series.csv")
    assert header[:9] == ["t", "mass", "kinetic", "hardy_term", "energy", "l_alpha2", "xu_sq", "v_phiR", "dt"]
    # the series ends at the last resolved step, well before t_end
    assert data[-1, 0] == out["t_final"]
    assert np.all(np.isfinite(data[:, 2]))


def test_failure_writes_error_record(tmp_path):
    d = doc("evolve", evolve={"initial": {"kind": "gaussian", "amplitude": 1.2}, "dt0": 0.05,
                              "adaptive": False, "energy_budget": 1e-14})
    code = run(validate(d), tmp_path)
    assert code == IntegratorFailure.exit_code
    err = load(tmp_path / "error.json")
    assert err["exit_code"] == code and err["error"]
    man = load(tmp_path / "manifest.json")
    assert man["status"] == "error" and man["summary"] is None
    assert "series.csv" in man["files"] and verify_manifest(tmp_path)
    _, data = persist.read_csv(tmp_path / "series.csv")
    assert len(data) >= 1
