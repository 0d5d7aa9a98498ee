"""Tests for scenario configs, verification, file output, and the CLI."""

import json
import math
import os

import numpy as np
import pytest
from click.testing import CliRunner

from infolab import harness
from infolab.cli import main as cli_main
from infolab.predictors import ConjugateLinReg, Omniscient
from infolab.processes import BinaryARK, LinRep, LinReg, Transformer
from infolab.rng import RngStream, SeedSpec


def _tiny_config(seed=11, replicates=16):
    return harness.parse_config(
        {
            "version": 1,
            "scenario_id": "tiny",
            "process": {"kind": "linreg", "d": 2, "noise_var": 0.25},
            "predictor": {"kind": "conjugate"},
            "horizons": [3, 6],
            "replicates": replicates,
            "master_seed": seed,
            "bounds": ["linreg_error"],
        }
    )


# ---------------------------------------------------------------------------
# config parsing and validation
# ---------------------------------------------------------------------------


def test_unknown_config_key_named_in_error():
    payload = {
        "version": 1,
        "scenario_id": "x",
        "process": {"kind": "logreg", "d": 2},
        "predictor": {"kind": "omniscient"},
        "horizons": [2, 4],
        "replicates": 4,
        "master_seed": 0,
        "bogus_key": 1,
    }
    with pytest.raises(ValueError, match="bogus_key"):
        harness.parse_config(payload)


def test_unknown_process_and_predictor_keys_rejected():
    with pytest.raises(ValueError, match="typo_field"):
        harness.parse_process({"kind": "linreg", "d": 3, "noise_var": 1.0, "typo_field": 2})
    with pytest.raises(ValueError, match="oops"):
        harness.parse_predictor({"kind": "ensemble", "oops": 1}, LinReg(d=2, noise_var=1.0))


def test_version_required_and_checked():
    payload = {
        "scenario_id": "x",
        "process": {"kind": "logreg", "d": 2},
        "predictor": {"kind": "omniscient"},
        "horizons": [2],
        "replicates": 4,
        "master_seed": 0,
    }
    with pytest.raises(ValueError, match="version"):
        harness.parse_config(payload)
    payload["version"] = 99
    with pytest.raises(ValueError, match="version"):
        harness.parse_config(payload)


def test_scenario_config_invariants():
    with pytest.raises(ValueError, match="replicates"):
        harness.ScenarioConfig(
            "x", LinReg(d=2, noise_var=1.0), Omniscient(), [2, 4], 1, 0
        )
    with pytest.raises(ValueError, match="horizons"):
        harness.ScenarioConfig(
            "x", LinReg(d=2, noise_var=1.0), Omniscient(), [4, 4], 4, 0
        )


def test_parse_process_kinds_and_defaults():
    ark = harness.parse_process({"kind": "ark", "d": 2, "context": 2})
    assert isinstance(ark, BinaryARK)
    assert np.array_equal(ark.phi0, [1.0, 0.0]) and np.array_equal(ark.phi1, [0.0, 1.0])
    tf = harness.parse_process(
        {"kind": "transformer", "vocab": 3, "attn_dim": 4, "depth": 2, "context": 3}
    )
    assert isinstance(tf, Transformer) and tf.embeddings.shape == (3, 4)
    lr = harness.parse_process({"kind": "linrep", "d": 6, "r": 2, "tasks": 4})
    assert isinstance(lr, LinRep)
    with pytest.raises(ValueError, match="kind"):
        harness.parse_process({"kind": "made_up"})


def test_parse_predictor_compatibility():
    with pytest.raises(ValueError, match="linreg"):
        harness.parse_predictor(
            {"kind": "conjugate"}, harness.parse_process({"kind": "logreg", "d": 2})
        )
    pred = harness.parse_predictor({"kind": "conjugate"}, LinReg(d=3, noise_var=0.5))
    assert isinstance(pred, ConjugateLinReg)
    assert pred.prior_cov[0, 0] == pytest.approx(1.0 / 3.0)


def test_bounds_for_incompatible_id():
    with pytest.raises(ValueError, match="bound_id"):
        harness.bounds_for(LinReg(d=2, noise_var=1.0), "logreg_error", 10)
    reps = harness.bounds_for(LinReg(d=5, noise_var=0.25), "linreg_error", 100)
    assert {r.side for r in reps} == {"upper", "lower"}


# ---------------------------------------------------------------------------
# execution and determinism
# ---------------------------------------------------------------------------


def test_run_replicates_thread_invariant():
    spec = LinReg(d=2, noise_var=0.25)
    kind = harness.parse_predictor({"kind": "conjugate"}, spec)
    stream = RngStream(SeedSpec(3, (("scenario", 0),)))
    seq = harness.run_replicates(spec, kind, 6, 8, stream, threads=1)
    par = harness.run_replicates(spec, kind, 6, 8, stream, threads=4)
    for a, b in zip(seq, par):
        assert np.array_equal(a.losses, b.losses)


def test_scenario_outputs_deterministic_and_atomic(tmp_path):
    cfg = _tiny_config()
    texts = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        result = harness.run_scenario(cfg)
        paths = harness.write_scenario_outputs(result, str(out), "csv")
        assert sorted(os.path.basename(p) for p in paths) == [
            "tiny_bounds.csv",
            "tiny_curve.csv",
            "tiny_verification.csv",
        ]
        assert not [f for f in os.listdir(out) if f.endswith(".tmp")]
        texts.append({os.path.basename(p): open(p).read() for p in paths})
    assert texts[0] == texts[1]
    curve = texts[0]["tiny_curve.csv"]
    # floats carry 17 significant digits
    cell = curve.splitlines()[1].split(",")[2]
    assert len(cell.replace("-", "").replace(".", "").replace("e", "").lstrip("0")) >= 15


def test_scenario_json_output(tmp_path):
    result = harness.run_scenario(_tiny_config())
    (path,) = harness.write_scenario_outputs(result, str(tmp_path), "json")
    payload = json.loads(open(path).read())
    assert payload["version"] == harness.CONFIG_VERSION
    assert payload["curve"]["horizons"] == [3, 6]
    assert all(row["passed"] in (True, False) for row in payload["verification"])
    with pytest.raises(ValueError, match="format"):
        harness.write_scenario_outputs(result, str(tmp_path), "xml")


def test_manifest_loading(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"scenarios": []}))
    with pytest.raises(ValueError, match="version"):
        harness.load_manifest(str(bad))
    odd = tmp_path / "odd.json"
    odd.write_text(json.dumps({"version": 1, "scenarios": [], "extra": 2}))
    with pytest.raises(ValueError, match="extra"):
        harness.load_manifest(str(odd))
    good = tmp_path / "good.json"
    good.write_text(
        json.dumps(
            {
                "version": 1,
                "scenarios": [
                    {
                        "version": 1,
                        "scenario_id": "s1",
                        "process": {"kind": "logreg", "d": 2},
                        "predictor": {"kind": "ensemble", "size": 64},
                        "horizons": [4],
                        "replicates": 4,
                        "master_seed": 5,
                    }
                ],
            }
        )
    )
    configs = harness.load_manifest(str(good))
    assert len(configs) == 1 and configs[0].scenario_id == "s1"
    builtins = harness.load_manifest("desk_suite")
    assert [c.scenario_id for c in builtins] == harness.DESK_SUITE


def test_sweep_scaling_validation_and_shape():
    with pytest.raises(ValueError, match="decades"):
        harness.sweep_scaling(4, 4.0, 1e6, 1e8, 5)
    with pytest.raises(ValueError, match="grid points"):
        harness.sweep_scaling(4, 4.0, 1e6, 1e10, 2)
    sweep = harness.sweep_scaling(4, 4.0, 1e6, 1e10, 9)
    assert np.all(np.diff(sweep.n_star) > 0)
    assert len(sweep.c_values) == 9
    assert 0.3 < sweep.slope < 0.6
    assert sweep.slope_half_width >= 0


def test_atomic_write_overwrites_cleanly(tmp_path):
    path = tmp_path / "out.txt"
    harness.atomic_write_text(str(path), "first")
    harness.atomic_write_text(str(path), "second")
    assert path.read_text() == "second"
    assert not [f for f in os.listdir(tmp_path) if f.endswith(".tmp")]


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def test_cli_bounds_stdout_and_file(tmp_path):
    runner = CliRunner()
    res = runner.invoke(
        cli_main,
        ["bounds", "logreg_error", "--params", '{"d": 3, "T": 200}'],
    )
    assert res.exit_code == 0
    assert res.output.splitlines()[0] == ",".join(
        ["bound_id", "side", "params_json", "value", "valid"]
    )
    res = runner.invoke(
        cli_main,
        [
            "bounds", "logreg_error", "--params", '{"d": 3, "T": 200}',
            "--out", str(tmp_path), "--format", "json",
        ],
    )
    assert res.exit_code == 0
    payload = json.loads(open(os.path.join(tmp_path, "bound_logreg_error.json")).read())
    assert payload[0]["bound_id"] == "logreg_error"
    res = runner.invoke(cli_main, ["bounds", "nope", "--params", "{}"])
    assert res.exit_code != 0


def test_cli_simulate(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(
        json.dumps(
            {
                "version": 1,
                "scenario_id": "cli_tiny",
                "process": {"kind": "linreg", "d": 2, "noise_var": 0.25},
                "predictor": {"kind": "conjugate"},
                "horizons": [3, 6],
                "replicates": 16,
                "master_seed": 11,
                "bounds": ["linreg_error"],
            }
        )
    )
    runner = CliRunner()
    res = runner.invoke(
        cli_main,
        ["simulate", str(cfg_path), "--out", str(tmp_path), "--seed", "12"],
    )
    assert res.exit_code == 0, res.output
    assert os.path.exists(tmp_path / "cli_tiny_curve.csv")
    assert "cli_tiny:" in res.output


def test_cli_verify_empty_manifest(tmp_path):
    manifest = tmp_path / "empty.json"
    manifest.write_text(json.dumps({"version": 1, "scenarios": []}))
    res = CliRunner().invoke(cli_main, ["verify", str(manifest)])
    assert res.exit_code == 0
    assert "trivial pass" in res.output


def test_cli_sweep_scaling(tmp_path):
    runner = CliRunner()
    res = runner.invoke(
        cli_main,
        [
            "sweep-scaling", "--d", "4", "--k", "4",
            "--c-min", "1e6", "--c-max", "1e10", "--points", "9",
            "--out", str(tmp_path),
        ],
    )
    assert res.exit_code == 0, res.output
    assert "slope=" in res.output
    assert os.path.exists(tmp_path / "scaling_sweep.csv")
    res = runner.invoke(
        cli_main,
        ["sweep-scaling", "--d", "4", "--k", "4", "--c-min", "1e6", "--c-max", "1e7"],
    )
    assert res.exit_code != 0


def test_cli_selftest():
    res = CliRunner().invoke(cli_main, ["selftest", "--seed", "7"])
    assert res.exit_code == 0, res.output
    assert res.output.count("pass") >= 4 and "FAIL" not in res.output
