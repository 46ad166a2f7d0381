import json
import os
import subprocess
import sys

import pytest

from anomaly.cli import ConfigError, main, validate_config

SAMPLE = {"command": "sample", "seed": 7, "parameters": {"stable": {"alpha": 1.5, "gamma": 0.2}, "n": 200}}


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return str(p)


def test_valid_config_and_digest():
    a = validate_config(json.dumps(SAMPLE))
    b = validate_config({**SAMPLE, "parameters": {"n": 200, "stable": {"gamma": 0.2, "alpha": 1.5}}})
    assert a.seed == 7 and a.command == "sample"
    assert a.digest == b.digest
    assert validate_config(SAMPLE, seed_override=8).seed == 8


def test_every_error_is_reported_with_relative_path():
    bad = {"command": "sample", "parameters": {"stable": {"alpha": 2.5}, "n": 0, "extra": 1}}
    with pytest.raises(ConfigError) as exc:
        validate_config(bad)
    errs = exc.value.errors
    assert any(e.startswith("<root>") and "seed" in e for e in errs)
    assert any(e.startswith("stable.alpha:") for e in errs)
    assert any(e.startswith("n:") for e in errs)
    assert any("extra" in e for e in errs)
    assert len(errs) >= 4


def test_json_syntax_and_semantic_errors():
    with pytest.raises(ConfigError, match="line"):
        validate_config("{not json")
    bad = {"command": "rheology", "seed": 0, "parameters": {
        "model": {"kind": "FM", "E1": 1.0, "E2": 1.0, "alpha1": 0.8, "alpha2": 0.2},
        "history": {"shape": "ramp", "amplitude": 0.1, "dt": 0.1, "horizon": 1.0}}}
    with pytest.raises(ConfigError, match="alpha1 < alpha2"):
        validate_config(bad)


def test_invalid_config_exits_1_without_output(tmp_path, capsys):
    cfg = write(tmp_path, {"command": "sample", "parameters": {"stable": {"alpha": 3}, "n": 5}})
    out = tmp_path / "out"
    assert main(["sample", "--config", cfg, "--out", str(out)]) == 1
    assert not out.exists()
    assert "stable.alpha" in capsys.readouterr().err


def test_command_mismatch(tmp_path):
    cfg = write(tmp_path, SAMPLE)
    assert main(["walk", "--config", cfg, "--out", str(tmp_path / "o")]) == 1


def test_sample_run_is_deterministic_with_manifest(tmp_path):
    cfg = write(tmp_path, SAMPLE)
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert main(["sample", "--config", cfg, "--out", str(out)]) == 0
        outs.append(out)
    a, b = ((o / "samples.csv").read_bytes() for o in outs)
    assert a == b
    man = json.loads((outs[0] / "manifest.json").read_text())
    assert man["seed"] == 7 and man["config_sha256"] == validate_config(SAMPLE).digest
    import hashlib

    assert man["artifacts"]["samples.csv"] == hashlib.sha256(a).hexdigest()
    # only the artifacts and the manifest, no scratch leftovers
    assert sorted(os.listdir(tmp_path)) == ["cfg.json", "o0", "o1"]


def test_seed_override_changes_output(tmp_path):
    cfg = write(tmp_path, SAMPLE)
    main(["sample", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["sample", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "8"])
    assert (tmp_path / "a" / "samples.csv").read_bytes() != (tmp_path / "b" / "samples.csv").read_bytes()


def test_runtime_failure_leaves_no_partial_output(tmp_path, capsys):
    doc = {"command": "solve", "seed": 0, "parameters": {
        "kind": "SpaceFADE", "alpha": 1.5, "dt": 0.05, "n_steps": 40, "edge_tol": 1e-6,
        "grid": {"half_width": 2.0, "dx": 0.05, "bc": "FreeSpace"},
        "ic": {"type": "gaussian", "width": 0.3}}}
    out = tmp_path / "out"
    assert main(["solve", "--config", write(tmp_path, doc), "--out", str(out)]) == 1
    assert not out.exists()
    assert "EdgeLeakError" in capsys.readouterr().err
    assert sorted(os.listdir(tmp_path)) == ["cfg.json"]


@pytest.mark.parametrize(
    "doc,files",
    [
        ({"command": "walk", "seed": 1, "parameters": {"kind": "CTRW", "dt": 0.1, "horizon": 1.0, "n_paths": 200,
          "wait": {"kind": "stable", "scale": 0.05, "beta": 0.7}, "save_paths": 3, "bins": {"half_width": 400.0}}},
         ["density.csv", "msd.csv", "paths.csv"]),
        ({"command": "solve", "seed": 0, "parameters": {"kind": "VOFADE", "alpha": {"left": 1.4, "right": 1.8},
          "beta": 0.8, "dt": 0.01, "n_steps": 10, "grid": {"half_width": 2.0, "dx": 0.1, "bc": "Reflecting"},
          "ic": {"type": "gaussian", "width": 0.5}, "probes": [0.5]}},
         ["btc_0.csv", "mass.csv", "snapshots.csv"]),
        ({"command": "rheology", "seed": 0, "parameters": {"model": {"kind": "SB", "E": 1.0, "alpha": 0.5},
          "history": {"shape": "sine", "amplitude": 0.1, "dt": 0.01, "horizon": 1.0},
          "omega": {"lo": 0.1, "hi": 10.0, "n": 5}}},
         ["driver.csv", "moduli.csv", "relaxation.csv"]),
    ],
    ids=["walk", "solve", "rheology"],
)
def test_commands_produce_artifacts(tmp_path, doc, files):
    out = tmp_path / "out"
    assert main([doc["command"], "--config", write(tmp_path, doc), "--out", str(out)]) == 0
    assert sorted(os.listdir(out)) == sorted(files + ["manifest.json"])


def test_verify_exit_codes(tmp_path):
    walk = {"kind": "Flight", "dt": 0.1, "horizon": 1.0, "n_paths": 20000, "stable_jump": {"alpha": 2.0, "sigma": 1.0}}
    ok = {"command": "verify", "seed": 3, "parameters": {"check": "msd_exponent", "expected_exponent": 1.0,
          "tolerance": 0.1, "walk": {**walk, "horizon": 100.0, "dt": 1.0, "n_paths": 2000}}}
    assert main(["verify", "--config", write(tmp_path, ok, "a.json"), "--out", str(tmp_path / "a")]) == 0
    bad = {**ok, "parameters": {**ok["parameters"], "expected_exponent": 0.5}}
    assert main(["verify", "--config", write(tmp_path, bad, "b.json"), "--out", str(tmp_path / "b")]) == 2
    rep = json.loads((tmp_path / "b" / "report.json").read_text())
    assert rep["msd_exponent"]["passed"] is False
    dens = {"command": "verify", "seed": 3, "parameters": {"check": "flight_density", "walk": walk}}
    assert main(["verify", "--config", write(tmp_path, dens, "c.json"), "--out", str(tmp_path / "c")]) == 0


def test_console_entry_point(tmp_path):
    cfg = write(tmp_path, SAMPLE)
    r = subprocess.run([sys.executable, "-m", "anomaly.cli", "sample", "--config", cfg, "--out", str(tmp_path / "o")],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
