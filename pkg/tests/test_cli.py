"""End-to-end CLI tests: config validation, run-directory artifacts,
byte-identical replay, exit codes, and the MMS study."""

import json
import os

import pytest
import yaml

from gbulab import cli
from gbulab.errors import ConfigurationError


def write_config(tmp_path, name="cfg.yaml", **over):
    cfg = {
        "p": 3.0,
        "domain": {"Lx": 0.25, "Ly": 0.06},
        "grid": {"nx": 65, "ny": 65},
        "initial_data": {"family": "cap", "amplitude": 0.4, "width": 0.18},
        "solver": {"stop_grad_norm": 200.0, "t_max": 0.05},
        "diagnostics": {"q": 3.0},
        "fits": {"level_frac": 0.5, "extent": 0.05},
    }
    for key, val in over.items():
        if isinstance(val, dict):
            cfg.setdefault(key, {}).update(val)
        else:
            cfg[key] = val
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------


def test_config_roundtrip(tmp_path):
    cfg = cli.load_config(write_config(tmp_path))
    again = cli.RunConfig.from_dict(cfg.to_dict())
    assert again == cfg


def test_config_unknown_field_has_path(tmp_path):
    path = write_config(tmp_path, solver={"dt": 1.0})
    with pytest.raises(ConfigurationError, match="solver.dt"):
        cli.load_config(path)


def test_config_rejects_bad_family(tmp_path):
    path = write_config(tmp_path, initial_data={"family": "spike"})
    with pytest.raises(ConfigurationError, match="family"):
        cli.load_config(path)


def test_config_rejects_p_not_above_2(tmp_path):
    path = write_config(tmp_path, p=2.0)
    with pytest.raises(ConfigurationError, match="p"):
        cli.load_config(path)


def test_invalid_yaml_exit_code(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("p: [unclosed")
    assert cli.main(["run", str(bad), "-o", str(tmp_path / "r")]) \
        == cli.EXIT_CONFIG
    assert not (tmp_path / "r").exists()  # validated before mkdir


def test_preset_registry():
    path = cli.preset_path("p3-blowup")
    assert path.endswith("p3-blowup.yaml") and os.path.exists(path)
    with pytest.raises(ConfigurationError, match="presets:"):
        cli.preset_path("no-such-preset")


# --------------------------------------------------------------------------
# run / fit / check lifecycle
# --------------------------------------------------------------------------


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    cfg = write_config(tmp)
    out = tmp / "run"
    assert cli.main(["run", cfg, "-o", str(out)]) == cli.EXIT_OK
    return out


def test_run_artifacts(run_dir):
    for name in ("series.csv", "meta.json", "fits.json", "report.json",
                 "h_table.csv", "profile_normal.csv", "profile_tangential.csv"):
        assert (run_dir / name).exists(), name
    assert any((run_dir / "snapshots").iterdir())
    meta = json.loads((run_dir / "meta.json").read_text())
    assert meta["outcome"]["reason"] == "blow_up_detected"
    fits = json.loads((run_dir / "fits.json").read_text())
    assert fits["p"] == 3.0 and "normal" in fits


def test_run_deterministic(run_dir, tmp_path):
    cfg = write_config(tmp_path)
    out2 = tmp_path / "run2"
    assert cli.main(["run", cfg, "-o", str(out2)]) == cli.EXIT_OK
    for name in ("series.csv", "fits.json", "report.json"):
        assert (run_dir / name).read_bytes() == (out2 / name).read_bytes(), name


def test_fit_replay_identical(run_dir):
    before = (run_dir / "fits.json").read_bytes()
    assert cli.main(["fit", str(run_dir)]) == cli.EXIT_OK
    assert (run_dir / "fits.json").read_bytes() == before


def test_check_passes_then_catches_tampering(run_dir, tmp_path):
    assert cli.main(["check", str(run_dir)]) == cli.EXIT_OK

    import shutil
    clone = tmp_path / "clone"
    shutil.copytree(run_dir, clone)

    fits = clone / "fits.json"
    fits.write_bytes(fits.read_bytes().replace(b"3.0", b"3.1", 1))
    assert cli.main(["check", str(clone)]) == 1

    snaps = sorted((clone / "snapshots").iterdir())
    snaps[0].write_bytes(b"XXXX" + snaps[0].read_bytes()[4:])
    assert cli.main(["check", str(clone)]) == cli.EXIT_SNAPSHOT


def test_check_regenerates_missing_fits(run_dir, tmp_path):
    import shutil
    clone = tmp_path / "clone2"
    shutil.copytree(run_dir, clone)
    ref = (clone / "fits.json").read_bytes()
    (clone / "fits.json").unlink()
    assert cli.main(["check", str(clone)]) == cli.EXIT_OK
    assert (clone / "fits.json").read_bytes() == ref


def test_dt_underflow_reported_as_outcome(tmp_path):
    cfg = write_config(tmp_path, solver={"dt_floor": 1.0})
    out = tmp_path / "r"
    assert cli.main(["run", cfg, "-o", str(out)]) == cli.EXIT_OK
    meta = json.loads((out / "meta.json").read_text())
    assert meta["outcome"]["reason"] == "dt_underflow"


# --------------------------------------------------------------------------
# 1D and sweep
# --------------------------------------------------------------------------


def test_run_1d(tmp_path):
    path = write_config(
        tmp_path, name="oned.yaml",
        domain={"Lx": 0.25, "Ly": 1.0}, grid={"nx": 5, "ny": 257},
        initial_data={"family": "sine_1d", "amplitude": 1.5, "width": 0.0},
        solver={"stop_grad_norm": 400.0, "t_max": 2.0})
    out = tmp_path / "r1d"
    assert cli.main(["run", path, "-o", str(out)]) == cli.EXIT_OK
    fits = json.loads((out / "fits.json").read_text())
    assert fits["reason"] == "blow_up_detected"
    assert "fit" in fits["time_rate"]
    assert fits["time_rate"]["fit"]["exponent"] < 0


def test_sweep(tmp_path):
    c1 = write_config(tmp_path, name="a.yaml")
    c2 = write_config(tmp_path, name="b.yaml",
                      solver={"stop_grad_norm": 150.0, "t_max": 0.05})
    root = tmp_path / "sweep"
    assert cli.main(["sweep", c1, c2, "-o", str(root)]) == cli.EXIT_OK
    assert (root / "a" / "fits.json").exists()
    assert (root / "b" / "fits.json").exists()


# --------------------------------------------------------------------------
# mms and barrier
# --------------------------------------------------------------------------


def test_mms_study(tmp_path, capsys):
    path = tmp_path / "mms.yaml"
    path.write_text(yaml.safe_dump({
        "p": 3.0, "alpha": 3.0, "T": 1.0, "t_end": 0.02,
        "Lx": 0.5, "Ly": 0.5, "grids": [33, 65]}))
    assert cli.main(["mms", str(path)]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "order(33->65)" in out


def test_barrier_report(tmp_path):
    out = tmp_path / "barrier.json"
    rc = cli.main(["barrier", "--eta", "0.01", "--eta", "0.02",
                   "--out", str(out)])
    assert rc == cli.EXIT_OK
    doc = json.loads(out.read_text())
    assert len(doc["etas"]) == 2
    assert all("C0" in e for e in doc["etas"])
