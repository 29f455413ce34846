import csv
import io
import json

import numpy as np
import pytest

from mfgs_lha import __version__
from mfgs_lha.cli import main
from mfgs_lha.config import PRESETS, SCENARIOS, config_to_text, load_config, validate_config
from mfgs_lha.errors import ConfigError
from mfgs_lha.runner import COLUMNS, compute_point, render_csv, run_scenario

SMALL = """
[scenario]
name = custom
[potential]
kind = quartic_dw
a4 = 0.5
a2 = 0.5
a1 = 0.1
[bath]
kind = drude
omega_c = 5
[thermal]
kT = 0.5
[sweep]
var = gamma
values = 0.1 1
[grid]
n_q = 301
n_eta = 21
[series]
n_terms = 2000
"""


def _problems(text):
    with pytest.raises(ConfigError) as err:
        validate_config(text)
    return dict(err.value.problems)


def test_presets_validate():
    for name in SCENARIOS[:-1]:
        cfg = validate_config(f"[scenario]\nname = {name}\n")
        assert cfg.scenario == name and cfg.sweep_values
        assert set(PRESETS[name]) <= {"potential", "bath", "thermal", "sweep", "observables", "sensitivity"}


def test_proton_preset_defaults():
    cfg = validate_config("[scenario]\nname = proton_gamma\n")
    assert cfg.omega_c == 100.0 and cfg.sensitivity_omegas == (50.0, 200.0)
    assert 0.018 in cfg.sweep_values and 0.18 in cfg.sweep_values
    assert cfg.kT == pytest.approx(0.00095)


def test_negative_cutoff_named():
    probs = _problems(SMALL.replace("omega_c = 5", "omega_c = -5"))
    assert "bath.omega_c" in probs and "> 0" in probs["bath.omega_c"]


def test_empty_sweep():
    assert "sweep.values" in _problems(SMALL.replace("values = 0.1 1", "values ="))


def test_non_increasing_sweep():
    assert "increasing" in _problems(SMALL.replace("values = 0.1 1", "values = 1 0.1"))["sweep.values"]


def test_errors_aggregate():
    bad = SMALL.replace("omega_c = 5", "omega_c = -5").replace("n_terms = 2000", "n_terms = 5").replace("kT = 0.5", "kT = x")
    probs = _problems(bad)
    assert {"bath.omega_c", "series.n_terms", "thermal.kT"} <= set(probs)


def test_unknown_names():
    assert _problems("[scenario]\nname = nope\n").keys() == {"scenario.name"}
    probs = _problems(SMALL + "\n[extras]\nfoo = 1\n")
    assert probs["extras"] == "unknown section"
    assert "bath.colour" in _problems(SMALL.replace("kind = drude", "kind = drude\ncolour = red"))


def test_round_trip():
    for text in ("[scenario]\nname = quartic_sweep\n", "[scenario]\nname = proton_temperature\n", SMALL):
        cfg = validate_config(text)
        again = validate_config(config_to_text(cfg))
        assert again == cfg and again.digest() == cfg.digest()


def test_temperature_units():
    cfg = validate_config("[scenario]\nname = proton_temperature\n")
    assert cfg.beta_at(300.0) == pytest.approx(1 / (3.166811563e-6 * 300.0))
    cfg = validate_config(SMALL.replace("kT = 0.5", "beta = 4"))
    assert cfg.kT == pytest.approx(0.25)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")


@pytest.fixture(scope="module")
def small_cfg():
    return validate_config(SMALL)


def test_point_row(small_cfg):
    p = compute_point(small_cfg, 0, 1.0)
    assert p.failure is None and p.row["stability_flags"] == "ok"
    assert 0 < p.row["pop_right"] < 1 and p.row["eps_T"] > 0
    assert p.grid["n_q"] == 301 and p.grid["q_b"] == pytest.approx(0.1021, abs=1e-3)


def test_csv_deterministic_and_ordered(small_cfg):
    a = run_scenario(small_cfg, workers=1)
    b = run_scenario(small_cfg, workers=2)
    assert render_csv(small_cfg, a.rows) == render_csv(small_cfg, b.rows)
    text = render_csv(small_cfg, a.rows)
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    rows = list(csv.DictReader(io.StringIO("\n".join(body))))
    assert tuple(rows[0]) == COLUMNS
    assert [r["value"] for r in rows] == ["0.1", "1.0", "0.0", "inf"]
    assert [r["stability_flags"] for r in rows[2:]] == ["ref_gibbs_gamma0", "ref_usc"]
    assert a.exit_code == 0


def test_stability_failure_recorded():
    cfg = validate_config(SMALL.replace("a2 = 0.5", "a2 = 2").replace("values = 0.1 1", "values = 0 10"))
    res = run_scenario(cfg)
    assert res.exit_code == 2
    assert res.rows[0]["stability_flags"] == "stability_error" and np.isnan(res.rows[0]["kappa2"])
    assert res.rows[1]["stability_flags"] == "ok"
    assert res.manifest["failures"]


def test_cli_run_and_manifest(tmp_path):
    cfg_path = tmp_path / "small.ini"
    cfg_path.write_text(SMALL)
    out = tmp_path / "out"
    assert main(["run", str(cfg_path), "--out", str(out)]) == 0
    first = (out / "custom.csv").read_bytes()
    assert main(["run", str(cfg_path), "--out", str(out), "--workers", "2"]) == 0
    assert (out / "custom.csv").read_bytes() == first
    man = json.loads((out / "custom.manifest.json").read_text())
    cfg = load_config(cfg_path)
    assert man["config_sha256"] == cfg.digest() and man["version"] == __version__
    assert man["series"]["n_terms"] == 2000 and len(man["points"]) == 2
    assert all("n_q" in p["grid"] for p in man["points"])
    assert f"config_sha256={cfg.digest()}" in first.decode()


def test_cli_overrides(tmp_path):
    cfg_path = tmp_path / "small.ini"
    cfg_path.write_text(SMALL)
    out = tmp_path / "o"
    assert main(["run", str(cfg_path), "--out", str(out), "--n-terms", "1000", "--grid-points", "201"]) == 0
    man = json.loads((out / "custom.manifest.json").read_text())
    assert man["series"]["n_terms"] == 1000 and man["points"][0]["grid"]["n_q"] == 201


def test_cli_validate_and_config_error(tmp_path, capsys):
    good = tmp_path / "g.ini"
    good.write_text(SMALL)
    assert main(["validate", str(good)]) == 0
    bad = tmp_path / "b.ini"
    bad.write_text(SMALL.replace("omega_c = 5", "omega_c = -5"))
    assert main(["validate", str(bad)]) == 1
    assert "config error: bath.omega_c" in capsys.readouterr().err
    assert main(["run", str(good), "--n-terms", "10"]) == 1


def test_cli_oracle(tmp_path):
    cfg_path = tmp_path / "small.ini"
    cfg_path.write_text(SMALL)
    assert main(["oracle", str(cfg_path), "--out", str(tmp_path)]) == 0
    text = (tmp_path / "custom.oracle.csv").read_text()
    flags = [ln.rsplit(",", 1)[1] for ln in text.splitlines() if not ln.startswith("#")][1:]
    assert flags == ["ref_gibbs_gamma0", "ref_usc"]


def test_cli_stability_exit(tmp_path):
    cfg_path = tmp_path / "u.ini"
    cfg_path.write_text(SMALL.replace("a2 = 0.5", "a2 = 2").replace("values = 0.1 1", "values = 0 10"))
    assert main(["run", str(cfg_path), "--out", str(tmp_path)]) == 2
