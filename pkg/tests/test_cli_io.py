import json
import os

import numpy as np
import pytest

from boltzslab.cli import main, run_experiment, validate_e1, validate_operator
from boltzslab.config import ConfigError, RunConfig, load_config
from tests.conftest import CACHE_DIR

SMALL = """
# compact configuration used by the io tests
n_zeta1 = 16
n_zeta_r = 8
azimuthal_order = 8
n_theta = 8
n_eps = 8
x_coarse = 24
tol = 1e-9
seed = 7
"""


@pytest.fixture(autouse=True)
def _use_cache(monkeypatch):
    monkeypatch.setenv("BOLTZSLAB_CACHE_DIR", CACHE_DIR)


def write_cfg(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_minimal_config_defaults(tmp_path):
    cfg = load_config(write_cfg(tmp_path, "l = 1.0\n"))
    assert cfg.n_zeta1 == 32
    assert cfg.boundary == "temperature_step"
    assert cfg.moments == [(0, 0, 0), (2, 0, 0), (0, 2, 0)]


def test_comments_and_blank_lines(tmp_path):
    cfg = load_config(write_cfg(tmp_path, "\n# comment only\n  \nseed = 3 # trailing\n"))
    assert cfg.seed == 3


def test_odd_transverse_moment_rejected(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_config(write_cfg(tmp_path, "moments = 1,1,0\n"))
    assert "transverse" in str(exc.value)


def test_bad_fit_range_rejected(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_config(write_cfg(tmp_path, "fit_k_min = 14\nfit_k_max = 8\n"))
    assert "fit" in str(exc.value)


def test_parse_error_reports_line(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_config(write_cfg(tmp_path, "l = 1.0\nnot an assignment\n"))
    assert "line 2" in str(exc.value)


def test_unknown_key_reported(tmp_path):
    with pytest.raises(ConfigError) as exc:
        load_config(write_cfg(tmp_path, "zeta_maximum = 6\n"))
    assert "unknown key" in str(exc.value)


def test_all_violations_collected(tmp_path):
    text = "n_zeta1 = -4\nrelaxation = 2.0\nmoments = 0,1,0\n"
    with pytest.raises(ConfigError) as exc:
        load_config(write_cfg(tmp_path, text))
    msg = str(exc.value)
    assert msg.count("\n") >= 3


def test_invalid_config_exit_code_no_outputs(tmp_path):
    bad = write_cfg(tmp_path, "fit_k_min = 14\nfit_k_max = 8\n"
                               f"output_dir = {tmp_path}/out\n")
    rc = main(["solve", bad])
    assert rc == 2
    assert not (tmp_path / "out").exists()


def test_missing_config_file():
    assert main(["solve", "/nonexistent/path.cfg"]) == 2


def _small_cfg(tmp_path, outdir, extra=""):
    return write_cfg(tmp_path,
                     SMALL + f"output_dir = {outdir}\n" + extra,
                     name=os.path.basename(str(outdir)) + ".cfg")


def test_run_experiment_temperature_step(tmp_path):
    out = tmp_path / "ts"
    cfg = load_config(_small_cfg(tmp_path, out))
    rc = run_experiment(cfg, quiet=True)
    assert rc == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["converged"]
    assert len(rep["reports"]) == 3
    # csv column count: 1 + 2 per moment index
    header = (out / "moments.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 1 + 2 * 3
    # config echo round-trips
    assert rep["config"]["n_zeta1"] == 16
    assert rep["config"]["moments"] == [[0, 0, 0], [2, 0, 0], [0, 2, 0]]


def test_run_experiment_equilibrium_null(tmp_path):
    out = tmp_path / "eq"
    cfg = load_config(_small_cfg(tmp_path, out, "boundary = maxwellian\n"))
    rc = run_experiment(cfg, quiet=True)
    assert rc == 0
    rep = json.loads((out / "report.json").read_text())
    for r in rep["reports"]:
        assert abs(r["b_fit"]) <= 1e-6


def test_determinism_byte_identical_reports(tmp_path):
    out1, out2 = tmp_path / "d1", tmp_path / "d2"
    cfg1 = load_config(_small_cfg(tmp_path, out1))
    cfg2 = load_config(_small_cfg(tmp_path, out2))
    assert run_experiment(cfg1, quiet=True) == 0
    assert run_experiment(cfg2, quiet=True) == 0

    def normalized(p):
        rep = json.loads((p / "report.json").read_text())
        rep.pop("timestamp")
        rep.pop("runtime_seconds")
        rep["config"].pop("output_dir")
        return json.dumps(rep, sort_keys=True)

    assert normalized(out1) == normalized(out2)
    assert (out1 / "moments.csv").read_text() == (out2 / "moments.csv").read_text()


def test_validate_e1_artifacts(tmp_path):
    out = validate_e1(str(tmp_path), n_samples=64)
    assert out["bounds_hold"] and out["strictly_decreasing"]
    lines = (tmp_path / "e1_validation.csv").read_text().splitlines()
    assert lines[0] == "x,E1,branch,lower_bound,upper_bound"
    assert len(lines) == 65


def test_validate_operator_report(tmp_path):
    cfg = load_config(_small_cfg(tmp_path, tmp_path / "vo"))
    rep = validate_operator(cfg)
    assert max(rep["invariant_defects"].values()) <= 1e-6
    assert rep["kernel_asymmetry"] <= 1e-10
    assert rep["max_dissipativity_quotient"] <= 1e-8


def test_cli_report_subcommand(tmp_path, capsys):
    out = tmp_path / "rr"
    cfg = load_config(_small_cfg(tmp_path, out))
    run_experiment(cfg, quiet=True)
    rc = main(["report", str(out)])
    assert rc == 0
    assert "b_fit" in capsys.readouterr().out


def test_boundary_file_roundtrip(tmp_path):
    # tabulated boundary data: constant multiple of the Maxwellian root
    import math
    g1 = np.linspace(-6, 6, 25)
    gr = np.linspace(0, 6, 13)
    Z1, ZR = np.meshgrid(g1, gr, indexing="ij")
    vals = np.exp(-0.5 * (Z1**2 + ZR**2)) / math.pi**0.75
    tab = np.column_stack([Z1.ravel(), ZR.ravel(), vals.ravel()])
    path = tmp_path / "bdata.txt"
    np.savetxt(path, tab)
    out = tmp_path / "bf"
    cfg = load_config(_small_cfg(tmp_path, out, f"boundary = file:{path}\n"))
    rc = run_experiment(cfg, quiet=True)
    assert rc == 0
