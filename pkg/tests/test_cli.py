import csv
import io

import numpy as np
import pytest

from jamshield import cli
from jamshield.cli import load_sweep_spec, main, scenario_with_k
from jamshield.scenario import ConfigError, ValidationError

from conftest import make_scenario

SMALL = """\
q_start = 0, 0, 100
q_end = 500, 0, 100
q_g = 100, -100, 0
q_m = 100, 50, 0
q_r = {q_r}
kx = {kx}
kz = {kz}
h0 = 100
n_slots = 5
delta_t = 4
v_max = 60
p_avg = 0.2
p_peak = 0.5
p_m = 0.4
rho = 1e-3
sigma2 = 1e-17
"""


def _config(tmp_path, name="a.cfg", q_r="110, 50, 5", kx=2, kz=2):
    f = tmp_path / name
    f.write_text(SMALL.format(q_r=q_r, kx=kx, kz=kz))
    return f


def _rows(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_optimize_outputs(tmp_path):
    cfg = _config(tmp_path)
    out = tmp_path / "run"
    assert main(["optimize", str(cfg), "--out", str(out), "--seed", "4"]) == 0
    traj = _rows(out / "trajectory.csv")
    assert len(traj) == 5 + 1
    assert (float(traj[0]["x"]), float(traj[-1]["x"])) == (0.0, 500.0)
    state = _rows(out / "state.csv")
    assert len(state) == 5
    assert list(state[0]) == ["n", "p", "theta_1", "theta_2", "theta_3", "theta_4"]
    p = np.array([float(r["p"]) for r in state])
    assert p.mean() <= 0.2 + 1e-9
    assert "average_rate_bps_per_hz" in (out / "rate.txt").read_text()
    assert (out / "trajectory.svg").read_text().lstrip().startswith("<?xml")
    assert (out / "trajectory.csv").read_text().startswith("# ")


def test_optimize_no_irs_has_no_theta(tmp_path):
    cfg = _config(tmp_path, kx=0, kz=0)
    out = tmp_path / "run"
    assert main(["optimize", str(cfg), "--out", str(out)]) == 0
    assert list(_rows(out / "state.csv")[0]) == ["n", "p"]


def test_missing_config_leaves_nothing(tmp_path):
    out = tmp_path / "never"
    assert main(["optimize", str(tmp_path / "nope.cfg"), "--out", str(out)]) == cli.EXIT_CONFIG
    assert not out.exists()


def test_invalid_config_exit_code(tmp_path):
    f = tmp_path / "bad.cfg"
    f.write_text(SMALL.format(q_r="110, 50, 5", kx=2, kz=2).replace("p_peak = 0.5", "p_peak = 0.1"))
    assert main(["optimize", str(f), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_usage_errors(tmp_path, monkeypatch):
    assert main([]) == cli.EXIT_USAGE
    assert main(["optimize"]) == cli.EXIT_USAGE
    assert main(["frobnicate"]) == cli.EXIT_USAGE
    monkeypatch.setenv("JAMSHIELD_LOG", "loud")
    assert main(["optimize", str(_config(tmp_path)), "--out", str(tmp_path / "o")]) == cli.EXIT_USAGE


def test_solver_failure_exit_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise FloatingPointError("diverged")
    monkeypatch.setattr(cli, "run_pipeline", boom)
    assert main(["optimize", str(_config(tmp_path)), "--out", str(tmp_path / "o")]) == cli.EXIT_SOLVER


def test_optimize_byte_identical(tmp_path):
    cfg = _config(tmp_path)
    for d in ("r1", "r2"):
        assert main(["optimize", str(cfg), "--out", str(tmp_path / d), "--seed", "17"]) == 0
    for name in ("trajectory.csv", "state.csv", "rate.txt", "trajectory.svg"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()


def _spec(tmp_path, text):
    f = tmp_path / "s.spec"
    f.write_text(text)
    return f


def test_sweep_spec_validation(tmp_path):
    _config(tmp_path)
    with pytest.raises(ValidationError, match="increasing"):
        load_sweep_spec(_spec(tmp_path, "parameter = p_m\nvalues = 0.4, 0.1\nscenarios = a.cfg\n"))
    with pytest.raises(ConfigError):
        load_sweep_spec(_spec(tmp_path, "parameter = rho\nvalues = 1\nscenarios = a.cfg\n"))
    with pytest.raises(ConfigError, match="pipelines"):
        load_sweep_spec(_spec(tmp_path, "parameter = p_m\nvalues = 1\nscenarios = a.cfg\n"
                                        "pipelines = proposed, oracle\n"))
    sp = load_sweep_spec(_spec(tmp_path, "parameter = k_elements\nvalues = 4, 8\nscenarios = a.cfg\n"))
    assert sp.values == (4, 8) and sp.pipelines == ("proposed", "line_trajectory", "no_irs")


def test_scenario_with_k():
    s = make_scenario()
    assert scenario_with_k(s, 8).irs.kx * scenario_with_k(s, 8).irs.kz == 8
    assert (scenario_with_k(s, 16).irs.kx, scenario_with_k(s, 16).irs.kz) == (4, 4)
    assert scenario_with_k(s, 7).K == 7
    assert scenario_with_k(s, 0).irs is None


def test_sweep_p_m_rows_and_ordering(tmp_path):
    _config(tmp_path, "a.cfg")
    _config(tmp_path, "b.cfg", q_r="110, -100, 5")
    spec = _spec(tmp_path, "parameter = p_m\nvalues = 0.1, 0.2, 0.4\nscenarios = a.cfg, b.cfg\n"
                           "pipelines = proposed, line_trajectory, no_irs\nseed = 1\n")
    assert main(["sweep", str(spec), "--out", str(tmp_path / "sw")]) == 0
    rows = _rows(tmp_path / "sw" / "sweep.csv")
    assert len(rows) == 18
    assert all(r["flag"] == "" for r in rows)
    rate = {(r["pipeline"], r["setup"], r["p_m"]): float(r["rate"]) for r in rows}
    for (pipe, setup, pm), val in rate.items():
        if pipe == "proposed":
            assert val >= rate[("line_trajectory", setup, pm)] >= 0
    assert (tmp_path / "sw" / "sweep.svg").exists()
    assert (tmp_path / "sw" / "timing.csv").exists()


def test_sweep_k_no_irs_constant_and_failed_cell(tmp_path):
    _config(tmp_path, "a.cfg")
    _config(tmp_path, "bare.cfg", kx=0, kz=0)
    spec = _spec(tmp_path, "parameter = k_elements\nvalues = 1, 2, 4\nscenarios = a.cfg, bare.cfg\n"
                           "pipelines = no_irs\n")
    assert main(["sweep", str(spec), "--out", str(tmp_path / "sw")]) == 0
    rows = _rows(tmp_path / "sw" / "sweep.csv")
    assert len(rows) == 6
    good = [r for r in rows if r["setup"] == "a"]
    assert len({r["rate"] for r in good}) == 1 and not any(r["flag"] for r in good)
    # a K > 0 sweep on a scenario without an IRS position is recorded, not fatal
    bad = [r for r in rows if r["setup"] == "bare" and r["k_elements"] != "0"]
    assert bad and all(r["flag"] and r["rate"] == "nan" for r in bad)


def test_sweep_deterministic(tmp_path):
    _config(tmp_path, "a.cfg")
    spec = _spec(tmp_path, "parameter = k_elements\nvalues = 1, 4\nscenarios = a.cfg\n"
                           "pipelines = proposed\nseed = 5\n")
    for d in ("x", "y"):
        assert main(["sweep", str(spec), "--out", str(tmp_path / d)]) == 0
    for name in ("sweep.csv", "sweep.svg"):
        assert (tmp_path / "x" / name).read_bytes() == (tmp_path / "y" / name).read_bytes()


def test_compare_setups(tmp_path):
    a = _config(tmp_path, "a.cfg")
    b = _config(tmp_path, "b.cfg", q_r="110, -100, 5")
    assert main(["compare-setups", str(a), str(b), "--out", str(tmp_path / "c")]) == 0
    rows = _rows(tmp_path / "c" / "compare.csv")
    assert [r["setup"] for r in rows] == ["a", "b"]
    assert len(_rows(tmp_path / "c" / "trajectories.csv")) == 2 * 6
    assert (tmp_path / "c" / "compare.svg").exists()
