import numpy as np
import pytest

from jamshield.scenario import (ConfigError, IrsGrid, Position3, Trajectory, ValidationError,
                                format_scenario, line_deviation, line_trajectory, load_scenario,
                                load_settings, parse_scenario, phases_feasible, power_feasible)

from conftest import make_scenario


def _cfg(**kw):
    base = {
        "q_start": "0, 0, 100", "q_end": "500, 0, 100", "q_g": "100, -100, 0",
        "q_m": "100, 50, 0", "q_r": "110, 50, 5", "kx": "10", "kz": "5", "h0": "100",
        "n_slots": "50", "delta_t": "0.5", "v_max": "60", "p_avg": "0.2", "p_peak": "0.5",
        "p_m": "0.4", "rho": "1e-3", "sigma2": "1e-17",
    }
    base.update({k: str(v) for k, v in kw.items()})
    return "\n".join(f"{k} = {v}" for k, v in base.items() if v != "DROP")


def test_setup_a_config_fields(configs_dir):
    s = load_scenario(configs_dir / "setup_a.cfg")
    assert (s.irs.origin.x, s.irs.origin.y, s.irs.origin.z) == (110, 50, 5)
    assert s.K == 50 and s.n_slots == 50 and s.delta_t == 0.5
    assert s.p_avg == 0.2 and s.p_peak == 0.5 and s.h0 == 100
    assert s.irs.element_spacing == pytest.approx(0.125 / 2)


def test_setup_b_differs_only_in_irs_position(configs_dir):
    a = load_scenario(configs_dir / "setup_a.cfg")
    b = load_scenario(configs_dir / "setup_b.cfg")
    assert (b.irs.origin.x, b.irs.origin.y, b.irs.origin.z) == (110, -100, 5)
    assert a.with_irs(b.irs) == b


def test_avg_above_peak_rejected():
    with pytest.raises(ValidationError, match="P_avg exceeds P_peak"):
        parse_scenario(_cfg(p_avg=0.2, p_peak=0.1))


def test_unreachable_endpoint_rejected():
    with pytest.raises(ValidationError, match="unreachable") as err:
        parse_scenario(_cfg(n_slots=10, delta_t=0.5, v_max=60))
    assert "300" in str(err.value) and "500" in str(err.value)


@pytest.mark.parametrize("text, exc", [
    ("q_start = 0, 0", ConfigError),
    ("this is not a config", ConfigError),
])
def test_malformed_files(text, exc):
    with pytest.raises(exc):
        parse_scenario(_cfg() + "\n" + text)


def test_unknown_and_missing_keys():
    with pytest.raises(ConfigError, match="unknown"):
        parse_scenario(_cfg(colour="red"))
    with pytest.raises(ConfigError, match="h0"):
        parse_scenario(_cfg(h0="DROP"))
    with pytest.raises(ConfigError, match="not found"):
        load_scenario("/nonexistent/x.cfg")


def test_altitude_and_ground_invariants():
    with pytest.raises(ValidationError):
        parse_scenario(_cfg(q_end="500, 0, 90"))
    with pytest.raises(ValidationError):
        parse_scenario(_cfg(q_g="100, -100, 3"))
    with pytest.raises(ValidationError):
        IrsGrid(0, 3, 0.1, Position3(0, 0, 0))


def test_zero_elements_means_no_irs():
    s = parse_scenario(_cfg(kx=0, kz=0))
    assert s.irs is None and s.K == 0


def test_format_roundtrip():
    s = parse_scenario(_cfg())
    assert parse_scenario(format_scenario(s)) == s


def test_settings_defaults_and_overrides(tmp_path):
    f = tmp_path / "x.cfg"
    f.write_text(_cfg() + "\neps2 = 1e-4\nn_samples = 50\n")
    st = load_settings(f)
    assert st.eps2 == 1e-4 and st.n_samples == 50 and st.eps1 == 1e-3
    assert load_scenario(f).n_slots == 50


def test_line_midpoint_full_scale():
    s = parse_scenario(_cfg())
    q = line_trajectory(s)
    assert q.xy.shape == (51, 2)
    np.testing.assert_allclose(q.xy[25], [250, 0])
    np.testing.assert_allclose(q.slot_positions()[24], [250, 0, 100])


def test_line_steps_and_endpoints():
    s = parse_scenario(_cfg())
    q = line_trajectory(s)
    np.testing.assert_allclose(q.steps(), 10.0)
    assert s.max_step == 30.0
    assert q.is_feasible(s)
    np.testing.assert_array_equal(q.xy[0], [0, 0])
    np.testing.assert_array_equal(q.xy[-1], [500, 0])


def test_line_single_slot():
    # one slot: the only rate-bearing position is the end point itself
    s = make_scenario(n_slots=1, delta_t=10.0)
    q = line_trajectory(s)
    np.testing.assert_array_equal(q.xy, [[0, 0], [500, 0]])
    s2 = make_scenario(n_slots=2, delta_t=10.0)
    np.testing.assert_allclose(line_trajectory(s2).xy[1], [250, 0])


def test_trajectory_is_read_only():
    q = line_trajectory(make_scenario())
    with pytest.raises(ValueError):
        q.xy[1, 0] = 3.0


def test_feasibility_checks():
    s = make_scenario()
    q = line_trajectory(s)
    xy = q.xy.copy()
    xy[5, 1] += 200
    assert not Trajectory(xy, s.h0).is_feasible(s)
    assert power_feasible(s, np.full(20, 0.2))
    assert not power_feasible(s, np.full(20, 0.21))
    assert not power_feasible(s, np.r_[np.full(19, 0.1), 0.6])
    v = np.ones((20, 5), dtype=complex)
    assert phases_feasible(s, v)
    v[3, 4] = 1j
    assert not phases_feasible(s, v)


def test_line_deviation():
    s = make_scenario()
    d = line_deviation(s, [[100, 0], [200, -30], [0, 7]])
    np.testing.assert_allclose(d, [0, 30, 7])
