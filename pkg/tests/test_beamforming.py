import numpy as np
import pytest

from jamshield.beamforming import (CascadePair, _best_rotation, build_cascade, cascade_vectors,
                                   dinkelbach_phases, extract_rank1, normalize_last,
                                   optimize_phases_all_slots, slot_sinr, track_phases)
from jamshield.channel import SlotChannels, evaluate_rate, gains, slot_channels
from jamshield.scenario import IrsGrid, Position3, Trajectory, line_trajectory

from conftest import make_scenario
from oracles import phase_grid_sinr

SIGMA2 = 1e-17


def _random_pair(rng, K, scale=1e-5):
    def cvec(n):
        return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * scale
    return CascadePair(cascade_vectors(cvec(K), cvec(K), cvec(1)[0]),
                       cascade_vectors(cvec(K), cvec(K), cvec(1)[0]))


def _sinr_of_v(cp, v, p, p_m):
    return float(slot_sinr(cp, v, p, p_m, SIGMA2))


def test_cascade_all_ones():
    sc = SlotChannels(h_gu=1, h_mu=1, h_ru=np.ones(1), h_gr=np.ones(1), h_mr=np.ones(1),
                      h_g=2, h_m=2, a=4, b=1)
    cp = build_cascade(sc)
    np.testing.assert_allclose(cp.R_G, np.ones((2, 2)))
    v = np.ones(2)
    assert np.real(np.trace(cp.R_G @ np.outer(v, v.conj()))) == pytest.approx(4.0)


def test_cascade_matches_channel_gain(rng):
    s = make_scenario(irs=IrsGrid(3, 2, 0.0625, Position3(110, 50, 5)))
    for _ in range(5):
        q = [rng.uniform(0, 500), rng.uniform(-100, 100), 100]
        v = normalize_last(np.exp(1j * rng.uniform(0, 7, s.K + 1)))
        sc = slot_channels(s, q, v)
        cp = build_cascade(sc)
        V = np.outer(v, v.conj())
        assert np.real(np.trace(cp.R_G @ V)) == pytest.approx(abs(sc.h_g) ** 2, rel=1e-10)
        assert np.real(np.trace(cp.R_M @ V)) == pytest.approx(abs(sc.h_m) ** 2, rel=1e-10)
        lam = np.linalg.eigvalsh(cp.R_G)
        assert lam[-2] <= 1e-10 * lam[-1]


def test_colocated_jammer_identical_cascades():
    s = make_scenario(q_m=Position3(100, -100, 0))
    cp = build_cascade(slot_channels(s, [200, 0, 100], np.ones(s.K + 1)))
    np.testing.assert_allclose(cp.R_M, cp.R_G, rtol=1e-12)


def test_dinkelbach_without_jammer_signal():
    cp = CascadePair(np.ones(2, dtype=complex), np.zeros(2, dtype=complex))
    res = dinkelbach_phases(cp, 1.0, 0.4, SIGMA2)
    assert res.mu == pytest.approx(SIGMA2 / 4, rel=1e-6)
    assert res.converged


def test_dinkelbach_history_non_decreasing(rng):
    for _ in range(5):
        cp = _random_pair(rng, 3)
        X = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        V0 = X @ X.conj().T
        d = np.sqrt(np.real(np.diag(V0)))
        res = dinkelbach_phases(cp, 0.2, 0.4, SIGMA2, eps1=1e-6, V0=V0 / np.outer(d, d))
        assert np.all(np.diff(res.history) >= -1e-12 * res.history[-1])
        # at the fixed point the parametric SDP value is zero up to the numerator scale
        V = res.V
        num = 0.4 * np.real(np.trace(cp.R_M @ V)) + SIGMA2
        val = num - res.mu * 0.2 * np.real(np.trace(cp.R_G @ V))
        assert abs(val) <= 1e-6 * num


@pytest.mark.parametrize("seed", range(4))
def test_two_elements_near_grid_optimum(seed):
    rng = np.random.default_rng(100 + seed)
    cp = _random_pair(rng, 2)
    res = dinkelbach_phases(cp, 0.2, 0.4, SIGMA2)
    v = extract_rank1(res.V, 200, score=lambda c: slot_sinr(cp, c, 0.2, 0.4, SIGMA2),
                      rng=np.random.default_rng(seed))
    oracle = phase_grid_sinr(cp.w_g, cp.w_m, 0.2, 0.4, SIGMA2, deg=1.0)
    got = _sinr_of_v(cp, v, 0.2, 0.4)
    assert got >= 0.99 * oracle
    assert got <= 1.0 / res.mu * (1 + 1e-6)


def test_extract_rank1_examples():
    for v, want in [((1j, 1), (1j, 1)), ((1, 1j), (-1j, 1))]:
        v = np.array(v)
        got = extract_rank1(np.outer(v, v.conj()))
        np.testing.assert_allclose(got, want, atol=1e-12)
        assert got[-1] == 1


def test_rank_two_randomization(rng):
    ok = 0
    for trial in range(100):
        cp = _random_pair(rng, 2)
        res = dinkelbach_phases(cp, 0.2, 0.4, SIGMA2)
        other = normalize_last(np.exp(1j * rng.uniform(0, 2 * np.pi, 3)))
        V = 0.8 * res.V + 0.2 * np.outer(other, other.conj())
        assert np.linalg.eigvalsh(V)[-2] > 1e-6 * np.linalg.eigvalsh(V)[-1]
        v = extract_rank1(V, 200, score=lambda c: slot_sinr(cp, c, 0.2, 0.4, SIGMA2),
                          rng=np.random.default_rng(trial))
        got = _sinr_of_v(cp, v, 0.2, 0.4)
        assert np.allclose(np.abs(v), 1) and v[-1] == 1
        assert got <= 1.0 / res.mu * (1 + 1e-6)
        ok += got >= 0.8 * phase_grid_sinr(cp.w_g, cp.w_m, 0.2, 0.4, SIGMA2, deg=2.0)
    assert ok == 100


def test_all_slots_zero_power_unchanged():
    s = make_scenario()
    q = line_trajectory(s)
    v = normalize_last(np.exp(1j * np.arange(s.n_slots * (s.K + 1)).reshape(s.n_slots, -1)))
    out, rep = optimize_phases_all_slots(s, q, np.zeros(s.n_slots), v)
    np.testing.assert_array_equal(out, v)
    assert rep.frozen_slots == s.n_slots


def test_no_irs_phases_trivial():
    s = make_scenario(irs=None)
    q = line_trajectory(s)
    v = np.ones((s.n_slots, 1))
    out, _ = optimize_phases_all_slots(s, q, np.full(s.n_slots, 0.2), v)
    np.testing.assert_array_equal(out, v)
    rate = evaluate_rate(s, q, np.full(s.n_slots, 0.2), out)
    a, b = gains(s, q, out)
    assert rate == pytest.approx(np.mean(np.log2(1 + 0.2 * a / b)))


def test_phase_design_beats_zero_phases():
    s = make_scenario(n_slots=4, delta_t=5.0)
    q = line_trajectory(s)
    p = np.full(4, 0.2)
    v0 = np.ones((4, s.K + 1), dtype=complex)
    out, rep = optimize_phases_all_slots(s, q, p, v0, seed=1)
    a0, b0 = gains(s, q, v0)
    a1, b1 = gains(s, q, out)
    assert np.all(a1 / b1 > a0 / b0)
    assert evaluate_rate(s, q, p, out) > evaluate_rate(s, q, p, v0)


def test_phase_design_keeps_better_incoming():
    s = make_scenario(n_slots=4, delta_t=5.0)
    q = line_trajectory(s)
    p = np.full(4, 0.2)
    first, _ = optimize_phases_all_slots(s, q, p, np.ones((4, s.K + 1)), seed=1)
    again, _ = optimize_phases_all_slots(s, q, p, first, seed=2)
    assert evaluate_rate(s, q, p, again) >= evaluate_rate(s, q, p, first) - 1e-12


def test_best_rotation_matches_grid(rng):
    grid = np.linspace(0, 2 * np.pi, 20001)
    for _ in range(20):
        A, B, C, D = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        p, pm, s2 = 1.0, rng.uniform(0, 2), rng.uniform(0.01, 1)
        f = lambda d: p * abs(A + B * np.exp(1j * d)) ** 2 / (pm * abs(C + D * np.exp(1j * d)) ** 2 + s2)
        d = _best_rotation(np.array([A]), np.array([B]), np.array([C]), np.array([D]), p, pm, s2)[0]
        assert f(d) >= np.max(f(grid)) * (1 - 1e-9)


def test_track_phases_never_lowers_sinr():
    s = make_scenario(n_slots=6, delta_t=5.0)
    q = line_trajectory(s)
    p = np.full(6, 0.2)
    v, _ = optimize_phases_all_slots(s, q, p, np.ones((6, s.K + 1)), seed=0)
    xy = q.xy.copy()
    xy[1:-1, 1] -= 7.0  # shift interior points sideways
    q2 = Trajectory(xy, s.h0)
    v2 = track_phases(s, q2, p, v)
    a0, b0 = gains(s, q2, v)
    a1, b1 = gains(s, q2, v2)
    assert np.all(a1 / b1 >= a0 / b0 * (1 - 1e-12))
    assert np.all(v2[:, -1] == 1) and np.allclose(np.abs(v2), 1)
