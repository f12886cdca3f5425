"""Per-slot IRS phase design: Dinkelbach iterations over semidefinite relaxations
followed by rank-one recovery (principal eigenvector or Gaussian randomization).

Within a slot the design variable is the reflection vector
``v = [e^{j theta_1}, ..., e^{j theta_K}, 1]`` and the SINR is
``p * v^H R_G v / (P_M * v^H R_M v + sigma2)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .channel import SlotChannels, batch_channels, irs_links
from .kernel.sdp import solve_sdp_unit_diag
from .scenario import Scenario, Trajectory

__all__ = [
    "CascadePair",
    "DinkelbachResult",
    "PhaseReport",
    "build_cascade",
    "cascade_vectors",
    "slot_sinr",
    "dinkelbach_phases",
    "extract_rank1",
    "normalize_last",
    "optimize_phases_all_slots",
]

log = logging.getLogger(__name__)

RANK1_RATIO = 1e-6


@dataclass(frozen=True, eq=False)
class CascadePair:
    """R_J = w_J w_J^H with w_J = G_J^H g_J, for J in {G, M}."""

    w_g: np.ndarray
    w_m: np.ndarray

    @property
    def R_G(self) -> np.ndarray:
        return np.outer(self.w_g, self.w_g.conj())

    @property
    def R_M(self) -> np.ndarray:
        return np.outer(self.w_m, self.w_m.conj())

    @property
    def dim(self) -> int:
        return len(self.w_g)


def cascade_vectors(h_ru, h_jr, h_ju) -> np.ndarray:
    """w = G^H g with G = diag([h_RU, h_JU]) and g = [h_JR; 1]."""
    h_ru = np.asarray(h_ru, dtype=complex)
    diag = np.concatenate([h_ru, [h_ju]])
    g = np.concatenate([np.asarray(h_jr, dtype=complex), [1.0]])
    return diag.conj() * g


def build_cascade(sc: SlotChannels) -> CascadePair:
    return CascadePair(cascade_vectors(sc.h_ru, sc.h_gr, sc.h_gu),
                       cascade_vectors(sc.h_ru, sc.h_mr, sc.h_mu))


def slot_sinr(cp: CascadePair, v, p: float, p_m: float, sigma2: float) -> np.ndarray:
    """SINR for one vector ``v`` (K+1,) or a batch (S, K+1)."""
    v = np.asarray(v)
    sig = np.abs(v @ cp.w_g.conj()) ** 2
    jam = np.abs(v @ cp.w_m.conj()) ** 2
    return p * sig / (p_m * jam + sigma2)


def normalize_last(v: np.ndarray) -> np.ndarray:
    """Project entries to unit modulus and rotate so the last entry is exactly 1."""
    v = np.asarray(v, dtype=complex)
    u = np.exp(1j * np.angle(v))
    u = u * np.conj(u[..., -1:])
    u[..., -1] = 1.0
    return u


@dataclass(frozen=True, eq=False)
class DinkelbachResult:
    V: np.ndarray
    mu: float
    iterations: int
    history: list
    converged: bool
    flags: tuple = ()


def dinkelbach_phases(cp: CascadePair, p: float, p_m: float, sigma2: float,
                      eps1: float = 1e-3, V0: Optional[np.ndarray] = None,
                      max_outer: int = 50, sdp_tol: float = 1e-6) -> DinkelbachResult:
    """Minimize the inverse SINR over the relaxed set {V psd, diag(V) = 1}.

    Alternates mu <- (P_M tr(R_M V) + sigma2) / (p tr(R_G V)) and
    V <- argmin tr((P_M R_M - mu p R_G) V). ``history`` holds the relaxed
    SINR 1/mu after every update; it never decreases.
    """
    if not p > 0:
        raise ValueError("Dinkelbach step needs p > 0")
    m = cp.dim
    V = np.eye(m, dtype=complex) if V0 is None else np.asarray(V0, dtype=complex)
    R_G, R_M = cp.R_G, cp.R_M
    flags = []

    def ratio(V):
        sig = float(np.real(np.vdot(R_G, V)))
        jam = float(np.real(np.vdot(R_M, V)))
        return (p_m * jam + sigma2) / (p * sig) if sig > 0 else np.inf

    mu = ratio(V)
    if not np.isfinite(mu):
        # V0 may null the signal; the identity cannot unless w_g = 0
        V = np.eye(m, dtype=complex)
        mu = ratio(V)
        if not np.isfinite(mu):
            return DinkelbachResult(V, np.inf, 0, [], False, ("zero-signal-gain",))
    history = [1.0 / mu]
    converged = False
    it = 0
    for it in range(1, max_outer + 1):
        C = p_m * R_M - mu * p * R_G
        sol = solve_sdp_unit_diag(C, tol=sdp_tol)
        if not sol.converged:
            flags.append("sdp-iteration-limit")
        mu_new = ratio(sol.V)
        if mu_new <= mu:
            V = sol.V
        else:
            mu_new = mu
        gain = (1.0 / mu_new - 1.0 / mu) * mu
        mu = mu_new
        history.append(1.0 / mu)
        if gain < eps1:
            converged = True
            break
    if not converged:
        flags.append("dinkelbach-iteration-limit")
    return DinkelbachResult(V, float(mu), it, history, converged, tuple(flags))


def extract_rank1(V, n_samples: int = 200, score: Optional[Callable] = None,
                  rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Recover a unit-modulus vector with last entry 1 from a relaxed solution.

    Exact rank one (lambda_2 / lambda_1 <= 1e-6): projected principal
    eigenvector. Otherwise ``n_samples`` draws from CN(0, V), projected
    entrywise, and the one with the highest ``score`` wins; the projected
    principal eigenvector competes as well.
    """
    V = np.asarray(V, dtype=complex)
    V = (V + V.conj().T) / 2
    lam, U = np.linalg.eigh(V)
    principal = normalize_last(U[:, -1] * np.sqrt(max(lam[-1], 0.0)))
    if len(lam) == 1 or lam[-2] <= RANK1_RATIO * lam[-1] or score is None:
        return principal
    rng = np.random.default_rng() if rng is None else rng
    m = len(lam)
    root = U * np.sqrt(np.clip(lam, 0.0, None))
    z = (rng.standard_normal((n_samples, m)) + 1j * rng.standard_normal((n_samples, m))) / np.sqrt(2)
    cands = normalize_last(z @ root.T)
    cands = np.vstack([principal[None, :], cands])
    scores = np.asarray(score(cands))
    return cands[int(np.argmax(scores))]


def _best_rotation(A, B, C, D, p, p_m, sigma2):
    """Maximize p|A + B e^{jd}|^2 / (p_m |C + D e^{jd}|^2 + sigma2) over d, elementwise.

    Numerator and denominator are const + amplitude * cos(d - phase); the
    stationarity condition reduces to a sin d + b cos d + c = 0.
    """
    al = p * (np.abs(A) ** 2 + np.abs(B) ** 2)
    be = 2 * p * np.abs(A) * np.abs(B)
    f1 = np.angle(A) - np.angle(B)
    ga = p_m * (np.abs(C) ** 2 + np.abs(D) ** 2) + sigma2
    ep = 2 * p_m * np.abs(C) * np.abs(D)
    f2 = np.angle(C) - np.angle(D)
    # -be*ga*sin(d - f1) + al*ep*sin(d - f2) + be*ep*sin(f1 - f2) = 0
    a = -be * ga * np.cos(f1) + al * ep * np.cos(f2)
    b = be * ga * np.sin(f1) - al * ep * np.sin(f2)
    c = be * ep * np.sin(f1 - f2)
    amp = np.hypot(a, b)
    psi = np.arctan2(b, a)
    ratio = np.clip(np.divide(-c, amp, out=np.zeros_like(amp), where=amp > 0), -1, 1)
    base = np.arcsin(ratio)
    cands = np.stack([np.zeros_like(a), base - psi, np.pi - base - psi])

    def f(d):
        return (al + be * np.cos(d - f1)) / (ga + ep * np.cos(d - f2))

    vals = f(cands)
    return cands[np.argmax(vals, axis=0), np.arange(cands.shape[1])]


def track_phases(s: Scenario, traj: Trajectory, p, v) -> np.ndarray:
    """Rotate each slot's IRS entries by a common phase to maximize its SINR.

    Restores, at a new trajectory, the direct/cascade phase alignment that
    the previous phase design had; never lowers a slot's SINR.
    """
    v = np.asarray(v, dtype=complex)
    if s.K == 0:
        return v.copy()
    links = irs_links(s)
    bc = batch_channels(s, traj.slot_positions(), v)
    theta = v[:, :-1]
    B = (bc.h_ru * theta) @ links.h_gr.conj()
    D = (bc.h_ru * theta) @ links.h_mr.conj()
    p = np.maximum(np.asarray(p, dtype=float), 1e-300)
    rot = _best_rotation(bc.h_gu, B, bc.h_mu, D, p, s.p_m, s.sigma2)
    out = v.copy()
    out[:, :-1] = theta * np.exp(1j * rot)[:, None]
    out[:, :-1] /= np.abs(out[:, :-1])
    return out


@dataclass
class PhaseReport:
    flags: dict = field(default_factory=dict)
    kept_incoming: int = 0
    frozen_slots: int = 0
    dinkelbach_iterations: list = field(default_factory=list)

    def flag(self, slot: int, name: str) -> None:
        self.flags.setdefault(slot, []).append(name)


def optimize_phases_all_slots(s: Scenario, traj: Trajectory, p, v_in,
                              eps1: float = 1e-3, n_samples: int = 200,
                              seed: int = 0, iteration: int = 0):
    """Re-optimize every slot's reflection vector; returns (v, PhaseReport).

    Slots with zero power keep their phases. A recovered vector replaces
    the incoming one only if its SINR is at least as high.
    """
    p = np.asarray(p, dtype=float)
    v_in = np.asarray(v_in, dtype=complex)
    report = PhaseReport()
    v_out = v_in.copy()
    if s.K == 0:
        return v_out, report
    links = irs_links(s)
    bc = batch_channels(s, traj.slot_positions(), v_in)
    for n in range(s.n_slots):
        if p[n] <= 0:
            report.frozen_slots += 1
            continue
        cp = CascadePair(cascade_vectors(bc.h_ru[n], links.h_gr, bc.h_gu[n]),
                         cascade_vectors(bc.h_ru[n], links.h_mr, bc.h_mu[n]))
        V0 = np.outer(v_in[n], v_in[n].conj())
        res = dinkelbach_phases(cp, p[n], s.p_m, s.sigma2, eps1=eps1, V0=V0)
        report.dinkelbach_iterations.append(res.iterations)
        for f in res.flags:
            report.flag(n + 1, f)
        if not np.isfinite(res.mu):
            continue
        rng = np.random.default_rng([seed, iteration, n])

        def score(c, cp=cp, pn=p[n]):
            return slot_sinr(cp, c, pn, s.p_m, s.sigma2)

        cand = extract_rank1(res.V, n_samples=n_samples, score=score, rng=rng)
        if score(cand) >= score(v_in[n]):
            v_out[n] = cand
        else:
            report.kept_incoming += 1
    return v_out, report
