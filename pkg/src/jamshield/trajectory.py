"""Trajectory update by successive convex approximation.

One call to :func:`sca_trajectory_step` builds the convex surrogate around
the current trajectory (array and phase responses frozen there, slacks tight),
solves it with the barrier kernel, and accepts the new trajectory only if the
true average rate does not drop.

Inside the surrogate every slack is normalized by its expansion value
(``u = u0 * u_hat`` etc.) and positions move as ``q = q0 + S * xi`` with
``S = V_max * delta_t``, so all constraint values are O(1).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .beamforming import track_phases
from .channel import batch_channels, evaluate_rate, irs_links
from .kernel.barrier import (AffineInequality, ConvexSubproblem, Objective,
                             SecondOrderCone, SmoothInequality, solve_convex)
from .scenario import Scenario, Trajectory, line_trajectory

__all__ = [
    "SlackState",
    "LinearizationPoint",
    "ScaSubproblem",
    "linearize_rate",
    "init_slacks",
    "linearization_point",
    "build_subproblem",
    "sca_trajectory_step",
    "StepInfo",
]

log = logging.getLogger(__name__)

LOG2E = np.log2(np.e)
START_MARGIN = 1e-6


def linearize_rate(L0, I0):
    """Tangent of log2(1 + 1/(L I)) at (L0, I0): returns (A, B, intercept)."""
    L0 = np.asarray(L0, dtype=float)
    I0 = np.asarray(I0, dtype=float)
    if np.any(L0 <= 0) or np.any(I0 <= 0):
        raise ValueError("expansion point must be strictly positive")
    A = -LOG2E / (L0 + L0 ** 2 * I0)
    B = -LOG2E / (I0 + I0 ** 2 * L0)
    return A, B, np.log2(1.0 + 1.0 / (L0 * I0))


def surrogate_rate(L, I, L0, I0):
    A, B, c = linearize_rate(L0, I0)
    return c + A * (L - L0) + B * (I - I0)


@dataclass(frozen=True, eq=False)
class SlackState:
    """Physical slack values per slot; L and I are inf/NaN on inactive slots."""

    L: np.ndarray
    I: np.ndarray
    u: np.ndarray
    e: np.ndarray
    s: np.ndarray
    t: np.ndarray
    eta: float


def init_slacks(s: Scenario, q: Trajectory, p, v) -> SlackState:
    """Slacks that make every relaxed constraint tight at ``(q, p, v)``."""
    p = np.asarray(p, dtype=float)
    bc = batch_channels(s, q.slot_positions(), v)
    snr = p * bc.a
    with np.errstate(divide="ignore"):
        L = np.where(snr > 0, 1.0 / np.where(snr > 0, snr, 1.0), np.inf)
    inv_ru = 1.0 / bc.d_ru
    eta = float(np.mean(np.log2(1.0 + snr / bc.b)))
    return SlackState(L=L, I=bc.b.copy(), u=1.0 / bc.d_gu, e=inv_ru.copy(), s=inv_ru.copy(),
                      t=1.0 / bc.d_mu, eta=eta)


@dataclass(frozen=True, eq=False)
class LinearizationPoint:
    """Expansion point of the surrogate.

    ``h_qg[n] @ [1/d_GU, 1/d_RU]`` reproduces the composite GN channel with
    array responses and phases frozen at ``q0``; ``h_qm`` likewise for the
    jammer. Without an IRS the second column is absent.
    """

    q0: Trajectory
    slacks: SlackState
    h_qg: np.ndarray
    h_qm: np.ndarray
    p: np.ndarray
    active: np.ndarray


def linearization_point(s: Scenario, q: Trajectory, p, v) -> LinearizationPoint:
    p = np.asarray(p, dtype=float)
    bc = batch_channels(s, q.slot_positions(), v)
    slacks = init_slacks(s, q, p, v)
    if s.K == 0:
        h_qg = (bc.h_gu * bc.d_gu)[:, None]
        h_qm = (bc.h_mu * bc.d_mu)[:, None]
    else:
        links = irs_links(s)
        theta = np.asarray(v)[:, :-1]
        cas_g = (bc.h_ru * theta) @ links.h_gr.conj()
        cas_m = (bc.h_ru * theta) @ links.h_mr.conj()
        h_qg = np.column_stack([bc.h_gu * bc.d_gu, cas_g * bc.d_ru])
        h_qm = np.column_stack([bc.h_mu * bc.d_mu, cas_m * bc.d_ru])
    active = p * bc.a > 0
    return LinearizationPoint(q, slacks, h_qg, h_qm, p, active)


@dataclass(eq=False)
class ScaSubproblem:
    sp: ConvexSubproblem
    start: np.ndarray
    lin: LinearizationPoint
    scale: float
    idx: dict = field(default_factory=dict)

    def positions(self, x) -> np.ndarray:
        """(N+1, 2) trajectory encoded by ``x``."""
        xy = np.array(self.lin.q0.xy, dtype=float)
        nf = xy.shape[0] - 2
        if nf > 0:
            xy[1:-1] += self.scale * x[self.idx["xi"]].reshape(nf, 2)
        return xy

    def trajectory(self, x) -> Trajectory:
        return Trajectory(self.positions(x), self.lin.q0.h0)

    def slacks(self, x) -> SlackState:
        sl = self.lin.slacks
        act = self.lin.active
        L = np.full(len(act), np.inf)
        I = np.full(len(act), np.nan)
        L[act] = sl.L[act] * x[self.idx["l"]]
        I[act] = sl.I[act] * x[self.idx["i"]]
        has_irs = "e" in self.idx
        return SlackState(
            L=L, I=I, u=sl.u * x[self.idx["u"]],
            e=sl.e * x[self.idx["e"]] if has_irs else sl.e,
            s=sl.s * x[self.idx["s"]] if has_irs else sl.s,
            t=sl.t * x[self.idx["t"]], eta=float(x[self.idx["eta"]][0]))


def build_subproblem(s: Scenario, lin: LinearizationPoint) -> ScaSubproblem:
    """Assemble the convex surrogate around ``lin``.

    Blocks: ``C1`` (distance constraints, two per slot without IRS, four
    with), ``link_G`` and ``link_M`` (one per active slot), ``mobility``
    (one cone per segment that contains a free point), ``rate`` (one row)
    and ``bounds`` (slack positivity and loose boxes). The objective is
    -eta.
    """
    N = s.n_slots
    has_irs = s.K > 0
    S = s.max_step
    act = lin.active
    na = int(act.sum())
    nf = N - 1
    sl = lin.slacks

    idx = {}
    pos = 0

    def take(name, k):
        nonlocal pos
        idx[name] = np.arange(pos, pos + k)
        pos += k

    take("xi", 2 * nf)
    take("u", N)
    if has_irs:
        take("e", N)
        take("s", N)
    take("t", N)
    take("l", na)
    take("i", na)
    take("eta", 1)
    n = pos

    P0 = np.array(lin.q0.xy[1:], dtype=float)  # (N, 2), last row fixed
    free = np.arange(N) < nf
    xi_cols = np.full((N, 2), -1)
    xi_cols[:nf] = idx["xi"].reshape(nf, 2)
    g_xy = np.array([s.q_g.x, s.q_g.y])
    m_xy = np.array([s.q_m.x, s.q_m.y])
    H0 = s.h0
    DG2 = 1.0 / sl.u ** 2
    DM2 = 1.0 / sl.t ** 2
    if has_irs:
        r_xy = np.array([s.irs.origin.x, s.irs.origin.y])
        hz2 = (H0 - s.irs.origin.z) ** 2
        DR2 = 1.0 / sl.e ** 2

    def positions(x):
        Pn = P0.copy()
        if nf:
            Pn[:nf] += S * x[idx["xi"]].reshape(nf, 2)
        return Pn

    # ---- C1: distance constraints -------------------------------------------
    c1_rows = 4 * N if has_irs else 2 * N

    def c1_parts(x):
        Pn = positions(x)
        u = x[idx["u"]]
        t = x[idx["t"]]
        f1 = (np.sum((Pn - g_xy) ** 2, axis=1) + H0 ** 2) / DG2 - 1 + 2 * (u - 1)
        lin_m = (2 * np.sum(P0 * Pn, axis=1) - np.sum(P0 ** 2, axis=1)
                 - 2 * Pn @ m_xy + m_xy @ m_xy + H0 ** 2)
        f4 = t ** -2.0 - lin_m / DM2
        if not has_irs:
            return Pn, [f1, f4]
        e = x[idx["e"]]
        sv = x[idx["s"]]
        f2 = (np.sum((Pn - r_xy) ** 2, axis=1) + hz2) / DR2 - 1 + 2 * (e - 1)
        lin_r = (2 * np.sum(P0 * Pn, axis=1) - np.sum(P0 ** 2, axis=1)
                 - 2 * Pn @ r_xy + r_xy @ r_xy + hz2)
        f3 = sv ** -2.0 - lin_r / DR2
        return Pn, [f1, f2, f3, f4]

    def c1_fun(x):
        return np.concatenate(c1_parts(x)[1])

    rows = np.arange(N)

    def c1_jac(x):
        Pn = positions(x)
        J = np.zeros((c1_rows, n))
        blocks = [("u", 2 * (Pn - g_xy) / DG2[:, None], None)]
        if has_irs:
            blocks.append(("e", 2 * (Pn - r_xy) / DR2[:, None], None))
            blocks.append(("s", -(2 * P0 - 2 * r_xy) / DR2[:, None], None))
        blocks.append(("t", -(2 * P0 - 2 * m_xy) / DM2[:, None], None))
        for b, (var, dpos, _) in enumerate(blocks):
            r0 = b * N
            for k in range(2):
                J[r0 + rows[free], xi_cols[free, k]] = S * dpos[free, k]
            vals = x[idx[var]]
            if var in ("u", "e"):
                J[r0 + rows, idx[var]] = 2.0
            else:
                J[r0 + rows, idx[var]] = -2.0 * vals ** -3.0
        return J

    def c1_hess(x, w):
        H = np.zeros((n, n))
        wb = w.reshape(-1, N)
        curv = [wb[0] / DG2]
        if has_irs:
            curv.append(wb[1] / DR2)
        total = 2 * S * S * np.sum(curv, axis=0)
        for k in range(2):
            cols = xi_cols[free, k]
            H[cols, cols] += total[free]
        tb = wb[-1]
        H[idx["t"], idx["t"]] += tb * 6.0 * x[idx["t"]] ** -4.0
        if has_irs:
            H[idx["s"], idx["s"]] += wb[2] * 6.0 * x[idx["s"]] ** -4.0
        return H

    constraints = [SmoothInequality(c1_fun, c1_jac, c1_hess, c1_rows, name="C1")]

    # ---- link constraints (active slots only) -------------------------------
    act_rows = np.flatnonzero(act)
    if na:
        p_act = lin.p[act]
        Hg = np.real(np.einsum("ni,nj->nij", lin.h_qg.conj(), lin.h_qg))[act]
        Hm = np.real(np.einsum("ni,nj->nij", lin.h_qm.conj(), lin.h_qm))[act]
        rg0 = np.column_stack([sl.u, sl.e])[act] if has_irs else sl.u[act, None]
        rm0 = np.column_stack([sl.t, sl.s])[act] if has_irs else sl.t[act, None]
        Hr = np.einsum("nij,nj->ni", Hg, rg0)
        cG = p_act * np.sum(rg0 * Hr, axis=1)
        omega = p_act[:, None] * Hr * rg0 / cG[:, None]
        I0 = sl.I[act]
        Mhat = s.p_m * Hm * rm0[:, :, None] * rm0[:, None, :] / I0[:, None, None]
        noise_hat = s.sigma2 / I0
        g_vars = [idx["u"][act_rows]] + ([idx["e"][act_rows]] if has_irs else [])
        m_vars = [idx["t"][act_rows]] + ([idx["s"][act_rows]] if has_irs else [])
        g_cols = np.column_stack(g_vars)
        m_cols = np.column_stack(m_vars)
        ar = np.arange(na)

        def lg_fun(x):
            lv = x[idx["l"]]
            return 1.0 / lv - 2 * np.sum(omega * x[g_cols], axis=1) + 1.0

        def lg_jac(x):
            J = np.zeros((na, n))
            J[ar, idx["l"]] = -x[idx["l"]] ** -2.0
            for k in range(g_cols.shape[1]):
                J[ar, g_cols[:, k]] = -2 * omega[:, k]
            return J

        def lg_hess(x, w):
            H = np.zeros((n, n))
            H[idx["l"], idx["l"]] = w * 2.0 * x[idx["l"]] ** -3.0
            return H

        def lm_fun(x):
            r = x[m_cols]
            return np.einsum("ni,nij,nj->n", r, Mhat, r) + noise_hat - x[idx["i"]]

        def lm_jac(x):
            J = np.zeros((na, n))
            grad = 2 * np.einsum("nij,nj->ni", Mhat, x[m_cols])
            for k in range(m_cols.shape[1]):
                J[ar, m_cols[:, k]] = grad[:, k]
            J[ar, idx["i"]] = -1.0
            return J

        def lm_hess(x, w):
            H = np.zeros((n, n))
            k = m_cols.shape[1]
            for a_ in range(k):
                for b_ in range(k):
                    np.add.at(H, (m_cols[:, a_], m_cols[:, b_]), 2 * w * Mhat[:, a_, b_])
            return H

        constraints.append(SmoothInequality(
            lg_fun, lg_jac, lg_hess, na, name="link_G",
            domain=lambda x: bool(np.all(x[idx["l"]] > 0))))
        constraints.append(SmoothInequality(lm_fun, lm_jac, lm_hess, na, name="link_M"))

    # ---- mobility cones ------------------------------------------------------
    prev = np.vstack([[s.q_start.x, s.q_start.y], P0[:-1]])
    seg_b = (P0 - prev) / S
    cone_rows = [j for j in range(N) if free[j] or (j >= 1 and free[j - 1])]
    if cone_rows:
        A = np.zeros((len(cone_rows), 2, n))
        for r, j in enumerate(cone_rows):
            if free[j]:
                A[r, [0, 1], xi_cols[j]] = 1.0
            if j >= 1 and free[j - 1]:
                A[r, [0, 1], xi_cols[j - 1]] = -1.0
        constraints.append(SecondOrderCone(
            A, seg_b[cone_rows], np.zeros((len(cone_rows), n)), np.ones(len(cone_rows)),
            name="mobility"))

    # ---- averaged rate -------------------------------------------------------
    G = np.zeros((1, n))
    G[0, idx["eta"]] = 1.0
    h = 0.0
    if na:
        L0 = sl.L[act]
        I0 = sl.I[act]
        kappa = -LOG2E / (1.0 + L0 * I0)  # A*L0 and B*I0 coincide
        R0 = np.log2(1.0 + 1.0 / (L0 * I0))
        G[0, idx["l"]] = -kappa / N
        G[0, idx["i"]] = -kappa / N
        h = float(np.sum(R0 - 2 * kappa) / N)
    constraints.append(AffineInequality(G, [h], name="rate"))

    # ---- positivity and loose boxes (inverse distances never exceed 2/altitude)
    box_vars = [("u", 2.0 / H0 / sl.u), ("t", 2.0 / H0 / sl.t)]
    if has_irs:
        hz = H0 - s.irs.origin.z
        box_vars += [("e", 2.0 / hz / sl.e), ("s", 2.0 / hz / sl.s)]
    pos_vars = [v for v, _ in box_vars] + ["l", "i"]
    n_pos = sum(len(idx[v]) for v in pos_vars)
    n_box = sum(len(idx[v]) for v, _ in box_vars)
    Gb = np.zeros((n_pos + n_box, n))
    hb = np.zeros(n_pos + n_box)
    r = 0
    for v in pos_vars:
        k = len(idx[v])
        Gb[r + np.arange(k), idx[v]] = -1.0
        r += k
    for v, ub in box_vars:
        k = len(idx[v])
        Gb[r + np.arange(k), idx[v]] = 1.0
        hb[r:r + k] = ub
        r += k
    constraints.append(AffineInequality(Gb, hb, name="bounds"))

    grad0 = np.zeros(n)
    grad0[idx["eta"]] = -1.0
    objective = Objective(lambda x: -float(x[idx["eta"]][0]), lambda x: grad0,
                          lambda x: np.zeros((n, n)))
    sp = ConvexSubproblem(n, objective, constraints, layout=idx)

    # strictly feasible start: tight slacks nudged inward
    d = START_MARGIN
    x0 = np.zeros(n)
    x0[idx["u"]] = 1 - d
    x0[idx["t"]] = 1 + d
    if has_irs:
        x0[idx["e"]] = 1 - d
        x0[idx["s"]] = 1 + d
    x0[idx["l"]] = (1 + d) / (1 - 2 * d)
    x0[idx["i"]] = (1 + d) ** 3
    x0[idx["eta"]] = 0.0
    x0[idx["eta"]] = -float(G[0] @ x0 - h) - d
    return ScaSubproblem(sp, x0, lin, S, idx)


@dataclass
class StepInfo:
    accepted: bool
    surrogate_rate: float
    true_rate: float
    incoming_rate: float
    iterations: int = 0
    flag: str = ""
    v: Optional[np.ndarray] = None  # phases to pair with the returned trajectory


def _strictly_mobile(s: Scenario, q: Trajectory) -> Trajectory:
    """Blend toward the line trajectory if a segment sits on the speed limit."""
    if np.all(q.steps() < s.max_step * (1 - 1e-12)):
        return q
    line = line_trajectory(s)
    if not np.all(line.steps() < s.max_step * (1 - 1e-12)):
        return q
    tau = 1e-6
    return Trajectory((1 - tau) * q.xy + tau * line.xy, q.h0)


def sca_trajectory_step(s: Scenario, q: Trajectory, p, v,
                        incoming_rate: Optional[float] = None,
                        tol: float = 1e-6, max_iter: int = 500, track: bool = True):
    """One surrogate solve; returns (trajectory, surrogate_rate, StepInfo).

    At the new trajectory each slot's IRS entries get a common rotation
    that re-aligns the cascade with the direct path (``track=True``);
    ``info.v`` carries the phases that belong with the returned trajectory.
    The step is rejected (incoming trajectory and phases returned) when the
    true average rate would drop, or when the solver hits its iteration cap.
    """

    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=complex)
    if incoming_rate is None:
        incoming_rate = evaluate_rate(s, q, p, v)
    free = s.n_slots - 1
    if free == 0 or not np.any(p > 0):
        return q, incoming_rate, StepInfo(False, incoming_rate, incoming_rate, incoming_rate,
                                          flag="nothing-to-move", v=v)
    q_lin = _strictly_mobile(s, q)
    if q_lin is q and not np.all(q.steps() < s.max_step * (1 - 1e-12)):
        return q, incoming_rate, StepInfo(False, incoming_rate, incoming_rate, incoming_rate,
                                          flag="no-interior", v=v)
    lin = linearization_point(s, q_lin, p, v)
    sub = build_subproblem(s, lin)
    res = solve_convex(sub.sp, sub.start, tol=tol, max_iter=max_iter)
    q_new = sub.trajectory(res.x)
    eta = float(res.x[sub.idx["eta"]][0])
    v_new = track_phases(s, q_new, p, v) if track else v
    new_rate = evaluate_rate(s, q_new, p, v_new)
    info = StepInfo(True, eta, new_rate, incoming_rate, res.iterations, res.flag, v_new)
    if res.flag:
        info.accepted = False
    elif new_rate < incoming_rate:
        info.accepted = False
        info.flag = "rate-decrease-rejected"
    if not info.accepted:
        log.debug("trajectory step rejected (%s): %.6g -> %.6g", info.flag, incoming_rate, new_rate)
        info.v = v
        return q, eta, info
    return q_new, eta, info
