"""Primal-dual interior-point solver for the unit-diagonal Hermitian SDP

    minimize   tr(C V)
    subject to diag(V) = 1,  V positive semidefinite

with dual  maximize sum(y)  s.t.  Z = C - Diag(y) positive semidefinite.

Both iterates start strictly feasible (V = I, y from a Gershgorin bound) and
stay feasible, so the duality gap is tr(V Z). Search directions are HKM with a
Mehrotra predictor-corrector, computed natively in complex arithmetic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

__all__ = ["SdpSolution", "solve_sdp_unit_diag", "NotHermitianError"]

log = logging.getLogger(__name__)


class NotHermitianError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SdpSolution:
    V: np.ndarray
    objective: float
    dual_objective: float
    y: np.ndarray
    gap: float
    kkt_residual: float
    iterations: int
    converged: bool

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.V)[0])


def _max_step(X_chol: np.ndarray, dX: np.ndarray) -> float:
    """Largest alpha with X + alpha dX still positive definite (X = L L^H)."""
    W = sla.solve_triangular(X_chol, dX, lower=True)
    W = sla.solve_triangular(X_chol, W.conj().T, lower=True).conj().T
    lam_min = np.linalg.eigvalsh((W + W.conj().T) / 2)[0]
    return np.inf if lam_min >= 0 else -1.0 / lam_min


def _herm(X: np.ndarray) -> np.ndarray:
    return (X + X.conj().T) / 2


def solve_sdp_unit_diag(C, tol: float = 1e-6, max_iter: int = 200) -> SdpSolution:
    """Minimize tr(C V) over unit-diagonal PSD V.

    The stopping test is applied to C scaled to unit max-modulus entries:
    iterate until the scaled duality gap falls below ``1e-3 * tol``. The
    reported ``kkt_residual`` is the relative gap (plus any diagonal drift)
    and ``gap`` is the absolute gap in the caller's units. Hitting
    ``max_iter`` returns the last iterate with ``converged=False``.
    """
    C = np.atleast_2d(np.asarray(C, dtype=complex))
    m = C.shape[0]
    if C.shape != (m, m):
        raise ValueError("C must be square")
    cnorm = float(np.max(np.abs(C))) if C.size else 0.0
    if np.max(np.abs(C - C.conj().T), initial=0.0) > 1e-12 * max(1.0, cnorm):
        raise NotHermitianError("cost matrix is not Hermitian")
    scale = cnorm if cnorm > 0 else 1.0
    Cs = _herm(C) / scale
    target = 1e-3 * tol

    V = np.eye(m, dtype=complex)
    y = -np.sum(np.abs(Cs), axis=1) - 1.0
    Z = Cs - np.diag(y)
    ones = np.ones(m)

    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        gap = float(np.real(np.vdot(V, Z)))  # tr(V Z) for Hermitian V
        if gap <= target:
            converged = True
            it -= 1
            break
        mu = gap / m
        try:
            Lz = np.linalg.cholesky(Z)
            Lv = np.linalg.cholesky(V)
        except np.linalg.LinAlgError:
            log.debug("lost definiteness at iteration %d; stopping", it)
            break
        Zi = sla.cho_solve((Lz, True), np.eye(m, dtype=complex))
        Zi = _herm(Zi)
        M = np.real(Zi * V.T)
        try:
            cf = sla.cho_factor(M)
        except np.linalg.LinAlgError:
            break

        def direction(sigma_mu, corr=None):
            rhs = ones - sigma_mu * np.real(np.diag(Zi))
            if corr is not None:
                rhs = rhs + np.real(np.diag(Zi @ corr))
            dy = sla.cho_solve(cf, rhs)
            dZ = -np.diag(dy).astype(complex)
            dV = sigma_mu * Zi - V + Zi @ np.diag(dy) @ V
            if corr is not None:
                dV = dV - Zi @ corr
            return dy, dZ, _herm(dV)

        dy_a, dZ_a, dV_a = direction(0.0)
        ap = min(1.0, _max_step(Lv, dV_a))
        ad = min(1.0, _max_step(Lz, dZ_a))
        mu_aff = float(np.real(np.vdot(V + ap * dV_a, Z + ad * dZ_a))) / m
        sigma = min(1.0, (mu_aff / mu) ** 3)

        dy, dZ, dV = direction(sigma * mu, corr=dZ_a @ dV_a)
        ap = min(1.0, 0.95 * _max_step(Lv, dV))
        ad = min(1.0, 0.95 * _max_step(Lz, dZ))

        V = _herm(V + ap * dV)
        y = y + ad * dy
        Z = Cs - np.diag(y)
        # re-pin the diagonal against rounding drift; V stays positive definite
        d = np.sqrt(np.real(np.diag(V)))
        V = V / np.outer(d, d)
    else:
        it = max_iter

    gap_s = float(np.real(np.vdot(V, Z)))
    pobj_s = float(np.real(np.vdot(Cs, V)))
    dobj_s = float(np.sum(y))
    drift = float(np.max(np.abs(np.real(np.diag(V)) - 1.0)))
    kkt = max(abs(gap_s) / (1.0 + abs(pobj_s)), drift)
    if not converged:
        log.info("SDP stopped without convergence after %d iterations (gap %.3g)", it, gap_s)
    return SdpSolution(
        V=V, objective=pobj_s * scale, dual_objective=dobj_s * scale, y=y * scale,
        gap=gap_s * scale, kkt_residual=kkt, iterations=it, converged=converged)
