"""Log-barrier interior-point method for small smooth convex programs.

Problems are minimize f0(x) subject to a list of constraint blocks:

* :class:`AffineEquality`      A x = b
* :class:`AffineInequality`    G x <= h
* :class:`SecondOrderCone`     ||A_i x + b_i|| <= c_i . x + d_i   (batched over i)
* :class:`SmoothInequality`    f_i(x) <= 0 with f_i convex and twice differentiable

Each Newton centering step solves the equality-constrained KKT system on the
dense Hessian; sizes here are a few hundred variables at most.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla

__all__ = [
    "AffineEquality",
    "AffineInequality",
    "SecondOrderCone",
    "SmoothInequality",
    "Objective",
    "ConvexSubproblem",
    "ConvexResult",
    "InfeasibleStartError",
    "solve_convex",
]

log = logging.getLogger(__name__)


class InfeasibleStartError(ValueError):
    pass


@dataclass(eq=False)
class AffineEquality:
    A: np.ndarray
    b: np.ndarray
    name: str = "eq"
    kind = "affine-equality"

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))

    @property
    def size(self) -> int:
        return len(self.b)

    def residual(self, x):
        return self.A @ x - self.b


@dataclass(eq=False)
class AffineInequality:
    G: np.ndarray
    h: np.ndarray
    name: str = "ineq"
    kind = "affine-inequality"
    nu_per_row = 1

    def __post_init__(self):
        self.G = np.atleast_2d(np.asarray(self.G, dtype=float))
        self.h = np.atleast_1d(np.asarray(self.h, dtype=float))

    @property
    def size(self) -> int:
        return len(self.h)

    def value(self, x):
        return self.G @ x - self.h

    def jacobian(self, x):
        return self.G

    def hessian(self, x, w):
        return None


@dataclass(eq=False)
class SmoothInequality:
    """f(x) <= 0 for a vector of convex functions.

    ``fun(x) -> (m,)``, ``jac(x) -> (m, n)``, ``hess(x, w) -> (n, n)`` giving
    sum_i w_i * Hessian(f_i). ``domain(x)`` may reject points where f is
    undefined.
    """

    fun: Callable
    jac: Callable
    hess: Callable
    size: int
    name: str = "smooth"
    domain: Optional[Callable] = None
    kind = "smooth-convex-inequality"
    nu_per_row = 1

    def value(self, x):
        return self.fun(x)

    def jacobian(self, x):
        return self.jac(x)

    def hessian(self, x, w):
        return self.hess(x, w)


@dataclass(eq=False)
class SecondOrderCone:
    """||A[i] x + b[i]|| <= c[i] . x + d[i] for i = 1..m.

    Shapes: A (m, k, n), b (m, k), c (m, n), d (m,). The barrier is
    -log((c.x + d)^2 - ||A x + b||^2) on c.x + d > 0.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    name: str = "soc"
    kind = "second-order-cone"
    nu_per_row = 2

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.c = np.atleast_2d(np.asarray(self.c, dtype=float))
        self.d = np.atleast_1d(np.asarray(self.d, dtype=float))

    @property
    def size(self) -> int:
        return len(self.d)

    def parts(self, x):
        m, k, n = self.A.shape
        r = (self.A.reshape(m * k, n) @ x).reshape(m, k) + self.b
        s = self.c @ x + self.d
        return r, s

    def value(self, x):
        """Constraint violation ||A x + b|| - (c.x + d)."""
        r, s = self.parts(x)
        return np.linalg.norm(r, axis=1) - s


@dataclass(eq=False)
class Objective:
    fun: Callable
    grad: Callable
    hess: Callable


@dataclass(eq=False)
class ConvexSubproblem:
    """A smooth convex program with a named variable layout."""

    n: int
    objective: Objective
    constraints: list = field(default_factory=list)
    layout: dict = field(default_factory=dict)

    def count(self, name: str) -> int:
        return sum(c.size for c in self.constraints if c.name == name)

    def check_start(self, x) -> None:
        for c in self.constraints:
            if isinstance(c, AffineEquality):
                continue
            vals = c.value(x)
            if not np.all(np.isfinite(vals)):
                raise InfeasibleStartError(f"constraint {c.name!r} not finite at start")

    def max_violation(self, x) -> float:
        worst = 0.0
        for c in self.constraints:
            if isinstance(c, AffineEquality):
                vals = np.abs(c.residual(x))
            else:
                vals = c.value(x)
            if len(vals):
                worst = max(worst, float(np.max(vals)))
        return worst


@dataclass(frozen=True, eq=False)
class ConvexResult:
    x: np.ndarray
    objective: float
    converged: bool
    iterations: int
    gap: float
    stationarity: float
    max_violation: float
    flag: str = ""


class _Barrier:
    def __init__(self, sp: ConvexSubproblem):
        self.sp = sp
        self.eqs = [c for c in sp.constraints if isinstance(c, AffineEquality)]
        self.ineqs = [c for c in sp.constraints if not isinstance(c, AffineEquality)]
        self.nu = sum(c.size * c.nu_per_row for c in self.ineqs)
        self.A = (np.vstack([c.A for c in self.eqs]) if self.eqs
                  else np.zeros((0, sp.n)))

    def strictly_feasible(self, x) -> bool:
        for c in self.ineqs:
            if isinstance(c, SmoothInequality) and c.domain is not None and not c.domain(x):
                return False
            if isinstance(c, SecondOrderCone):
                r, s = c.parts(x)
                if np.any(s <= 0) or np.any(s * s - np.sum(r * r, axis=1) <= 0):
                    return False
            else:
                v = c.value(x)
                if not np.all(np.isfinite(v)) or np.any(v >= 0):
                    return False
        return True

    def value(self, x, t) -> float:
        total = t * self.sp.objective.fun(x)
        for c in self.ineqs:
            if isinstance(c, SecondOrderCone):
                r, s = c.parts(x)
                total -= np.sum(np.log(s * s - np.sum(r * r, axis=1)))
            else:
                total -= np.sum(np.log(-c.value(x)))
        return float(total)

    def derivatives(self, x, t):
        n = self.sp.n
        g = t * self.sp.objective.grad(x)
        H = t * np.asarray(self.sp.objective.hess(x), dtype=float).copy()
        if H.ndim == 0:
            H = np.zeros((n, n))
        for c in self.ineqs:
            if isinstance(c, SecondOrderCone):
                r, s = c.parts(x)
                q = s * s - np.sum(r * r, axis=1)
                # grad q = 2 s c - 2 A^T r ; hess q = 2 c c^T - 2 A^T A
                m, k, _ = c.A.shape
                Atr = np.sum(c.A * r[:, :, None], axis=1)
                gq = 2 * s[:, None] * c.c - 2 * Atr
                g -= np.sum(gq / q[:, None], axis=0)
                H += (gq / q[:, None]).T @ (gq / q[:, None])
                wq = 2.0 / q
                H -= (c.c * wq[:, None]).T @ c.c
                Af = c.A.reshape(m * k, n)
                H += (Af * np.repeat(wq, k)[:, None]).T @ Af
            else:
                f = c.value(x)
                J = c.jacobian(x)
                inv = 1.0 / (-f)
                g += J.T @ inv
                Js = J * inv[:, None]
                H += Js.T @ Js
                Hc = c.hessian(x, inv)
                if Hc is not None:
                    H += Hc
        return g, H

    def newton_step(self, g, H):
        n = self.sp.n
        p = self.A.shape[0]
        if p == 0:
            try:
                cf = sla.cho_factor(H + 1e-14 * np.trace(H) / n * np.eye(n))
                return -sla.cho_solve(cf, g), np.zeros(0)
            except np.linalg.LinAlgError:
                dx = np.linalg.lstsq(H, -g, rcond=None)[0]
                return dx, np.zeros(0)
        K = np.block([[H, self.A.T], [self.A, np.zeros((p, p))]])
        sol = np.linalg.lstsq(K, np.concatenate([-g, np.zeros(p)]), rcond=None)[0]
        return sol[:n], sol[n:]


def solve_convex(sp: ConvexSubproblem, start, tol: float = 1e-6,
                 tol_feas: float = 1e-8, max_iter: int = 500,
                 t0: float = 1.0, mu: float = 20.0) -> ConvexResult:
    """Minimize ``sp.objective`` from a strictly feasible ``start``.

    Stops when the barrier duality bound nu/t drops below ``tol``. The
    returned point never has a worse objective than ``start``; exhausting
    ``max_iter`` Newton steps returns the best iterate with ``flag``
    set to ``"iteration-limit"``.
    """
    x = np.array(start, dtype=float)
    sp.check_start(x)
    bar = _Barrier(sp)
    if not bar.strictly_feasible(x):
        raise InfeasibleStartError("start point is not strictly feasible")
    for c in bar.eqs:
        if np.max(np.abs(c.residual(x)), initial=0.0) > tol_feas:
            raise InfeasibleStartError(f"start violates equality block {c.name!r}")

    f_start = float(sp.objective.fun(x))
    t = t0
    total = 0
    flag = ""
    stationarity = np.inf
    while True:
        # centering
        for _ in range(100):
            g, H = bar.derivatives(x, t)
            dx, w = bar.newton_step(g, H)
            dec2 = float(-g @ dx)
            if dec2 / 2 <= 1e-10:
                break
            phi0 = bar.value(x, t)
            # a decrease below the rounding level of phi cannot be verified
            if dec2 <= 1e-15 * abs(phi0):
                break
            step = 1.0
            while step > 1e-14:
                xn = x + step * dx
                if bar.strictly_feasible(xn) and bar.value(xn, t) <= phi0 - 0.25 * step * dec2:
                    break
                step *= 0.5
            else:
                break
            x = xn
            total += 1
            if total >= max_iter:
                flag = "iteration-limit"
                break
        g, _ = bar.derivatives(x, t)
        if bar.A.shape[0]:
            w = np.linalg.lstsq(bar.A.T, -g, rcond=None)[0]
            g = g + bar.A.T @ w
        stationarity = float(np.linalg.norm(g)) / t
        if flag or bar.nu / t < tol:
            break
        t *= mu

    f_x = float(sp.objective.fun(x))
    if f_x > f_start:
        x, f_x = np.array(start, dtype=float), f_start
    return ConvexResult(
        x=x, objective=f_x, converged=not flag, iterations=total,
        gap=bar.nu / t, stationarity=stationarity,
        max_violation=sp.max_violation(x), flag=flag)
