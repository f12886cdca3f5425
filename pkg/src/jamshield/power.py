"""Optimal transmit power for fixed trajectory and phases (capped water-filling)."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

__all__ = ["WaterfillResult", "waterfill"]

log = logging.getLogger(__name__)

LN2 = np.log(2.0)


@dataclass(frozen=True, eq=False)
class WaterfillResult:
    p: np.ndarray
    water_level: float  # 1 / (nu ln 2); inf on the all-at-cap branch
    nu: float
    iterations: int
    kkt_residual: float
    all_zero_gain: bool = False


def _kkt_residual(p, inv_snr, level, p_avg, p_peak, active):
    """Largest violation of stationarity / complementary slackness / budget."""
    n = len(p)
    res = [max(0.0, p.mean() - p_avg), max(0.0, -p.min()), max(0.0, p.max() - p_peak)]
    if np.isfinite(level):
        target = np.clip(level - inv_snr[active], 0.0, p_peak)
        res.append(float(np.max(np.abs(p[active] - target), initial=0.0)))
        res.append(abs(p.sum() - n * p_avg) / n)
    return max(res)


def waterfill(a, b, p_avg: float, p_peak: float, max_iter: int = 200) -> WaterfillResult:
    """Maximize mean(log2(1 + p a / b)) s.t. mean(p) <= p_avg, 0 <= p <= p_peak.

    p[n] = clamp(W - b[n]/a[n], 0, p_peak) with water level W = 1/(nu ln 2)
    found by bisection on mean(p) = p_avg, then snapped exactly on the
    resulting active set. Slots with a[n] = 0 get no power.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("a and b must be 1-D arrays of equal length")
    if np.any(a < 0) or np.any(b <= 0):
        raise ValueError("need a >= 0 and b > 0")
    if not 0 < p_avg:
        raise ValueError("p_avg must be positive")
    n = len(a)
    active = a > 0
    p = np.zeros(n)
    if not np.any(active):
        log.warning("all channel gains are zero; rate is 0 for any power")
        return WaterfillResult(p, 0.0, np.inf, 0, 0.0, all_zero_gain=True)

    inv_snr = np.full(n, np.inf)
    inv_snr[active] = b[active] / a[active]
    budget = n * p_avg
    # nu = 0 branch: every usable slot at the cap already fits the budget
    if active.sum() * p_peak <= budget:
        p[active] = p_peak
        return WaterfillResult(p, np.inf, 0.0, 0,
                               _kkt_residual(p, inv_snr, np.inf, p_avg, p_peak, active))

    def used(level):
        return np.clip(level - inv_snr[active], 0.0, p_peak).sum()

    lo, hi = 0.0, float(np.max(inv_snr[active])) + p_peak
    it = 0
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        if used(mid) < budget:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    level = 0.5 * (lo + hi)
    # exact water level on the active set identified by bisection
    pa = level - inv_snr[active]
    capped = pa >= p_peak
    interior = (pa > 0) & ~capped
    if interior.any():
        level = (budget - p_peak * capped.sum() + inv_snr[active][interior].sum()) / interior.sum()
    p[active] = np.clip(level - inv_snr[active], 0.0, p_peak)
    nu = 1.0 / (level * LN2)
    return WaterfillResult(p, level, nu, it,
                           _kkt_residual(p, inv_snr, level, p_avg, p_peak, active))
