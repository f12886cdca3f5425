"""Alternating optimization over power, IRS phases and trajectory, plus the
"line trajectory" and "w/o IRS" baselines."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .beamforming import optimize_phases_all_slots
from .channel import evaluate_rate, gains
from .power import waterfill
from .scenario import Scenario, Trajectory, line_trajectory
from .trajectory import sca_trajectory_step

__all__ = [
    "AoState",
    "AoReport",
    "init_state",
    "run_ao",
    "baseline_line_trajectory",
    "baseline_no_irs",
    "PIPELINES",
    "run_pipeline",
    "TOL_MONO",
]

log = logging.getLogger(__name__)

TOL_MONO = 1e-6
UPDATE_ORDER_NOTE = ("blocks updated P -> Theta -> Q, each using the most recent "
                     "values of the other two blocks")


@dataclass(frozen=True, eq=False)
class AoState:
    p: np.ndarray
    v: np.ndarray
    q: Trajectory
    rate: float
    iteration: int = 0
    seed: int = 0


@dataclass
class AoReport:
    history: list = field(default_factory=list)
    block_history: list = field(default_factory=list)
    timings: dict = field(default_factory=lambda: {"power": 0.0, "phases": 0.0, "trajectory": 0.0})
    termination: str = ""
    flags: list = field(default_factory=list)
    notes: list = field(default_factory=lambda: [UPDATE_ORDER_NOTE])

    @property
    def iterations(self) -> int:
        return max(0, len(self.history) - 1)

    def is_monotone(self, tol: float = TOL_MONO) -> bool:
        rates = [r for _, r in self.block_history] or self.history
        return bool(np.all(np.diff(rates) >= -tol))


def _state(s: Scenario, p, v, q, iteration, seed) -> AoState:
    return AoState(np.asarray(p, dtype=float), np.asarray(v, dtype=complex), q,
                   evaluate_rate(s, q, p, v), iteration, seed)


def init_state(s: Scenario, seed: int = 0) -> AoState:
    """Line trajectory, uniform power min(P_avg, P_peak), all-zero phases."""
    p = np.full(s.n_slots, min(s.p_avg, s.p_peak))
    v = np.ones((s.n_slots, s.K + 1), dtype=complex)
    return _state(s, p, v, line_trajectory(s), 0, seed)


def run_ao(s: Scenario, init: AoState | None = None, eps2: float = 1e-3,
           max_outer: int = 100, *, eps1: float = 1e-3, n_samples: int = 200,
           optimize_trajectory: bool = True, optimize_phases: bool = True,
           seed: int | None = None):
    """Iterate power -> phases -> trajectory until the fractional rate gain drops below eps2.

    Returns ``(final_state, report)``. Flagged subproblems never abort the
    loop; the affected block simply keeps its previous value.
    """
    state = init_state(s, 0 if seed is None else seed) if init is None else init
    seed = state.seed if seed is None else seed
    report = AoReport()
    report.history.append(state.rate)
    report.block_history.append(("init", state.rate))
    p, v, q = state.p, state.v, state.q
    rate = state.rate

    for it in range(1, max_outer + 1):
        t0 = time.perf_counter()
        a, b = gains(s, q, v)
        wf = waterfill(a, b, s.p_avg, s.p_peak)
        if wf.all_zero_gain:
            report.flags.append((it, "power", "all-zero-gain"))
        new_rate = evaluate_rate(s, q, wf.p, v)
        if new_rate >= rate - TOL_MONO:
            p, rate = wf.p, new_rate
        report.block_history.append(("power", rate))
        report.timings["power"] += time.perf_counter() - t0

        if optimize_phases and s.K > 0:
            t0 = time.perf_counter()
            v_new, prep = optimize_phases_all_slots(s, q, p, v, eps1=eps1, n_samples=n_samples,
                                                    seed=seed, iteration=it)
            for slot, names in sorted(prep.flags.items()):
                report.flags.extend((it, f"phases[{slot}]", nm) for nm in names)
            new_rate = evaluate_rate(s, q, p, v_new)
            if new_rate >= rate - TOL_MONO:
                v, rate = v_new, new_rate
            report.block_history.append(("phases", rate))
            report.timings["phases"] += time.perf_counter() - t0

        if optimize_trajectory:
            t0 = time.perf_counter()
            q_new, _, info = sca_trajectory_step(s, q, p, v, incoming_rate=rate)
            if info.flag and info.flag != "rate-decrease-rejected":
                report.flags.append((it, "trajectory", info.flag))
            if info.accepted:
                q, v, rate = q_new, info.v, info.true_rate
            report.block_history.append(("trajectory", rate))
            report.timings["trajectory"] += time.perf_counter() - t0

        prev = report.history[-1]
        report.history.append(rate)
        gain = (rate - prev) / max(prev, 1e-12)
        log.info("AO iteration %d: rate %.6f (gain %.3g)", it, rate, gain)
        if gain < eps2:
            report.termination = "converged"
            break
    else:
        report.termination = "max-outer"
    final = AoState(p, v, q, rate, report.iterations, seed)
    return final, report


def baseline_line_trajectory(s: Scenario, eps2: float = 1e-3, **kw):
    """Power and phases alternate; the trajectory stays on the straight line."""
    return run_ao(s, init_state(s, kw.pop("seed", 0)), eps2, optimize_trajectory=False, **kw)


def baseline_no_irs(s: Scenario, eps2: float = 1e-3, **kw):
    """Power and trajectory alternate with the IRS removed (K = 0)."""
    bare = replace(s, irs=None)
    return run_ao(bare, init_state(bare, kw.pop("seed", 0)), eps2, **kw)


def _proposed(s, eps2=1e-3, **kw):
    return run_ao(s, init_state(s, kw.pop("seed", 0)), eps2, **kw)


PIPELINES = {
    "proposed": _proposed,
    "line_trajectory": baseline_line_trajectory,
    "no_irs": baseline_no_irs,
}


def run_pipeline(name: str, s: Scenario, **kw):
    try:
        fn = PIPELINES[name]
    except KeyError:
        raise ValueError(f"unknown pipeline {name!r}; choose from {sorted(PIPELINES)}") from None
    return fn(s, **kw)
