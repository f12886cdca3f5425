"""Static problem description, configuration loading and the straight-line trajectory.

Slots are indexed ``n = 0..N``: ``q[0]`` is the start point, ``q[N]`` the end
point, and slots ``1..N`` carry the rate terms.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

__all__ = [
    "ConfigError",
    "ValidationError",
    "Position3",
    "IrsGrid",
    "Scenario",
    "Trajectory",
    "SolverSettings",
    "load_scenario",
    "load_settings",
    "parse_scenario",
    "line_trajectory",
    "line_deviation",
    "power_feasible",
    "phases_feasible",
    "TOL_FEAS",
]

TOL_FEAS = 1e-8

DEFAULT_WAVELENGTH = 0.125

SCENARIO_KEYS = (
    "q_start", "q_end", "q_g", "q_m", "q_r", "kx", "kz", "element_spacing",
    "h0", "n_slots", "delta_t", "v_max", "p_avg", "p_peak", "p_m", "rho",
    "sigma2", "lambda",
)
SETTINGS_KEYS = ("eps1", "eps2", "n_samples", "max_outer")


class ConfigError(ValueError):
    """Configuration file is missing or malformed."""


class ValidationError(ValueError):
    """Configuration parsed but violates a scenario invariant."""


@dataclass(frozen=True)
class Position3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise ValidationError(f"position coordinate {name} is not finite")
            object.__setattr__(self, name, val)

    @property
    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @classmethod
    def parse(cls, text: str) -> "Position3":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise ConfigError(f"expected a comma-separated triple, got {text!r}")
        try:
            return cls(*(float(p) for p in parts))
        except ValueError as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ConfigError(f"bad number in position {text!r}") from exc

    def __str__(self) -> str:
        return f"{self.x:g},{self.y:g},{self.z:g}"


@dataclass(frozen=True)
class IrsGrid:
    """Uniform planar array of ``kx * kz`` elements in the x-z plane."""

    kx: int
    kz: int
    element_spacing: float
    origin: Position3

    def __post_init__(self):
        if int(self.kx) < 1 or int(self.kz) < 1:
            raise ValidationError("IRS grid needs kx >= 1 and kz >= 1")
        if not self.element_spacing > 0:
            raise ValidationError("element_spacing must be positive")

    @property
    def size(self) -> int:
        return self.kx * self.kz


@dataclass(frozen=True)
class Scenario:
    """Immutable problem instance. ``irs=None`` means no IRS (K = 0)."""

    q_start: Position3
    q_end: Position3
    q_g: Position3
    q_m: Position3
    irs: Optional[IrsGrid]
    h0: float
    n_slots: int
    delta_t: float
    v_max: float
    p_avg: float
    p_peak: float
    p_m: float
    rho: float
    sigma2: float
    wavelength: float = DEFAULT_WAVELENGTH

    def __post_init__(self):
        self.validate()

    @property
    def K(self) -> int:
        return 0 if self.irs is None else self.irs.size

    @property
    def horizon(self) -> float:
        return self.n_slots * self.delta_t

    @property
    def max_step(self) -> float:
        return self.v_max * self.delta_t

    def validate(self) -> None:
        tol = 1e-9 * max(1.0, abs(self.h0))
        if abs(self.q_start.z - self.h0) > tol or abs(self.q_end.z - self.h0) > tol:
            raise ValidationError("q_start and q_end must lie at altitude h0")
        if self.q_g.z != 0 or self.q_m.z != 0:
            raise ValidationError("q_g and q_m must lie on the ground (z = 0)")
        if not self.h0 > 0:
            raise ValidationError("h0 must be positive")
        if int(self.n_slots) != self.n_slots or self.n_slots < 1:
            raise ValidationError("n_slots must be a positive integer")
        if not (self.delta_t > 0 and self.v_max > 0):
            raise ValidationError("delta_t and v_max must be positive")
        if not self.p_avg > 0:
            raise ValidationError("P_avg must be positive")
        if self.p_avg > self.p_peak:
            raise ValidationError("P_avg exceeds P_peak")
        if self.p_m < 0:
            raise ValidationError("P_M must be nonnegative")
        if not self.sigma2 > 0:
            raise ValidationError("sigma2 must be positive")
        if not self.rho > 0:
            raise ValidationError("rho must be positive")
        if not self.wavelength > 0:
            raise ValidationError("lambda must be positive")
        if self.irs is not None and self.irs.origin.z >= self.h0:
            raise ValidationError("IRS must sit below the UAV altitude h0")
        dist = float(np.linalg.norm(self.q_end.array - self.q_start.array))
        budget = self.n_slots * self.delta_t * self.v_max
        if dist > budget * (1 + 1e-12):
            raise ValidationError(
                f"endpoint unreachable: |q_end - q_start| = {dist:g} m exceeds "
                f"N*delta_t*V_max = {budget:g} m")

    def with_irs(self, irs: Optional[IrsGrid]) -> "Scenario":
        from dataclasses import replace
        return replace(self, irs=irs)

    def with_jamming(self, p_m: float) -> "Scenario":
        from dataclasses import replace
        return replace(self, p_m=float(p_m))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Horizontal UAV positions ``xy[n]`` for ``n = 0..N`` at altitude ``h0``."""

    xy: np.ndarray
    h0: float

    def __post_init__(self):
        xy = np.array(self.xy, dtype=float)
        xy.setflags(write=False)
        object.__setattr__(self, "xy", xy)

    @property
    def n_slots(self) -> int:
        return self.xy.shape[0] - 1

    def slot_positions(self) -> np.ndarray:
        """(N, 3) UAV positions for the rate-carrying slots 1..N."""
        pts = self.xy[1:]
        return np.column_stack([pts, np.full(len(pts), self.h0)])

    def steps(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.xy, axis=0), axis=1)

    def is_feasible(self, s: Scenario, tol: float = TOL_FEAS) -> bool:
        if self.xy.shape != (s.n_slots + 1, 2):
            return False
        ends_ok = (np.allclose(self.xy[0], [s.q_start.x, s.q_start.y], atol=tol, rtol=0)
                   and np.allclose(self.xy[-1], [s.q_end.x, s.q_end.y], atol=tol, rtol=0))
        return bool(ends_ok and np.all(self.steps() <= s.max_step + tol))


@dataclass(frozen=True)
class SolverSettings:
    eps1: float = 1e-3
    eps2: float = 1e-3
    n_samples: int = 200
    max_outer: int = 100


def line_trajectory(s: Scenario) -> Trajectory:
    frac = np.arange(s.n_slots + 1)[:, None] / s.n_slots
    a = np.array([s.q_start.x, s.q_start.y])
    b = np.array([s.q_end.x, s.q_end.y])
    xy = a + frac * (b - a)
    xy[-1] = b
    return Trajectory(xy, s.h0)


def line_deviation(s: Scenario, xy) -> np.ndarray:
    """Perpendicular horizontal distance of each point to the start-end line."""
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    a = np.array([s.q_start.x, s.q_start.y])
    d = np.array([s.q_end.x, s.q_end.y]) - a
    length = np.linalg.norm(d)
    if length == 0:
        return np.linalg.norm(xy - a, axis=1)
    rel = xy - a
    return np.abs(rel[:, 0] * d[1] - rel[:, 1] * d[0]) / length


def power_feasible(s: Scenario, p: np.ndarray, tol: float = TOL_FEAS) -> bool:
    p = np.asarray(p, dtype=float)
    return bool(p.shape == (s.n_slots,) and np.all(p >= -tol)
                and np.all(p <= s.p_peak + tol) and p.mean() <= s.p_avg + tol)


def phases_feasible(s: Scenario, v: np.ndarray, tol: float = 1e-12) -> bool:
    v = np.asarray(v)
    return bool(v.shape == (s.n_slots, s.K + 1)
                and np.all(np.abs(np.abs(v) - 1) <= tol) and np.all(v[:, -1] == 1))


def _read_pairs(text: str, source: str) -> dict:
    parser = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",),
        interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string("[top]\n" + text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return {k.strip().lower(): v.strip() for k, v in parser["top"].items()}


def _number(pairs: dict, key: str, kind=float, default=None):
    if key not in pairs:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return kind(pairs[key])
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: cannot parse {pairs[key]!r}") from exc


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    pairs = _read_pairs(text, source)
    unknown = set(pairs) - set(SCENARIO_KEYS) - set(SETTINGS_KEYS)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}")
    for key in ("q_start", "q_end", "q_g", "q_m"):
        if key not in pairs:
            raise ConfigError(f"missing required key {key!r}")
    wavelength = _number(pairs, "lambda", default=DEFAULT_WAVELENGTH)
    kx = _number(pairs, "kx", int)
    kz = _number(pairs, "kz", int)
    if kx < 0 or kz < 0:
        raise ValidationError("kx and kz must be nonnegative")
    irs = None
    if kx * kz > 0:
        if "q_r" not in pairs:
            raise ConfigError("missing required key 'q_r'")
        irs = IrsGrid(kx, kz, _number(pairs, "element_spacing", default=wavelength / 2),
                      Position3.parse(pairs["q_r"]))
    return Scenario(
        q_start=Position3.parse(pairs["q_start"]),
        q_end=Position3.parse(pairs["q_end"]),
        q_g=Position3.parse(pairs["q_g"]),
        q_m=Position3.parse(pairs["q_m"]),
        irs=irs,
        h0=_number(pairs, "h0"),
        n_slots=_number(pairs, "n_slots", int),
        delta_t=_number(pairs, "delta_t"),
        v_max=_number(pairs, "v_max"),
        p_avg=_number(pairs, "p_avg"),
        p_peak=_number(pairs, "p_peak"),
        p_m=_number(pairs, "p_m"),
        rho=_number(pairs, "rho"),
        sigma2=_number(pairs, "sigma2"),
        wavelength=wavelength,
    )


def _read_text(path) -> str:
    path = Path(path)
    try:
        return path.read_text()
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def load_scenario(path) -> Scenario:
    """Read and validate a flat ``key = value`` scenario file."""
    return parse_scenario(_read_text(path), source=str(path))


def load_settings(path) -> SolverSettings:
    """Optional solver keys (eps1, eps2, n_samples, max_outer) from a scenario file."""
    pairs = _read_pairs(_read_text(path), str(path))
    base = SolverSettings()
    return SolverSettings(
        eps1=_number(pairs, "eps1", default=base.eps1),
        eps2=_number(pairs, "eps2", default=base.eps2),
        n_samples=_number(pairs, "n_samples", int, default=base.n_samples),
        max_outer=_number(pairs, "max_outer", int, default=base.max_outer),
    )


def format_scenario(s: Scenario) -> str:
    """Inverse of :func:`parse_scenario`."""
    lines = [
        f"q_start = {s.q_start}",
        f"q_end = {s.q_end}",
        f"q_g = {s.q_g}",
        f"q_m = {s.q_m}",
    ]
    if s.irs is None:
        lines += ["kx = 0", "kz = 0"]
    else:
        lines += [f"q_r = {s.irs.origin}", f"kx = {s.irs.kx}", f"kz = {s.irs.kz}",
                  f"element_spacing = {s.irs.element_spacing!r}"]
    lines += [
        f"h0 = {s.h0!r}", f"n_slots = {s.n_slots}", f"delta_t = {s.delta_t!r}",
        f"v_max = {s.v_max!r}", f"p_avg = {s.p_avg!r}", f"p_peak = {s.p_peak!r}",
        f"p_m = {s.p_m!r}", f"rho = {s.rho!r}", f"sigma2 = {s.sigma2!r}",
        f"lambda = {s.wavelength!r}",
    ]
    return "\n".join(lines) + "\n"
