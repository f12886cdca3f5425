"""Deterministic LoS channels and the average-rate objective."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .scenario import IrsGrid, Position3, Scenario, Trajectory

__all__ = [
    "DegenerateGeometryError",
    "SlotChannels",
    "IrsLinks",
    "direct_channel",
    "upa_response",
    "irs_links",
    "slot_channels",
    "batch_channels",
    "gains",
    "average_rate",
    "evaluate_rate",
]


class DegenerateGeometryError(ValueError):
    pass


def _as_xyz(p) -> np.ndarray:
    if isinstance(p, Position3):
        return p.array
    return np.asarray(p, dtype=float)


def direct_channel(tx, rx, rho: float, wavelength: float) -> complex:
    """sqrt(rho / d^2) * exp(-j 2 pi d / lambda) for a single link."""
    d = float(np.linalg.norm(_as_xyz(rx) - _as_xyz(tx)))
    if d == 0:
        raise DegenerateGeometryError("transmitter and receiver coincide")
    return complex(np.sqrt(rho) / d * np.exp(-2j * np.pi * d / wavelength))


def _upa_batch(nodes: np.ndarray, grid: IrsGrid, wavelength: float):
    """Unit-modulus UPA responses for an (M, 3) batch of nodes; returns (M, K), distances."""
    offs = nodes - grid.origin.array
    dist = np.linalg.norm(offs, axis=1)
    if np.any(dist == 0):
        raise DegenerateGeometryError("node coincides with the IRS")
    k = 2 * np.pi * grid.element_spacing / wavelength
    # angle conventions: x-steering driven by the vertical offset, z-steering by the x offset
    alpha_x = k * offs[:, 2] / dist
    alpha_z = k * offs[:, 0] / dist
    mx = np.exp(-1j * alpha_x[:, None] * np.arange(grid.kx))
    mz = np.exp(-1j * alpha_z[:, None] * np.arange(grid.kz))
    kron = (mx[:, :, None] * mz[:, None, :]).reshape(len(nodes), grid.size)
    return np.exp(-2j * np.pi * dist / wavelength)[:, None] * kron, dist


def upa_response(node, grid: IrsGrid, wavelength: float) -> np.ndarray:
    """Phase response exp(-j 2 pi d_R / lambda) * (m_x kron m_z) of length K."""
    g, _ = _upa_batch(_as_xyz(node)[None, :], grid, wavelength)
    return g[0]


@dataclass(frozen=True, eq=False)
class IrsLinks:
    """Position-independent ground-to-IRS channels (computed once per scenario)."""

    h_gr: np.ndarray
    h_mr: np.ndarray
    d_gr: float
    d_mr: float
    g_gr: np.ndarray
    g_mr: np.ndarray


@lru_cache(maxsize=64)
def irs_links(s: Scenario) -> IrsLinks | None:
    if s.irs is None:
        return None
    nodes = np.stack([s.q_g.array, s.q_m.array])
    g, d = _upa_batch(nodes, s.irs, s.wavelength)
    amp = np.sqrt(s.rho) / d
    h = amp[:, None] * g
    for arr in (h, g):
        arr.setflags(write=False)
    return IrsLinks(h[0], h[1], float(d[0]), float(d[1]), g[0], g[1])


@dataclass(frozen=True, eq=False)
class SlotChannels:
    h_gu: complex
    h_mu: complex
    h_ru: np.ndarray
    h_gr: np.ndarray
    h_mr: np.ndarray
    h_g: complex
    h_m: complex
    a: float
    b: float


@dataclass(frozen=True, eq=False)
class BatchChannels:
    """Per-slot channels for N slots at once (rows are slots)."""

    h_gu: np.ndarray
    h_mu: np.ndarray
    h_ru: np.ndarray  # (N, K)
    d_gu: np.ndarray
    d_mu: np.ndarray
    d_ru: np.ndarray
    h_g: np.ndarray
    h_m: np.ndarray
    a: np.ndarray
    b: np.ndarray


def batch_channels(s: Scenario, positions: np.ndarray, v: np.ndarray) -> BatchChannels:
    """Channels at UAV ``positions`` (N, 3) under reflection vectors ``v`` (N, K+1)."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    v = np.atleast_2d(np.asarray(v))
    n = len(positions)
    d_gu = np.linalg.norm(positions - s.q_g.array, axis=1)
    d_mu = np.linalg.norm(positions - s.q_m.array, axis=1)
    if np.any(d_gu == 0) or np.any(d_mu == 0):
        raise DegenerateGeometryError("UAV coincides with a ground node")
    sr = np.sqrt(s.rho)
    h_gu = sr / d_gu * np.exp(-2j * np.pi * d_gu / s.wavelength)
    h_mu = sr / d_mu * np.exp(-2j * np.pi * d_mu / s.wavelength)
    links = irs_links(s)
    if links is None:
        h_ru = np.zeros((n, 0), dtype=complex)
        d_ru = np.full(n, np.inf)
        h_g, h_m = h_gu, h_mu
    else:
        g_ru, d_ru = _upa_batch(positions, s.irs, s.wavelength)
        h_ru = (sr / d_ru)[:, None] * g_ru
        theta = v[:, :-1]
        h_g = h_gu + (h_ru * theta) @ links.h_gr.conj()
        h_m = h_mu + (h_ru * theta) @ links.h_mr.conj()
    a = np.abs(h_g) ** 2
    b = s.p_m * np.abs(h_m) ** 2 + s.sigma2
    return BatchChannels(h_gu, h_mu, h_ru, d_gu, d_mu, d_ru, h_g, h_m, a, b)


def slot_channels(s: Scenario, q_uav, v) -> SlotChannels:
    """All channel quantities for one UAV position and one reflection vector."""
    v = np.asarray(v)
    if v.shape != (s.K + 1,):
        raise ValueError(f"reflection vector must have length K+1 = {s.K + 1}")
    bc = batch_channels(s, _as_xyz(q_uav)[None, :], v[None, :])
    links = irs_links(s)
    empty = np.zeros(0, dtype=complex)
    return SlotChannels(
        h_gu=complex(bc.h_gu[0]), h_mu=complex(bc.h_mu[0]), h_ru=bc.h_ru[0],
        h_gr=empty if links is None else links.h_gr,
        h_mr=empty if links is None else links.h_mr,
        h_g=complex(bc.h_g[0]), h_m=complex(bc.h_m[0]),
        a=float(bc.a[0]), b=float(bc.b[0]))


def gains(s: Scenario, traj: Trajectory, v: np.ndarray):
    """Per-slot (a, b) for slots 1..N."""
    bc = batch_channels(s, traj.slot_positions(), v)
    return bc.a, bc.b


def average_rate(p, a, b) -> float:
    """(1/N) * sum log2(1 + p a / b) in bits/s/Hz."""
    p, a, b = (np.asarray(x, dtype=float) for x in (p, a, b))
    if not p.shape == a.shape == b.shape:
        raise ValueError("power and gain arrays must have equal length")
    return float(np.mean(np.log2(1.0 + p * a / b)))


def evaluate_rate(s: Scenario, traj: Trajectory, p, v) -> float:
    a, b = gains(s, traj, v)
    return average_rate(p, a, b)
