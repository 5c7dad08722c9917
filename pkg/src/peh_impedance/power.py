"""Harvested power through the resonator / circuit / leakage network.

The resonator Z_m drives Z_e in parallel with the leakage damping D_p
(mechanical domain).  Only the regenerative part D_h of Z_e counts as
harvested power.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .ideal import ideal_power
from .impedance import impedance_grid, impedance_grid_unit
from .model import PehSystem, dielectric_damping, excitation_force, impedance_scale
from .optimize import grid_coordinate_ascent
from .waveforms import PI, Topology, TuningPoint, second_bounds

COARSE_PHI = 37
COARSE_SECOND = 41


def network_power(z_m, z_e, d_h, d_p, force):
    """Power dissipated in D_h (W), all impedances mechanical.

    ``F^2 D_h / 2 * |D_p / (Z_m D_p + Z_m Z_e + Z_e D_p)|^2``, reducing to
    ``F^2 D_h / 2 / |Z_m + Z_e|^2`` when D_p is infinite.
    """
    if np.any(np.asarray(force) < 0):
        raise ValueError("force must be non-negative")
    z_m, z_e, d_h = np.asarray(z_m), np.asarray(z_e), np.asarray(d_h)
    if math.isinf(d_p):
        den = z_m + z_e
        gain = 1.0 / np.abs(den) ** 2
    else:
        den = z_m * d_p + z_m * z_e + z_e * d_p
        gain = (d_p / np.abs(den)) ** 2
    if np.any(den == 0):
        raise ZeroDivisionError("network denominator vanished")
    out = 0.5 * force * force * d_h * gain
    return float(out) if np.ndim(out) == 0 else out


def harvested_power(z_m, z_e, d_p: float, force: float) -> float:
    """Harvested power for an :class:`EquivalentImpedance` ``z_e``.

    ``z_m`` may be a complex number or a DomainImpedance (mechanical).
    """
    zm = getattr(z_m, "to_mechanical", None)
    zm = zm().value if zm else complex(z_m)
    return network_power(zm, z_e.mechanical, z_e.d_h, d_p, force)


def power_limit(sys: PehSystem, omega) -> np.ndarray:
    """Largest power any load in parallel with D_p can draw at ``omega``.

    Without leakage this is F^2/(8D) at every frequency.  With leakage the
    Norton admittance of the source gains 1/D_p and the bound becomes
    F^2 / (8 (D + |Z_m|^2 / D_p)).
    """
    f = excitation_force(sys)
    d_p = dielectric_damping(sys)
    omega = np.asarray(omega, dtype=float)
    if math.isinf(d_p):
        return f * f / (8.0 * sys.D) + 0.0 * omega
    zm2 = sys.D**2 + (omega * sys.M - sys.K / omega) ** 2
    return f * f / (8.0 * (sys.D + zm2 / d_p))


def normalized_power(sys: PehSystem, omega: float, z_n, h_n):
    """Power for normalized impedance arrays at a single frequency."""
    scale = impedance_scale(sys, omega)
    z_m = complex(sys.D, omega * sys.M - sys.K / omega)
    return network_power(z_m, scale * np.asarray(z_n), scale * np.asarray(h_n),
                         dielectric_damping(sys), excitation_force(sys))


def power_at(sys: PehSystem, tuning: TuningPoint, omega: float) -> float:
    """Harvested power of one tuning point."""
    z, h = impedance_grid(tuning.topology, tuning.phi, tuning.second, sys.gamma)
    return float(normalized_power(sys, omega, z, h))


@dataclass(frozen=True)
class PowerMap:
    """Harvested power over (omega, phi, s); s spans the second domain.

    Arrays are indexed ``[i_omega, i_phi, i_s]``.  ``second`` holds the
    physical second parameter (Vr~ or theta) for each (phi, s).
    """

    topology: Topology
    omega: np.ndarray
    phi: np.ndarray
    s: np.ndarray
    second: np.ndarray
    p_h: np.ndarray
    d_h: np.ndarray
    d_d: np.ndarray
    k_e: np.ndarray


def _tuning_axes(topology: Topology, pv_enabled: bool, phi_grid, s_grid):
    phis = np.atleast_1d(np.asarray(phi_grid, dtype=float)) if (pv_enabled and topology.phase_variable) else np.zeros(1)
    if topology is Topology.SECE:
        return phis, np.zeros(1), np.full((phis.size, 1), np.nan)
    s = np.atleast_1d(np.asarray(s_grid, dtype=float))
    P, S = np.meshgrid(phis, s, indexing="ij")
    lo, hi = second_bounds(topology, P)
    return phis, s, lo + S * (hi - lo)


def sweep(
    sys: PehSystem,
    topology: Topology,
    pv_enabled: bool,
    omegas,
    phi_grid=None,
    s_grid=None,
    workers: int = 1,
) -> PowerMap:
    """Evaluate harvested power on a full (omega x phi x s) grid."""
    topology = Topology(topology)
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    if phi_grid is None:
        phi_grid = np.linspace(-PI / 2, PI / 2, 181)
    if s_grid is None:
        s_grid = np.linspace(0.0, 1.0, 201)
    phis, s, second = _tuning_axes(topology, pv_enabled, phi_grid, s_grid)
    if omegas.size == 0 or phis.size == 0 or s.size == 0:
        raise ValueError("grids must be non-empty")
    P = np.broadcast_to(phis[:, None], second.shape)
    z_n, h_n = impedance_grid(topology, P, None if topology is Topology.SECE else second, sys.gamma)
    d_n = z_n.real - h_n

    def one(w):
        scale = impedance_scale(sys, w)
        p = normalized_power(sys, w, z_n, h_n)
        return p, scale * h_n, scale * d_n, -w * scale * z_n.imag

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(one, omegas))
    else:
        rows = [one(w) for w in omegas]
    p_h, d_h, d_d, k_e = (np.stack([r[k] for r in rows]) for k in range(4))
    return PowerMap(topology, omegas, phis, s, second, p_h, d_h, d_d, k_e)


@dataclass(frozen=True)
class PhaseMap:
    """Power over (omega, phi) with the second parameter maximized on its grid.

    ``second[i, j]`` is the physical second parameter (NaN for SECE) that
    attains ``p_h[i, j]``.
    """

    topology: Topology
    omega: np.ndarray
    phi: np.ndarray
    second: np.ndarray
    p_h: np.ndarray


def phase_map(sys: PehSystem, topology: Topology, pv_enabled: bool, omegas, phi_grid=None, s_grid=None) -> PhaseMap:
    """Grid maximum over the second parameter at every (omega, phi).

    The impedance grid is built once; memory stays O(phi x s).
    """
    topology = Topology(topology)
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    if phi_grid is None:
        phi_grid = np.linspace(-PI / 2, PI / 2, 181)
    if s_grid is None:
        s_grid = np.linspace(0.0, 1.0, 201)
    phis, s, second = _tuning_axes(topology, pv_enabled, phi_grid, s_grid)
    P = np.broadcast_to(phis[:, None], second.shape)
    z_n, h_n = impedance_grid(topology, P, None if topology is Topology.SECE else second, sys.gamma)
    p = np.empty((omegas.size, phis.size))
    best = np.empty((omegas.size, phis.size))
    rows = np.arange(phis.size)
    for i, w in enumerate(omegas):
        grid = normalized_power(sys, w, z_n, h_n)
        k = np.argmax(grid, axis=1)
        p[i] = grid[rows, k]
        best[i] = second[rows, k]
    return PhaseMap(topology, omegas, phis, best, p)


def optimal_at_frequency(
    sys: PehSystem,
    topology: Topology,
    pv_enabled: bool,
    omega: float,
    coarse: tuple[int, int] = (COARSE_PHI, COARSE_SECOND),
    rounds: int = 3,
    shrink: float = 0.2,
    fix_phi: float | None = None,
) -> tuple[TuningPoint, float]:
    """Best tuning at one frequency: coarse grid then coordinate refinement."""
    topology = Topology(topology)
    gamma = sys.gamma
    pv = pv_enabled and topology.phase_variable and fix_phi is None
    phi0 = 0.0 if fix_phi is None else fix_phi
    phi_b = (-PI / 2, PI / 2) if pv else (phi0, phi0)
    n_phi = coarse[0] if pv else 1

    if topology is Topology.SECE:
        def obj(p):
            z, h = impedance_grid(topology, p, None, gamma)
            return normalized_power(sys, omega, z, h)
        x, best, _ = grid_coordinate_ascent(obj, [phi_b], [n_phi], rounds, shrink)
        return TuningPoint(topology, float(x[0])), best

    def obj(p, s):
        z, h = impedance_grid_unit(topology, p, s, gamma)
        return normalized_power(sys, omega, z, h)

    x, best, _ = grid_coordinate_ascent(obj, [phi_b, (0.0, 1.0)], [n_phi, coarse[1]], rounds, shrink)
    return TuningPoint.from_unit(topology, float(x[0]), float(x[1])), best


def optimal_ideal(sys: PehSystem, omega: float, coarse: tuple[int, int] = (41, 41)) -> tuple[float, float, float]:
    """Bypass mode: optimize the ideal two-parameter load (D_h, K_e) directly.

    The search box is D_h in [0, 4D] and K_e within +/- 2K of zero.
    """
    def obj(d_h, k_e):
        return ideal_power(sys, omega, d_h, k_e)

    x, best, _ = grid_coordinate_ascent(obj, [(0.0, 4.0 * sys.D), (-2.0 * sys.K, 2.0 * sys.K)], coarse,
                                        rounds=6, shrink=0.2)
    # the optimum sits on a narrow ridge; polish in scaled coordinates
    scale = np.array([sys.D, sys.K])
    res = minimize(lambda u: -obj(*(u * scale)), x / scale, method="Nelder-Mead",
                   bounds=[(0.0, 4.0), (-2.0, 2.0)], options={"xatol": 1e-10, "fatol": 1e-14 * best})
    if -res.fun > best:
        x, best = res.x * scale, float(-res.fun)
    return float(x[0]), float(x[1]), best


@dataclass(frozen=True)
class Envelope:
    """Per-frequency optimum of harvested power."""

    omega: np.ndarray
    p_h: np.ndarray
    phi: np.ndarray
    second: np.ndarray


def envelope(
    sys: PehSystem,
    topology: Topology,
    pv_enabled: bool,
    omegas,
    fix_phi: float | None = None,
    coarse: tuple[int, int] = (COARSE_PHI, COARSE_SECOND),
    workers: int = 1,
) -> Envelope:
    """Optimal harvested power at every frequency (tuning optimized per omega)."""
    topology = Topology(topology)
    omegas = np.asarray(omegas, dtype=float)

    def one(w):
        return optimal_at_frequency(sys, topology, pv_enabled, w, coarse=coarse, fix_phi=fix_phi)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, omegas))
    else:
        results = [one(w) for w in omegas]
    return Envelope(
        omegas,
        np.array([p for _, p in results]),
        np.array([t.phi for t, _ in results]),
        np.array([np.nan if t.second is None else t.second for t, _ in results]),
    )


@dataclass(frozen=True)
class BandwidthReport:
    peak_power: float
    peak_omega: float
    delta_omega_hm: float
    delta_omega_sr: float
    broadening_ratio: float | None
    truncated: bool  # half-power set touches the grid edge

    def as_dict(self) -> dict:
        return {
            "peak_power_w": self.peak_power,
            "peak_freq_hz": self.peak_omega / (2 * PI),
            "delta_omega_hm_hz": self.delta_omega_hm / (2 * PI),
            "delta_omega_sr_hz": self.delta_omega_sr / (2 * PI),
            "broadening_ratio": self.broadening_ratio,
            "truncated": self.truncated,
        }


def span_above(omega, power, threshold: float) -> tuple[float, bool]:
    """Total length of {omega : P >= threshold}, linear between samples.

    Returns the measure and whether the set touches either grid end.
    """
    omega = np.asarray(omega, dtype=float)
    f = np.asarray(power, dtype=float) - threshold
    total = 0.0
    for i in range(len(f) - 1):
        f0, f1 = f[i], f[i + 1]
        width = omega[i + 1] - omega[i]
        if f0 >= 0 and f1 >= 0:
            total += width
        elif f0 >= 0 > f1:
            total += width * f0 / (f0 - f1)
        elif f1 >= 0 > f0:
            total += width * f1 / (f1 - f0)
    return total, bool(f[0] >= 0 or f[-1] >= 0)


def half_power_span(omega, power) -> tuple[float, bool]:
    power = np.asarray(power, dtype=float)
    if power.size < 3 or not np.all(np.isfinite(power)):
        raise ValueError("need a finite curve with at least 3 samples")
    peak = power.max()
    if peak <= 0 or np.ptp(power) == 0:
        raise ValueError("flat or empty power curve")
    return span_above(omega, power, 0.5 * peak)


def bandwidth_metrics(omega, power, seh_power, phi0_power=None) -> BandwidthReport:
    """Half-power bandwidths of ``power`` and its broadening over ``phi0_power``.

    * delta_omega_hm: measure of P >= peak/2;
    * delta_omega_sr: measure of P >= (SEH peak)/2;
    * broadening_ratio: delta_omega_hm(power) / delta_omega_hm(phi0_power).
    """
    omega = np.asarray(omega, dtype=float)
    power = np.asarray(power, dtype=float)
    seh_power = np.asarray(seh_power, dtype=float)
    hm, trunc = half_power_span(omega, power)
    if seh_power.max() <= 0:
        raise ValueError("flat or empty SEH baseline")
    sr, trunc_sr = span_above(omega, power, 0.5 * seh_power.max())
    ratio = None
    if phi0_power is not None:
        base, trunc_b = half_power_span(omega, phi0_power)
        ratio = hm / base
        trunc = trunc or trunc_b
    k = int(np.argmax(power))
    return BandwidthReport(float(power[k]), float(omega[k]), hm, sr, ratio, trunc or trunc_sr)
