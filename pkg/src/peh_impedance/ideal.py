"""Ideal kinetic-energy-harvester models.

The conventional model only has a tunable harvesting damping D_h; the
generalized model adds a tunable reactive element K_e (stiffness when
positive, mass when negative) so the load can be conjugate matched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .model import PehSystem, excitation_force


@dataclass(frozen=True)
class IdealParams:
    zeta: float
    eta: float
    omega_tilde: float

    def __post_init__(self):
        if not self.zeta > 0:
            raise ValueError("zeta must be positive")
        if not self.eta >= 0:
            raise ValueError("eta must be non-negative")
        if not self.omega_tilde > 0:
            raise ValueError("omega_tilde must be positive")


@dataclass(frozen=True)
class HalfPowerBand:
    """Half-power roots of the normalized power curve."""

    lower: float
    upper: float
    closed_form: float
    two_sided: bool

    @property
    def width(self) -> float:
        return self.upper - self.lower


def beta_r(eta):
    """Resonant harvested power over the bare-resonator damping power."""
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < 0):
        raise ValueError("eta must be non-negative")
    out = eta / (1.0 + eta) ** 2
    return float(out) if out.ndim == 0 else out


def beta_o(params: IdealParams) -> float:
    """Harvested power at omega_tilde normalized by its resonant value."""
    w, c = params.omega_tilde, (1.0 + params.eta) * params.zeta
    num = (2.0 * w * c) ** 2
    return num / ((1.0 - w * w) ** 2 + num)


def half_power_bandwidth(eta, zeta):
    """Closed-form normalized half-power bandwidth 2(1 + eta)zeta."""
    return 2.0 * (1.0 + np.asarray(eta, dtype=float)) * np.asarray(zeta, dtype=float)


def half_power_roots(eta: float, zeta: float, upper_limit: float = 4.0) -> HalfPowerBand:
    """Locate both roots of beta_o = 1/2 by bracketed bisection.

    The lower root is searched in (0, 1) and the upper one in (1, upper_limit].
    ``|1 - w^2| - 2 w (1 + eta) zeta`` has the same roots as beta_o - 1/2 and
    is far better conditioned near them.
    """
    c = (1.0 + eta) * zeta

    def f(w):
        return abs(1.0 - w * w) - 2.0 * w * c

    eps = np.finfo(float).eps
    lo = bisect(f, 1e-300, 1.0, xtol=1e-300, rtol=4 * eps, maxiter=2000)
    two_sided = f(upper_limit) > 0
    hi = bisect(f, 1.0, upper_limit, xtol=1e-300, rtol=4 * eps, maxiter=2000) if two_sided else math.nan
    return HalfPowerBand(lo, hi, float(half_power_bandwidth(eta, zeta)), two_sided)


def power_limits(sys: PehSystem) -> tuple[float, float]:
    """(P_m_max, P_h_max): bare damping power at resonance and its quarter."""
    f = excitation_force(sys)
    p_m = f * f / (2.0 * sys.D)
    return p_m, f * f / (8.0 * sys.D)


def conjugate_match(sys: PehSystem, omega: float) -> tuple[float, float]:
    """Load (D_h, K_e) with D_h - jK_e/omega equal to conj(Z_m)."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    return sys.D, omega * omega * sys.M - sys.K


def ideal_power(sys: PehSystem, omega, d_h, k_e):
    """Power in D_h for the two-parameter ideal model driven by F sin(wt)."""
    f = excitation_force(sys)
    omega = np.asarray(omega, dtype=float)
    z_m = sys.D + 1j * (omega * sys.M - sys.K / omega)
    z_load = d_h - 1j * np.asarray(k_e) / omega
    return 0.5 * f * f * d_h / np.abs(z_m + z_load) ** 2


def sweep_table(etas, zetas) -> list[dict]:
    """Rows of (eta, zeta, beta_r, bandwidth) for the outer product of grids."""
    rows = []
    for eta in etas:
        for zeta in zetas:
            rows.append({
                "eta": float(eta),
                "zeta": float(zeta),
                "beta_r": float(beta_r(eta)),
                "bandwidth": float(half_power_bandwidth(eta, zeta)),
            })
    return rows
