"""Equivalent impedance of the piezo capacitance plus interface circuit.

Impedances are normalized by 1/(w C_p) in the electrical domain, which is the
same as normalizing the mechanical image by alpha**2/(w C_p).  In those units
the bare capacitance is -j and the results do not depend on I_h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .model import Domain, DomainImpedance, PehSystem, dielectric_damping, impedance_scale, mechanical_impedance
from .optimize import grid_coordinate_descent
from .waveforms import (
    PI,
    PiecewiseVoltage,
    Topology,
    TuningPoint,
    energy_split,
    half_period_segments,
    second_bounds,
    segment_fourier,
    synthesize_vp,
)

DEFAULT_PHI_POINTS = 181
DEFAULT_SECOND_POINTS = 201


def fundamental_harmonic(wave: PiecewiseVoltage, omega: float | None = None) -> complex:
    """Fundamental phasor of v_p (V) referenced to i_h = I_h sin(wt).

    With v_f = B sin(wt) + A cos(wt) the phasor is B + jA, so a capacitor
    (v = -V_oc cos wt) maps to -j V_oc.  ``omega`` is accepted for symmetry
    with the time-domain API; the analytic result is angle-based.
    """
    segs = wave.segments
    i_sin, i_cos = segment_fourier(np.array([s.start for s in segs]), np.array([s.end for s in segs]),
                                   np.array([s.a for s in segs]), np.array([s.b for s in segs]))
    return wave.voc * complex(i_sin.sum(), i_cos.sum()) / PI


def fundamental_harmonic_quad(wave: PiecewiseVoltage) -> complex:
    """Same phasor as :func:`fundamental_harmonic` by adaptive quadrature."""
    re = im = 0.0
    for s in wave.segments:
        if s.end <= s.start:
            continue
        f = lambda t, s=s: s.a + s.b * math.cos(t)  # noqa: E731
        re += quad(lambda t: f(t) * math.sin(t), s.start, s.end, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
        im += quad(lambda t: f(t) * math.cos(t), s.start, s.end, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    return wave.voc * complex(re, im) / PI


@dataclass(frozen=True)
class EquivalentImpedance:
    """Z_e with its regenerative / dissipative / reactive decomposition.

    ``r_h``, ``r_d`` and ``c_e`` are electrical-domain quantities; the
    mechanical images are available as ``d_h``, ``d_d`` and ``k_e`` (so that
    Z_e,mech = D_d + D_h - jK_e/w).
    """

    z_e: DomainImpedance
    r_h: float
    r_d: float
    c_e: float
    omega: float
    tuning: TuningPoint | None = None

    @property
    def electrical(self) -> complex:
        return self.z_e.to_electrical().value

    @property
    def mechanical(self) -> complex:
        return self.z_e.to_mechanical().value

    @property
    def d_h(self) -> float:
        return self.z_e.alpha**2 * self.r_h

    @property
    def d_d(self) -> float:
        return self.z_e.alpha**2 * self.r_d

    @property
    def k_e(self) -> float:
        return -self.omega * self.mechanical.imag


def equivalent_impedance(sys: PehSystem, tuning: TuningPoint, omega: float, i_h_mag: float = 1e-6) -> EquivalentImpedance:
    """Describing-function impedance of C_p plus circuit at ``tuning``."""
    voc = i_h_mag / (omega * sys.Cp)
    wave = synthesize_vp(tuning, sys.gamma, voc)
    z_elec = fundamental_harmonic(wave, omega) / i_h_mag
    e_h, e_d = energy_split(wave, i_h_mag, omega)
    period = 2.0 * PI / omega
    r_h = 2.0 * e_h / (period * i_h_mag**2)
    r_d = 2.0 * e_d / (period * i_h_mag**2)
    c_e = math.inf if z_elec.imag == 0 else -1.0 / (omega * z_elec.imag)
    return EquivalentImpedance(DomainImpedance(z_elec, Domain.ELECTRICAL, sys.alpha), r_h, r_d, c_e, omega, tuning)


def harvested_fraction_grid(topology: Topology, phi, second, gamma: float):
    """Vectorized harvested energy per period in units of C_p V_oc**2."""
    topology = Topology(topology)
    start, end, a, b, v0, v1, vr, is_open = half_period_segments(topology, phi, second, gamma)
    if topology is Topology.SECE:
        e = v0 * v0
    elif topology is Topology.S_SSHI:
        e = 2.0 * vr * (v0 - v1)
    elif topology is Topology.SEH:
        e = 4.0 * vr * (1.0 - vr)
    else:
        phi_b = np.broadcast_to(np.asarray(phi, dtype=float), vr.shape)
        dq = np.cos(np.broadcast_to(second, vr.shape)) + np.where(phi_b <= 0, np.cos(phi_b), 1.0)
        e = 2.0 * vr * dq
    # clip rounding-level negatives at the open-circuit edge
    return np.where(is_open, 0.0, np.maximum(e, 0.0))


def impedance_grid(topology: Topology, phi, second, gamma: float):
    """Normalized (Z_e, R_h) for arrays of tunings.

    Both are in units of 1/(w C_p).  Uses the half-wave symmetry: the full
    period integral is twice the first half.
    """
    start, end, a, b, *_ = half_period_segments(topology, phi, second, gamma)
    i_sin, i_cos = segment_fourier(start, end, a, b)
    z = (2.0 / PI) * (i_sin.sum(axis=-1) + 1j * i_cos.sum(axis=-1))
    h = harvested_fraction_grid(topology, phi, second, gamma) / PI
    return z, h


def impedance_grid_unit(topology: Topology, phi, s, gamma: float):
    """:func:`impedance_grid` with the second parameter given as s in [0, 1]."""
    topology = Topology(topology)
    if topology is Topology.SECE:
        return impedance_grid(topology, phi, None, gamma)
    lo, hi = second_bounds(topology, phi)
    return impedance_grid(topology, phi, lo + np.asarray(s) * (hi - lo), gamma)


def sshi_circle(gamma: float) -> tuple[complex, float]:
    """Normalized (center, radius) of the PV-SSHI extreme-load circle."""
    if gamma == -1.0:
        raise ValueError("gamma = -1 is singular")
    r = (2.0 / PI) * (1.0 - gamma) / (1.0 + gamma)
    return complex(r, -1.0), r


def sece_circle() -> tuple[complex, float]:
    r = 2.0 / PI
    return complex(r, -1.0), r


def ze_bound_pv_sshi_normalized(phi, gamma: float):
    k = (2.0 / PI) * (1.0 - gamma) / (1.0 + gamma)
    phi = np.asarray(phi, dtype=float)
    return k * (1.0 + np.cos(2 * phi) - 1j * np.sin(2 * phi)) - 1j


def ze_bound_pv_sece_normalized(phi):
    phi = np.asarray(phi, dtype=float)
    return (2.0 / PI) * (1.0 + np.cos(2 * phi) - 1j * np.sin(2 * phi)) - 1j


def _check_phi(phi):
    if np.any(np.abs(np.asarray(phi)) > PI / 2 + 1e-12):
        raise ValueError("phi must lie in [-pi/2, pi/2]")


def ze_bound_pv_sshi(omega: float, phi, gamma: float, sys: PehSystem):
    """Mechanical Z_e,max of PV-S/P-SSHI at the extreme load."""
    _check_phi(phi)
    if gamma == -1.0:
        raise ValueError("gamma = -1 is singular")
    return impedance_scale(sys, omega) * ze_bound_pv_sshi_normalized(phi, gamma)


def ze_bound_pv_sece(omega: float, phi, sys: PehSystem):
    """Mechanical Z_e of PV-SECE (a circle, SECE has no other tunable)."""
    _check_phi(phi)
    return impedance_scale(sys, omega) * ze_bound_pv_sece_normalized(phi)


@dataclass(frozen=True)
class AttainableRegion:
    """Sampled set of normalized impedances a circuit can present."""

    kind: str  # "point" | "curve_1d" | "disk_boundary_2d"
    samples: np.ndarray
    phi: np.ndarray
    second: np.ndarray
    closed_form: tuple[complex, float] | None = None
    scale: float = 1.0  # alpha^2/(w C_p): normalized -> mechanical

    @property
    def mechanical(self) -> np.ndarray:
        return self.samples * self.scale


def attainable_region(
    sys: PehSystem,
    topology: Topology,
    omega: float,
    pv_enabled: bool = True,
    phi_points: int = DEFAULT_PHI_POINTS,
    second_points: int = DEFAULT_SECOND_POINTS,
) -> AttainableRegion:
    """Sample the impedance set reachable by ``topology``."""
    if phi_points < 16 or second_points < 16:
        raise ValueError("resolution must be at least 16 points per axis")
    topology = Topology(topology)
    gamma = sys.gamma
    scale = impedance_scale(sys, omega)
    pv = pv_enabled and topology.phase_variable
    phis = np.linspace(-PI / 2, PI / 2, phi_points) if pv else np.zeros(1)
    if topology is Topology.SECE:
        z, _ = impedance_grid(topology, phis, None, gamma)
        kind = "curve_1d" if pv else "point"
        closed = sece_circle() if pv else None
        return AttainableRegion(kind, z, phis, np.full_like(phis, np.nan), closed, scale)
    s = np.linspace(0.0, 1.0, second_points)
    P, S = np.meshgrid(phis, s, indexing="ij")
    lo, hi = second_bounds(topology, P)
    second = lo + S * (hi - lo)
    z, _ = impedance_grid(topology, P, second, gamma)
    kind = "disk_boundary_2d" if pv else "curve_1d"
    closed = sshi_circle(gamma) if (pv and topology in (Topology.S_SSHI, Topology.P_SSHI)) else None
    return AttainableRegion(kind, z.ravel(), P.ravel(), second.ravel(), closed, scale)


def leakage_target(sys: PehSystem, omega: float) -> complex:
    """Mechanical Z_e that maximizes power into Z_e with D_p in parallel.

    The source seen by Z_e is the resonator in parallel with D_p, so the
    matched load is the conjugate of that combination.
    """
    z_m = mechanical_impedance(sys, omega).value
    d_p = dielectric_damping(sys)
    y = 1.0 / z_m.conjugate() + (0.0 if math.isinf(d_p) else 1.0 / d_p)
    return 1.0 / y


@dataclass(frozen=True)
class MatchReport:
    topology: Topology
    pv_enabled: bool
    omega: float
    target: complex  # mechanical
    target_normalized: complex
    distance_normalized: float
    distance_relative: float  # distance / |Z_m| (both normalized)
    feasible: bool
    closest: complex  # normalized
    closest_tuning: TuningPoint | None
    seh_intersections: int | None = None
    tolerance: float = 0.01
    extras: dict = field(default_factory=dict)


def _closest_point(sys, topology, pv, target_n, region: AttainableRegion):
    d = np.abs(region.samples - target_n)
    k = int(np.argmin(d))
    best = region.samples[k]
    best_phi, best_second = float(region.phi[k]), float(region.second[k])
    if region.kind == "point":
        return best, float(d[k]), TuningPoint(topology, 0.0)
    gamma = sys.gamma
    phi_b = (-PI / 2, PI / 2) if pv else (0.0, 0.0)

    if topology is Topology.SECE:
        def obj(p):
            z, _ = impedance_grid(topology, p, None, gamma)
            return np.abs(z - target_n)
        x, dist, _ = grid_coordinate_descent(obj, [phi_b], [181], rounds=6)
        z, _ = impedance_grid(topology, x[0], None, gamma)
        return complex(z), float(dist), TuningPoint(topology, float(x[0]))

    def obj(p, s):
        z, _ = impedance_grid_unit(topology, p, s, gamma)
        return np.abs(z - target_n)
    x, dist, _ = grid_coordinate_descent(obj, [phi_b, (0.0, 1.0)], [91 if pv else 1, 201], rounds=6)
    if dist > d[k]:
        return best, float(d[k]), TuningPoint(topology, best_phi, best_second)
    z, _ = impedance_grid_unit(topology, x[0], x[1], gamma)
    return complex(z), float(dist), TuningPoint.from_unit(topology, float(x[0]), float(x[1]))


def _polyline_intersections(p: np.ndarray, q: np.ndarray) -> int:
    """Number of proper crossings between two complex polylines."""
    a0, a1 = p[:-1], p[1:]
    b0, b1 = q[:-1], q[1:]
    A0 = a0[:, None]
    dA = (a1 - a0)[:, None]
    B0 = b0[None, :]
    dB = (b1 - b0)[None, :]

    def cross(u, v):
        return u.real * v.imag - u.imag * v.real

    den = cross(dA, dB)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = cross(B0 - A0, dB) / den
        u = cross(B0 - A0, dA) / den
    hit = (den != 0) & (t >= 0) & (t < 1) & (u >= 0) & (u < 1)
    return int(np.count_nonzero(hit))


def seh_locus_intersections(sys: PehSystem, omega_lo: float, omega_hi: float, points: int = 4001) -> int:
    """Count frequencies where the matching target crosses the SEH curve."""
    omegas = np.linspace(omega_lo, omega_hi, points)
    target = np.array([leakage_target(sys, w) / impedance_scale(sys, w) for w in omegas])
    z_seh, _ = impedance_grid(Topology.SEH, 0.0, np.linspace(0.0, 1.0, points), sys.gamma)
    return _polyline_intersections(target, z_seh)


def match_report(
    sys: PehSystem,
    topology: Topology,
    omega: float,
    pv_enabled: bool = True,
    tolerance: float = 0.01,
    intersection_window: tuple[float, float] = (0.5, 1.5),
) -> MatchReport:
    """Distance from the attainable region to the power-matching target."""
    topology = Topology(topology)
    scale = impedance_scale(sys, omega)
    target = leakage_target(sys, omega)
    target_n = target / scale
    z_m_n = mechanical_impedance(sys, omega).value / scale
    region = attainable_region(sys, topology, omega, pv_enabled)
    pv = pv_enabled and topology.phase_variable
    closest, dist, tuning = _closest_point(sys, topology, pv, target_n, region)
    rel = dist / abs(z_m_n)
    inter = None
    if topology is Topology.SEH:
        wn = sys.omega_n
        inter = seh_locus_intersections(sys, intersection_window[0] * wn, intersection_window[1] * wn)
    return MatchReport(topology, pv_enabled, omega, target, target_n, dist, rel, rel <= tolerance,
                       closest, tuning, inter, tolerance)
