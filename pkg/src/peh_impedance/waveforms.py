"""Steady-state piezoelectric voltage waveforms of switched interface circuits.

All waveforms are driven by a sinusoidal branch current i_h = I_h sin(wt) and
are expressed in units of the open-circuit voltage V_oc = I_h/(w C_p), so one
vibration period reads ``v_p/V_oc = a + b cos(wt)`` piece by piece.  Flips are
instantaneous.  Every circuit here is half-wave antisymmetric, which lets the
synthesis build one half period and mirror it.

Sign convention: the interior voltages follow the 2x2 systems literally, so a
strong flip gives e.g. (V0, V1) = (5, -3) for gamma = -0.6; v_p jumps from
+V0 to V1 at wt = pi + phi and from -V0 to -V1 one half period later.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

PI = math.pi


class Topology(str, enum.Enum):
    SEH = "SEH"
    SECE = "SECE"
    S_SSHI = "S-SSHI"
    P_SSHI = "P-SSHI"

    @classmethod
    def parse(cls, text: str) -> "Topology":
        key = text.strip().upper().replace("_", "-")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown topology {text!r}; expected one of {[m.value for m in cls]}")

    @property
    def has_second(self) -> bool:
        return self is not Topology.SECE

    @property
    def phase_variable(self) -> bool:
        return self is not Topology.SEH


def theta_bounds(phi):
    """Valid blocking-angle interval [lo, hi] of P-SSHI for switch phase phi."""
    phi = np.asarray(phi, dtype=float)
    lead = phi <= 0
    lo = np.where(lead, -phi, np.arccos(np.clip(2.0 * np.cos(phi) - 1.0, -1.0, 1.0)))
    hi = np.where(lead, PI + phi, PI)
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def second_bounds(topology: Topology, phi):
    """Domain of the second tunable: Vr~ (SEH, S-SSHI) or theta (P-SSHI).

    For S-SSHI the upper end cos(phi) is where the flip stops conducting; for
    SEH it is Vr~ = 1.  Larger values are accepted by :class:`TuningPoint` and
    yield the open-circuit waveform.
    """
    phi = np.asarray(phi, dtype=float)
    if topology is Topology.SEH:
        return np.zeros_like(phi) + 0.0, np.ones_like(phi)
    if topology is Topology.S_SSHI:
        return np.zeros_like(phi), np.cos(phi)
    if topology is Topology.P_SSHI:
        lo, hi = theta_bounds(phi)
        return np.asarray(lo), np.asarray(hi)
    raise ValueError("SECE has no second parameter")


@dataclass(frozen=True)
class TuningPoint:
    """Topology plus its tunables.

    ``second`` is Vr~ = V_r/V_oc for SEH and S-SSHI, the blocking angle theta
    (rad) for P-SSHI, and must be None for SECE.
    """

    topology: Topology
    phi: float = 0.0
    second: float | None = None

    def __post_init__(self):
        topo = Topology(self.topology)
        object.__setattr__(self, "topology", topo)
        phi = self.phi
        if not -PI / 2 - 1e-12 <= phi <= PI / 2 + 1e-12:
            raise ValueError(f"phi={phi!r} outside [-pi/2, pi/2]")
        if topo is Topology.SEH and phi != 0.0:
            raise ValueError("SEH has no switch; phi must be 0")
        if topo is Topology.SECE:
            if self.second is not None:
                raise ValueError("SECE carries only phi")
            return
        if self.second is None:
            raise ValueError(f"{topo.value} needs a second parameter")
        if topo in (Topology.SEH, Topology.S_SSHI) and self.second < 0:
            raise ValueError(f"Vr~ must be non-negative, got {self.second!r}")
        if topo is Topology.P_SSHI:
            lo, hi = theta_bounds(phi)
            tol = 1e-12
            if self.second < lo - tol:
                raise ValueError(f"theta={self.second!r} below lower bound {lo!r} for phi={phi!r}")
            if self.second > hi + tol:
                raise ValueError(f"theta={self.second!r} above upper bound {hi!r} for phi={phi!r}")

    @classmethod
    def from_unit(cls, topology: Topology, phi: float, s: float | None) -> "TuningPoint":
        """Map s in [0, 1] linearly onto the conducting second-parameter domain."""
        topology = Topology(topology)
        if topology is Topology.SECE:
            return cls(topology, phi)
        lo, hi = second_bounds(topology, phi)
        return cls(topology, phi, float(lo + s * (hi - lo)))


class InteriorVoltages(NamedTuple):
    v0_tilde: float
    v1_tilde: float


class Segment(NamedTuple):
    start: float
    end: float
    a: float
    b: float


_FLIP_MATRIX_CACHE: dict[float, np.ndarray] = {}


def _flip_matrix(gamma: float) -> np.ndarray:
    if gamma == -1.0:
        raise ValueError("gamma = -1 makes the flip system singular")
    return np.array([[1.0, 1.0], [gamma, -1.0]])


def solve_interior_s_sshi(phi: float, vr_tilde: float, gamma: float) -> InteriorVoltages:
    """Interior voltages of (PV-)S-SSHI: [1 1; g -1] V = [2cos(phi); (g-1)Vr~]."""
    rhs = np.array([2.0 * math.cos(phi), (gamma - 1.0) * vr_tilde])
    v0, v1 = np.linalg.solve(_flip_matrix(gamma), rhs)
    return InteriorVoltages(float(v0), float(v1))


def solve_interior_p_sshi(phi: float, theta: float, gamma: float) -> InteriorVoltages:
    """Interior voltages of (PV-)P-SSHI.

    Phase lead (phi <= 0) uses the right-hand side cos(phi) - cos(theta);
    phase lag uses 2cos(phi) - cos(theta) - 1.  The second row is homogeneous
    since the parallel flip is centred on zero.
    """
    TuningPoint(Topology.P_SSHI, phi, theta)  # domain check
    if phi <= 0:
        r1 = math.cos(phi) - math.cos(theta)
    else:
        r1 = 2.0 * math.cos(phi) - math.cos(theta) - 1.0
    v0, v1 = np.linalg.solve(_flip_matrix(gamma), np.array([r1, 0.0]))
    return InteriorVoltages(float(v0), float(v1))


def half_period_segments(topology: Topology, phi, second, gamma: float):
    """Vectorized first-half-period segments for arrays of tunings.

    Returns ``(start, end, a, b, v0, v1, vr, open_circuit)``; the first four
    have a trailing axis of length 3 (unused slots are empty intervals).
    ``vr`` is the normalized rectifier voltage (clamp level for SEH/P-SSHI,
    series flip level for S-SSHI, 0 for SECE).
    """
    topology = Topology(topology)
    phi = np.asarray(phi, dtype=float)
    second = np.asarray(0.0 if second is None else second, dtype=float)
    phi, second = np.broadcast_arrays(phi, second)
    shape = phi.shape + (3,)
    start = np.empty(shape)
    end = np.empty(shape)
    a = np.zeros(shape)
    b = np.zeros(shape)
    cphi = np.cos(phi)
    zeros = np.zeros_like(phi)
    if gamma == -1.0:
        raise ValueError("gamma = -1 makes the flip system singular")

    if topology is Topology.SECE:
        v0, v1, vr = 2.0 * cphi, zeros, zeros
        is_open = np.zeros(phi.shape, dtype=bool)
        start[..., 0], end[..., 0] = phi, phi + PI
        a[..., 0], b[..., 0] = cphi, -1.0
        start[..., 1:] = end[..., 1:] = (phi + PI)[..., None]
    elif topology is Topology.S_SSHI:
        vr = second
        is_open = vr > cphi
        v0 = (2.0 * cphi + (gamma - 1.0) * vr) / (1.0 + gamma)
        v1 = 2.0 * cphi - v0
        v0, v1 = np.where(is_open, 0.0, v0), np.where(is_open, 0.0, v1)
        start[..., 0], end[..., 0] = phi, phi + PI
        a[..., 0] = np.where(is_open, 0.0, cphi - v1)
        b[..., 0] = -1.0
        start[..., 1:] = end[..., 1:] = (phi + PI)[..., None]
    elif topology is Topology.SEH:
        vr = second
        is_open = vr > 1.0
        theta = np.arccos(np.clip(1.0 - 2.0 * vr, -1.0, 1.0))
        theta = np.where(is_open, PI, theta)
        v0 = v1 = np.where(is_open, 0.0, vr)
        start[..., 0], end[..., 0] = 0.0, theta
        a[..., 0], b[..., 0] = np.where(is_open, 0.0, 1.0 - vr), -1.0
        start[..., 1], end[..., 1] = theta, PI
        a[..., 1], b[..., 1] = vr, 0.0
        start[..., 2] = end[..., 2] = PI
    elif topology is Topology.P_SSHI:
        theta = second
        lead = phi <= 0
        cth = np.cos(theta)
        r1 = np.where(lead, cphi - cth, 2.0 * cphi - cth - 1.0)
        v0 = r1 / (1.0 + gamma)
        v1 = gamma * v0
        clamp = cphi - v1 - cth
        is_open = np.zeros(phi.shape, dtype=bool)
        vr = clamp
        start[..., 0], end[..., 0] = phi, theta
        a[..., 0], b[..., 0] = cphi - v1, -1.0
        start[..., 1] = theta
        end[..., 1] = np.where(lead, phi + PI, PI)
        a[..., 1], b[..., 1] = clamp, 0.0
        start[..., 2] = np.where(lead, phi + PI, PI)
        end[..., 2] = phi + PI
        a[..., 2] = clamp - 1.0
        b[..., 2] = np.where(lead, 0.0, -1.0)
    else:  # pragma: no cover
        raise ValueError(topology)
    return start, end, a, b, v0, v1, vr, is_open


def segment_fourier(start, end, a, b):
    """Per-segment integrals of v*sin and v*cos for v = a + b cos(t).

    Returns ``(int v sin, int v cos)`` over [start, end), elementwise.
    """
    s0, s1 = np.sin(start), np.sin(end)
    c0, c1 = np.cos(start), np.cos(end)
    i_sin = a * (c0 - c1) + 0.5 * b * (s1 * s1 - s0 * s0)
    i_cos = a * (s1 - s0) + b * (0.5 * (end - start) + 0.25 * (np.sin(2 * end) - np.sin(2 * start)))
    return i_sin, i_cos


@dataclass(frozen=True)
class PiecewiseVoltage:
    """One steady-state period of v_p as segments of ``a + b cos(wt)``.

    Segment values are normalized by ``voc``; the segments tile
    [phi, 2 pi + phi).  ``open_circuit`` flags a tuning at which the
    rectifier never conducts, in which case the bare-capacitor waveform is
    returned.
    """

    segments: tuple[Segment, ...]
    voc: float
    tuning: TuningPoint
    gamma: float
    interior: InteriorVoltages
    vr_tilde: float
    open_circuit: bool = False
    period: float = 2.0 * PI

    @property
    def origin(self) -> float:
        return self.segments[0].start

    def normalized(self, angle):
        """v_p/V_oc at the given angles (right-continuous at jumps)."""
        angle = np.asarray(angle, dtype=float)
        t = self.origin + np.mod(angle - self.origin, 2.0 * PI)
        ends = np.array([s.end for s in self.segments])
        idx = np.minimum(np.searchsorted(ends, t, side="right"), len(ends) - 1)
        a = np.array([s.a for s in self.segments])[idx]
        b = np.array([s.b for s in self.segments])[idx]
        out = a + b * np.cos(t)
        return out if out.ndim else float(out)

    def __call__(self, angle):
        return self.voc * self.normalized(angle)

    def flips(self) -> list[tuple[float, float, float]]:
        """(angle, v_before, v_after) of each jump, normalized."""
        out = []
        segs = self.segments + (Segment(self.segments[0].start + 2 * PI, 0, self.segments[0].a, self.segments[0].b),)
        for prev, nxt in zip(segs[:-1], segs[1:]):
            before = prev.a + prev.b * math.cos(prev.end)
            after = nxt.a + nxt.b * math.cos(nxt.start)
            if abs(before - after) > 1e-12 * max(1.0, abs(before)):
                out.append((prev.end, before, after))
        return out

    def sample(self, n: int = 4096) -> tuple[np.ndarray, np.ndarray]:
        """Angles and normalized values, with both sides of every segment edge."""
        angles, values = [], []
        for seg in self.segments:
            k = max(2, int(math.ceil(n * (seg.end - seg.start) / (2 * PI))) + 1)
            t = np.linspace(seg.start, seg.end, k)
            angles.append(t)
            values.append(seg.a + seg.b * np.cos(t))
        return np.concatenate(angles), np.concatenate(values)


def _open_circuit_segments(phi: float) -> tuple[Segment, ...]:
    return (Segment(phi, phi + PI, 0.0, -1.0), Segment(phi + PI, phi + 2 * PI, 0.0, -1.0))


def synthesize_vp(tuning: TuningPoint, gamma: float, voc: float = 1.0) -> PiecewiseVoltage:
    """Exact steady-state v_p waveform for ``tuning``."""
    if not voc > 0:
        raise ValueError("voc must be positive")
    topo = tuning.topology
    if topo is Topology.S_SSHI:
        interior = solve_interior_s_sshi(tuning.phi, tuning.second, gamma)
    elif topo is Topology.P_SSHI:
        interior = solve_interior_p_sshi(tuning.phi, tuning.second, gamma)
    else:
        interior = None
    start, end, a, b, v0, v1, vr, is_open = half_period_segments(topo, tuning.phi, tuning.second, gamma)
    is_open = bool(is_open)
    if interior is None:
        interior = InteriorVoltages(float(v0), float(v1))
    if is_open:
        warnings.warn(f"{topo.value} rectifier never conducts at {tuning}; open-circuit waveform returned",
                      RuntimeWarning, stacklevel=2)
        segs = _open_circuit_segments(float(start[0]))
        interior = InteriorVoltages(0.0, 0.0)
        vr = 0.0
    else:
        half = [Segment(float(s), float(e), float(aa), float(bb))
                for s, e, aa, bb in zip(start, end, a, b) if e > s]
        segs = tuple(half) + tuple(Segment(s.start + PI, s.end + PI, -s.a, s.b) for s in half)
    return PiecewiseVoltage(segs, voc, tuning, gamma, interior, float(vr), is_open)


def harvested_fraction(tuning: TuningPoint, wave: PiecewiseVoltage) -> float:
    """Normalized harvested energy per period, in units of C_p V_oc**2.

    SEH and P-SSHI: twice V_r times the charge passed during rectifier
    conduction.  S-SSHI: twice V_r times the charge moved by each flip.
    SECE: both extractions fully converted.
    """
    if wave.open_circuit:
        return 0.0
    topo, phi = tuning.topology, tuning.phi
    v0, v1 = wave.interior
    if topo is Topology.SECE:
        return v0 * v0
    if topo is Topology.S_SSHI:
        return 2.0 * wave.vr_tilde * (v0 - v1)
    if topo is Topology.SEH:
        theta = math.acos(1.0 - 2.0 * wave.vr_tilde)
        return 2.0 * wave.vr_tilde * (1.0 + math.cos(theta))
    theta = tuning.second
    dq = math.cos(theta) + (math.cos(phi) if phi <= 0 else 1.0)
    return 2.0 * wave.vr_tilde * dq


def extracted_fraction(wave: PiecewiseVoltage) -> float:
    """Exact loop integral of v dq per period, in units of C_p V_oc**2."""
    segs = wave.segments
    i_sin, _ = segment_fourier(np.array([s.start for s in segs]), np.array([s.end for s in segs]),
                               np.array([s.a for s in segs]), np.array([s.b for s in segs]))
    return float(np.sum(i_sin))


@dataclass(frozen=True)
class WorkCycle:
    trajectory: np.ndarray  # (n, 2) columns v_p [V], q [C]
    area: float
    e_h: float
    e_d: float


def shoelace_area(v: np.ndarray, q: np.ndarray) -> float:
    """Closed-loop integral of v dq by the shoelace rule."""
    v_next, q_next = np.roll(v, -1), np.roll(q, -1)
    return 0.5 * float(np.sum(v * q_next - v_next * q))


def work_cycle(wave: PiecewiseVoltage, i_h_mag: float, omega: float, samples: int = 4096) -> WorkCycle:
    """Sample the (v_p, q) loop with q = -(I_h/w)cos(wt) and measure its area."""
    if samples < 1024:
        raise ValueError("need at least 1024 samples per period")
    angles, v_norm = wave.sample(samples)
    v = wave.voc * v_norm
    q = -(i_h_mag / omega) * np.cos(angles)
    area = shoelace_area(v, q)
    e_h, e_d = energy_split(wave, i_h_mag, omega)
    return WorkCycle(np.column_stack([v, q]), area, e_h, e_d)


def energy_split(wave: PiecewiseVoltage, i_h_mag: float, omega: float) -> tuple[float, float]:
    """Harvested and dissipated energy per period (J).

    The dissipated part is whatever the extracted loop energy leaves after the
    harvested bookkeeping; for SSHI circuits this equals the flip losses.
    """
    scale = i_h_mag * wave.voc / omega  # C_p V_oc^2
    e_h = harvested_fraction(wave.tuning, wave) * scale
    e_d = extracted_fraction(wave) * scale - e_h
    if abs(e_d) < 1e-12 * max(abs(e_h), scale):
        e_d = 0.0
    return e_h, e_d
