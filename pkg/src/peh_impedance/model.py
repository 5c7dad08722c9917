"""Electromechanical description of a single-mode piezoelectric harvester.

The mechanical side is a mass-spring-damper (M, K, D) coupled to a clamped
piezoelectric capacitance C_p through the force-voltage factor alpha.  Under
the force-current analogy the mechanical branch maps onto a series RLC circuit
with R = D/alpha**2, L = M/alpha**2 and C = alpha**2/K.

Dielectric leakage R_p sits electrically in parallel with C_p.  Seen from the
mechanical side this becomes a damping D_p = alpha**2 R_p placed in parallel
with the circuit impedance Z_e (same force, split velocity), which is the
placement used by the harvested-power network in :mod:`peh_impedance.power`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace


class Domain(enum.Enum):
    MECHANICAL = "mechanical"  # N*s/m
    ELECTRICAL = "electrical"  # ohm


@dataclass(frozen=True)
class DomainImpedance:
    """A complex impedance tagged with the domain it is expressed in."""

    value: complex
    domain: Domain
    alpha: float

    def to_mechanical(self) -> "DomainImpedance":
        if self.domain is Domain.MECHANICAL:
            return self
        return DomainImpedance(self.value * self.alpha**2, Domain.MECHANICAL, self.alpha)

    def to_electrical(self) -> "DomainImpedance":
        if self.domain is Domain.ELECTRICAL:
            return self
        return DomainImpedance(self.value / self.alpha**2, Domain.ELECTRICAL, self.alpha)


@dataclass(frozen=True)
class PehSystem:
    """Mechanical and piezoelectric parameters of a harvester.

    Parameters
    ----------
    M, K, D : float
        Modal mass (kg), stiffness (N/m) and mechanical damping (N*s/m).
    alpha : float
        Force-voltage factor (N/V).
    Cp : float
        Clamped piezoelectric capacitance (F).
    Rp : float
        Dielectric leakage resistance (ohm); ``math.inf`` removes the branch.
    gamma : float
        Voltage flipping factor of the inductive bias-flip, in (-1, 1].
    Li, Cr : float
        Flip inductance (H) and storage capacitance (F).  Only informational
        for the analytic path.
    accel : float or None
        Base acceleration magnitude A_Y (m/s^2).
    force : float or None
        Force magnitude F (N).  Takes precedence over ``accel``.
    name : str
        Free-form label, carried into reports.
    """

    M: float
    K: float
    D: float
    alpha: float
    Cp: float
    Rp: float = math.inf
    gamma: float = -0.6
    Li: float = 0.0
    Cr: float = math.inf
    accel: float | None = None
    force: float | None = None
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        for key in ("M", "K", "D", "Cp", "Rp"):
            value = getattr(self, key)
            if not value > 0 or math.isnan(value):
                raise ValueError(f"{key} must be positive, got {value!r}")
        if self.alpha == 0 or not math.isfinite(self.alpha):
            raise ValueError(f"alpha must be finite and non-zero, got {self.alpha!r}")
        if not -1.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (-1, 1], got {self.gamma!r}")
        if self.accel is not None and self.accel < 0:
            raise ValueError("accel must be non-negative")
        if self.force is not None and self.force < 0:
            raise ValueError("force must be non-negative")

    @classmethod
    def from_electrical(cls, R, L, C, alpha, Cp, **kwargs) -> "PehSystem":
        """Build a system from its electrical analog (R, L, C) and alpha."""
        a2 = alpha * alpha
        return cls(M=a2 * L, K=a2 / C, D=a2 * R, alpha=alpha, Cp=Cp, **kwargs)

    @property
    def omega_n(self) -> float:
        """Short-circuit natural frequency sqrt(K/M) in rad/s."""
        return math.sqrt(self.K / self.M)

    @property
    def zeta(self) -> float:
        return self.D / (2.0 * self.M * self.omega_n)

    def with_changes(self, **changes) -> "PehSystem":
        return replace(self, **changes)


def electrical_analog(sys: PehSystem) -> tuple[float, float, float]:
    """Return (R, L, C) of the series RLC analog of the mechanical branch."""
    a2 = sys.alpha**2
    return sys.D / a2, sys.M / a2, a2 / sys.K


def mechanical_from_analog(R: float, L: float, C: float, alpha: float) -> tuple[float, float, float]:
    """Inverse of :func:`electrical_analog`: (M, K, D) from (R, L, C)."""
    a2 = alpha * alpha
    return a2 * L, a2 / C, a2 * R


def mechanical_impedance(sys: PehSystem, omega: float) -> DomainImpedance:
    """Source impedance Z_m = D + j(omega M - K/omega) of the resonator."""
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega!r}")
    z = complex(sys.D, omega * sys.M - sys.K / omega)
    return DomainImpedance(z, Domain.MECHANICAL, sys.alpha)


def excitation_force(sys: PehSystem) -> float:
    """Force magnitude F acting on the resonator.

    An explicit ``force`` wins; otherwise F = M * A_Y for base excitation.
    """
    if sys.force is not None:
        return sys.force
    if sys.accel is None:
        raise ValueError("system has neither force nor base acceleration")
    return sys.M * sys.accel


def dielectric_damping(sys: PehSystem) -> float:
    """Mechanical image D_p = alpha**2 R_p of the leakage resistance."""
    return sys.alpha**2 * sys.Rp


def impedance_scale(sys: PehSystem, omega: float) -> float:
    """Mechanical impedance unit alpha**2/(omega C_p) used for normalization."""
    return sys.alpha**2 / (omega * sys.Cp)
