"""Impedance analysis of piezoelectric harvesters with switched interface circuits.

Modules
-------
model      system description, domain conversions, source impedance
ideal      ideal kinetic-energy-harvester closed forms
waveforms  piecewise steady-state v_p waveforms, work cycles, energy split
impedance  describing-function Z_e, attainable regions, matching reports
power      harvested power, sweeps, per-frequency optimization, bandwidth
oracle     time-domain switched-ODE reference simulation
cli        command-line front end
"""

from .model import DomainImpedance, PehSystem, electrical_analog, excitation_force, mechanical_impedance
from .waveforms import Topology, TuningPoint, synthesize_vp

__version__ = "0.1.0"

__all__ = [
    "DomainImpedance",
    "PehSystem",
    "Topology",
    "TuningPoint",
    "electrical_analog",
    "excitation_force",
    "mechanical_impedance",
    "synthesize_vp",
]
