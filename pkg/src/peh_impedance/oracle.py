"""Time-domain reference simulation of the switched harvester.

Integrates

    M x'' + D x' + K x + alpha v_p = F sin(wt)
    C_p v_p' = alpha x' - v_p / R_p - i_rect

with ideal (or constant-drop) diodes, a constant rectified voltage V_r and
instantaneous synchronized switch actions.  Nothing here uses the describing
function; the results are the brute-force reference for the analytic path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import _kernel as K
from .impedance import impedance_grid
from .model import PehSystem, excitation_force, impedance_scale, mechanical_impedance
from .waveforms import PI, Topology, TuningPoint, half_period_segments

TOPOLOGY_CODES = {
    Topology.SEH: K.SEH,
    Topology.SECE: K.SECE,
    Topology.S_SSHI: K.S_SSHI,
    Topology.P_SSHI: K.P_SSHI,
    None: K.OPEN,
}
EVENT_NAMES = {K.EV_ZERO_CROSSING: "zero_crossing", K.EV_FLIP: "flip", K.EV_CLAMP: "clamp", K.EV_RELEASE: "release"}
LEDGER_COLUMNS = ("input", "damping", "leakage", "rectifier", "flip_harvest", "flip_loss", "diode", "stored")


class NonConvergenceError(RuntimeError):
    """Raised when steady-state quantities are requested from a transient trace."""


@dataclass(frozen=True)
class SimOptions:
    """Integrator and synchronization settings.

    sync
        ``"velocity"`` schedules each switch action at phase phi after a
        zero crossing of x'.  ``"locked"`` phase-locks the actions to the
        fundamental of the branch current i_h = alpha x' - v_p/R_p measured
        over the previous cycle (the two coincide when R_p is infinite).
    initial
        ``"rest"`` or ``"open_circuit"`` (linear steady state of the
        unswitched harvester).
    """

    steps_per_cycle: int = 4096
    max_cycles: int = 400
    tol: float = 1e-3
    stable_cycles: int = 3
    window: int = 10
    sync: str = "velocity"
    lock_gain: float = 0.5
    lock_start: int = 2
    record_every: int = 64
    event_tol: float = 1e-10
    initial: str = "rest"
    diode_drop: float = 0.0
    decoupled: bool = False

    def __post_init__(self):
        if self.steps_per_cycle < 64:
            raise ValueError("steps_per_cycle must be at least 64")
        if self.max_cycles < max(self.window, 3):
            raise ValueError("max_cycles must cover the averaging window")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.sync not in ("velocity", "locked"):
            raise ValueError(f"unknown sync mode {self.sync!r}")
        if self.initial not in ("rest", "open_circuit"):
            raise ValueError(f"unknown initial state {self.initial!r}")
        if not 0 < self.lock_gain <= 1:
            raise ValueError("lock_gain must lie in (0, 1]")
        if self.diode_drop < 0:
            raise ValueError("diode_drop must be non-negative")
        if self.record_every < 1 or self.window < 1 or self.stable_cycles < 1:
            raise ValueError("record_every, window and stable_cycles must be positive")


@dataclass(frozen=True)
class OracleTuning:
    """Physical switch settings: topology (None = open circuit), phase, V_r (V)."""

    topology: Topology | None
    phi: float = 0.0
    v_r: float = 0.0

    def __post_init__(self):
        if self.topology is not None:
            object.__setattr__(self, "topology", Topology(self.topology))
        if not -PI / 2 - 1e-12 <= self.phi <= PI / 2 + 1e-12:
            raise ValueError(f"phi={self.phi!r} outside [-pi/2, pi/2]")
        if self.topology is Topology.SEH and self.phi != 0:
            raise ValueError("SEH has no switch; phi must be 0")
        if self.v_r < 0:
            raise ValueError("v_r must be non-negative")


@dataclass
class SimTrace:
    """Result of :func:`simulate`.

    ``t, x, xdot, vp, clamped`` hold a decimated record of the whole run;
    ``window`` holds the last ``options.window`` cycles at full resolution
    (columns x, xdot, vp, clamped) starting at ``window_start``.  ``ledger``
    rows are cumulative energies (J) at each cycle boundary, columns as in
    ``LEDGER_COLUMNS``.
    """

    system: PehSystem
    tuning: OracleTuning
    omega: float
    options: SimOptions
    converged: bool
    cycles: int
    t: np.ndarray
    x: np.ndarray
    xdot: np.ndarray
    vp: np.ndarray
    clamped: np.ndarray
    window: np.ndarray
    window_start: float
    ledger: np.ndarray
    events: list[tuple[float, str, float, float]] = field(repr=False)
    lock_phase: float = 0.0

    @property
    def status(self) -> str:
        return "converged" if self.converged else "max_cycles"

    @property
    def period(self) -> float:
        return 2.0 * PI / self.omega

    @property
    def v_r(self) -> np.ndarray:
        return np.full_like(self.t, self.tuning.v_r)

    def cycle_energies(self) -> np.ndarray:
        """Per-cycle ledger increments, shape (cycles, len(LEDGER_COLUMNS))."""
        return np.diff(self.ledger, axis=0)


def _initial_state(sys: PehSystem, omega: float, alpha: float, initial: str) -> np.ndarray:
    if initial == "rest":
        return np.zeros(3)
    f = excitation_force(sys)
    y_el = 1j * omega * sys.Cp + (0.0 if math.isinf(sys.Rp) else 1.0 / sys.Rp)
    z = mechanical_impedance(sys, omega).value + alpha**2 / y_el
    u = f / z
    v = alpha * u / y_el
    return np.array([(u / (1j * omega)).imag, u.imag, v.imag])


def simulate(sys: PehSystem, tuning: OracleTuning | None, omega: float, options: SimOptions | None = None) -> SimTrace:
    """Integrate the harvester until steady state or ``options.max_cycles``.

    ``tuning=None`` simulates the open-circuit harvester.  A non-converged
    run still returns its partial trace with ``converged = False``.
    """
    options = options or SimOptions()
    tuning = tuning or OracleTuning(None)
    if not omega > 0:
        raise ValueError("omega must be positive")
    alpha = 0.0 if options.decoupled else sys.alpha
    p = np.zeros(K.N_PARAM)
    p[K.P_M], p[K.P_K], p[K.P_D], p[K.P_ALPHA], p[K.P_CP] = sys.M, sys.K, sys.D, alpha, sys.Cp
    p[K.P_INV_RP] = 0.0 if math.isinf(sys.Rp) else 1.0 / sys.Rp
    p[K.P_F], p[K.P_OMEGA], p[K.P_VR] = excitation_force(sys), omega, tuning.v_r
    p[K.P_GAMMA], p[K.P_PHI], p[K.P_DROP] = sys.gamma, tuning.phi, options.diode_drop
    y0 = _initial_state(sys, omega, alpha, options.initial)
    sync = K.SYNC_LOCKED if options.sync == "locked" else K.SYNC_VELOCITY
    converged, cycles, t_end, ring, trace, ledger, events, n_ev, psi = K.simulate_kernel(
        p, TOPOLOGY_CODES[tuning.topology], sync, options.lock_gain, options.lock_start,
        options.steps_per_cycle, options.max_cycles, options.tol, options.stable_cycles,
        options.window, options.record_every, options.event_tol, y0)

    n = options.steps_per_cycle
    span = min(cycles, options.window) * n
    ring = np.roll(ring, -((cycles * n) % ring.shape[0]), axis=0)[ring.shape[0] - span:]
    cap = events.shape[0]
    order = [(n_ev - cap + i) % cap for i in range(cap)] if n_ev > cap else range(n_ev)
    log = [(float(events[i, 0]), EVENT_NAMES[int(events[i, 1])], float(events[i, 2]), float(events[i, 3])) for i in order]
    period = 2.0 * PI / omega
    return SimTrace(
        system=sys, tuning=tuning, omega=omega, options=options,
        converged=bool(converged), cycles=int(cycles),
        t=trace[:, 0], x=trace[:, 1], xdot=trace[:, 2], vp=trace[:, 3], clamped=trace[:, 4],
        window=ring, window_start=(cycles - span // n) * period,
        ledger=ledger, events=log, lock_phase=float(psi),
    )


def _require_converged(trace: SimTrace) -> None:
    if not trace.converged:
        raise NonConvergenceError(f"simulation did not settle within {trace.cycles} cycles")


def _window_cycles(trace: SimTrace) -> int:
    return trace.window.shape[0] // trace.options.steps_per_cycle


def _fundamental(samples: np.ndarray, cycles: int) -> complex:
    """Phasor B + jA of ``B sin(wt) + A cos(wt)`` on a whole-period window."""
    spectrum = np.fft.rfft(samples)
    c = spectrum[cycles] * 2.0 / samples.size
    # rfft bin = sum x e^{-j w t}: real part -> cos, -imag part -> sin
    return complex(-c.imag, c.real)


def _phase_shift(trace: SimTrace) -> float:
    # window samples sit at t_k = t0 + (k + 1) h
    return 2.0 * PI / trace.options.steps_per_cycle


def window_phasors(trace: SimTrace) -> dict[str, complex]:
    """Fundamental phasors of v_p, i_eq = alpha x' and i_h = i_eq - v_p/R_p."""
    cycles = _window_cycles(trace)
    rot = np.exp(-1j * _phase_shift(trace))
    sys = trace.system
    alpha = 0.0 if trace.options.decoupled else sys.alpha
    xdot, vp = trace.window[:, 1], trace.window[:, 2]
    g = 0.0 if math.isinf(sys.Rp) else 1.0 / sys.Rp
    out = {}
    for key, series in (("v", vp), ("i_eq", alpha * xdot), ("i_h", alpha * xdot - g * vp), ("xdot", xdot)):
        out[key] = _fundamental(series, cycles) * rot
    return out


def total_harmonic_distortion(samples: np.ndarray, cycles: int) -> float:
    spectrum = np.abs(np.fft.rfft(samples))
    fund = spectrum[cycles]
    if fund == 0:
        return 0.0
    harmonics = spectrum[2 * cycles::cycles]
    return float(np.sqrt(np.sum(harmonics**2)) / fund)


@dataclass(frozen=True)
class SteadyState:
    p_h: float
    p_d_flip: float
    p_rp: float
    thd_ih: float

    def __iter__(self):
        return iter((self.p_h, self.p_d_flip, self.p_rp, self.thd_ih))


def steady_state_power(trace: SimTrace) -> SteadyState:
    """Average powers (W) over the window and THD of i_eq = alpha x'.

    Harvested power counts rectifier conduction and energy delivered during
    switch actions; diode drops are not counted as harvested.
    """
    _require_converged(trace)
    cycles = _window_cycles(trace)
    e = trace.ledger[-1] - trace.ledger[-1 - cycles]
    span = cycles * trace.period
    cols = {name: i for i, name in enumerate(LEDGER_COLUMNS)}
    p_h = (e[cols["rectifier"]] + e[cols["flip_harvest"]]) / span
    thd = total_harmonic_distortion(trace.window[:, 1], cycles)
    return SteadyState(float(p_h), float(e[cols["flip_loss"]] / span), float(e[cols["leakage"]] / span), thd)


def ledger_residual(trace: SimTrace) -> float:
    """Worst per-cycle |input - sinks| / input over the window."""
    cycles = _window_cycles(trace)
    d = trace.cycle_energies()[-cycles:]
    sinks = d[:, 1:7].sum(axis=1)
    w_in = d[:, 0]
    return float(np.max(np.abs(w_in - sinks) / np.maximum(np.abs(w_in), 1e-300)))


def oracle_impedance(trace: SimTrace, omega: float | None = None, branch: bool = True) -> complex:
    """Electrical impedance from simulated fundamentals (ohm).

    ``branch=True`` divides by the circuit-branch current i_h, which removes
    the leakage resistor and gives Z_e; ``branch=False`` divides by
    i_eq = alpha x' and so returns Z_e in parallel with R_p.
    """
    _require_converged(trace)
    if omega is not None and not math.isclose(omega, trace.omega, rel_tol=1e-12):
        raise ValueError("omega differs from the simulated frequency")
    ph = window_phasors(trace)
    den = ph["i_h"] if branch else ph["i_eq"]
    if den == 0:
        raise ZeroDivisionError("no current fundamental (decoupled system?)")
    return ph["v"] / den


def branch_current(sys: PehSystem, tuning: TuningPoint, omega: float) -> float:
    """Harmonic-balance amplitude I_h (A) of the circuit-branch current."""
    z_n, _ = impedance_grid(tuning.topology, tuning.phi, tuning.second, sys.gamma)
    scale = impedance_scale(sys, omega)
    z_m = mechanical_impedance(sys, omega).value
    z_e = scale * complex(z_n)
    f = excitation_force(sys)
    if math.isinf(sys.Rp):
        u_e = f / (z_m + z_e)
    else:
        d_p = sys.alpha**2 * sys.Rp
        u_e = f * d_p / (z_m * d_p + z_m * z_e + z_e * d_p)
    return abs(sys.alpha * u_e)


def normalized_vr(tuning: TuningPoint, gamma: float) -> float:
    """Normalized rectified voltage V_r/V_oc implied by a tuning."""
    *_, vr, _ = half_period_segments(tuning.topology, tuning.phi, tuning.second, gamma)
    return float(vr)


def oracle_tuning(sys: PehSystem, tuning: TuningPoint, omega: float) -> OracleTuning:
    """Physical V_r at which the harmonic-balance solution realizes ``tuning``.

    V_r = Vr~ * I_h / (w C_p) with I_h from the same analytic solution, so
    the oracle is fed only a rectifier voltage and a switch phase.
    """
    if tuning.topology is Topology.SECE:
        return OracleTuning(tuning.topology, tuning.phi, 0.0)
    voc = branch_current(sys, tuning, omega) / (omega * sys.Cp)
    return OracleTuning(tuning.topology, tuning.phi, normalized_vr(tuning, sys.gamma) * voc)


def tuning_for_vr(sys: PehSystem, topology: Topology, phi: float, v_r: float, omega: float) -> list[TuningPoint]:
    """All analytic tunings whose self-consistent V_r equals ``v_r``.

    Scans the conducting domain and refines sign changes with brentq; more
    than one root signals multiple steady states of the analytic model.
    """
    topology = Topology(topology)
    if topology is Topology.SECE:
        return [TuningPoint(topology, phi)]

    def g(s):
        tp = TuningPoint.from_unit(topology, phi, s)
        return oracle_tuning(sys, tp, omega).v_r - v_r

    s = np.linspace(0.0, 1.0, 257)
    vals = np.array([g(x) for x in s])
    roots = []
    for i in range(s.size - 1):
        if vals[i] == 0:
            roots.append(s[i])
        elif vals[i] * vals[i + 1] < 0:
            roots.append(brentq(g, s[i], s[i + 1], xtol=1e-13))
    if vals[-1] == 0:
        roots.append(1.0)
    return [TuningPoint.from_unit(topology, phi, r) for r in roots]


@dataclass(frozen=True)
class Comparison:
    """Analytic vs simulated result at one (omega, tuning).

    Impedances are normalized by 1/(w C_p); powers in W.
    """

    tuning: TuningPoint
    omega: float
    v_r: float
    p_analytic: float
    p_oracle: float
    z_analytic: complex
    z_oracle: complex
    thd_ih: float
    converged: bool

    @property
    def z_mag_error(self) -> float:
        return abs(self.z_oracle) / abs(self.z_analytic) - 1.0

    @property
    def z_phase_error_deg(self) -> float:
        return math.degrees(np.angle(self.z_oracle / self.z_analytic))


def compare_point(sys: PehSystem, tuning: TuningPoint, omega: float, options: SimOptions | None = None) -> Comparison:
    """Simulate the physical counterpart of ``tuning`` and pair it with the analytic result."""
    from .power import power_at

    ot = oracle_tuning(sys, tuning, omega)
    trace = simulate(sys, ot, omega, options)
    z_a = complex(impedance_grid(tuning.topology, tuning.phi, tuning.second, sys.gamma)[0])
    p_a = power_at(sys, tuning, omega)
    if not trace.converged:
        return Comparison(tuning, omega, ot.v_r, p_a, math.nan, z_a, complex(math.nan, math.nan), math.nan, False)
    ss = steady_state_power(trace)
    z_o = oracle_impedance(trace) * omega * sys.Cp
    return Comparison(tuning, omega, ot.v_r, p_a, ss.p_h, z_a, z_o, ss.thd_ih, True)


def grid_tunings(sys: PehSystem, topology: Topology, omega: float, axis) -> list[TuningPoint]:
    """Tunings compared along one grid row.

    For SEH ``axis`` holds fractions of the Vr~ domain.  For the switched
    circuits it holds switch phases and the second parameter is the analytic
    optimum at that phase.
    """
    from .power import optimal_at_frequency

    topology = Topology(topology)
    if topology is Topology.SEH:
        return [TuningPoint.from_unit(topology, 0.0, float(s)) for s in axis]
    if topology is Topology.SECE:
        return [TuningPoint(topology, float(p)) for p in axis]
    return [optimal_at_frequency(sys, topology, True, omega, fix_phi=float(p))[0] for p in axis]


def compare_grid(sys: PehSystem, topology: Topology, omegas, axis, options: SimOptions | None = None,
                 workers: int = 1) -> list[Comparison]:
    """Row-major (omega, axis) comparison table; see :func:`grid_tunings`."""
    jobs = [(t, w) for w in omegas for t in grid_tunings(sys, topology, float(w), axis)]
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda job: compare_point(sys, job[0], job[1], options), jobs))
    return [compare_point(sys, t, w, options) for t, w in jobs]


def power_discrepancy(rows: list[Comparison], floor: float = 0.01) -> np.ndarray:
    """|P_oracle - P_analytic| / max(P_analytic, floor * max P_analytic) per row.

    The floor keeps rows where both models predict (near) zero power, such
    as phi = +/-90 degrees, from dividing by zero.
    """
    p_a = np.array([r.p_analytic for r in rows])
    p_o = np.array([r.p_oracle for r in rows])
    ref = np.maximum(p_a, floor * p_a.max()) if p_a.max() > 0 else np.ones_like(p_a)
    return np.abs(p_o - p_a) / ref
