"""Acceptance criteria, one test per criterion.

Every test records a single PASS/FAIL line (also echoed in the terminal
summary) with the measured figures, then asserts the criterion at its
stated tolerance.
"""

import math
import time
import warnings

import numpy as np
import pytest
from scipy.signal import argrelmax

from conftest import ACCEPTANCE
from peh_impedance import cli
from peh_impedance.ideal import IdealParams, beta_o, beta_r, conjugate_match, half_power_roots, ideal_power, power_limits
from peh_impedance.impedance import (
    fundamental_harmonic,
    fundamental_harmonic_quad,
    impedance_grid,
    sece_circle,
    sshi_circle,
    ze_bound_pv_sece_normalized,
    ze_bound_pv_sshi_normalized,
)
from peh_impedance.model import excitation_force
from peh_impedance.oracle import SimOptions, compare_grid, power_discrepancy
from peh_impedance.power import bandwidth_metrics, envelope, power_at, power_limit
from peh_impedance.presets import load_preset
from peh_impedance.waveforms import Topology, TuningPoint, synthesize_vp, work_cycle

PI = math.pi
SEED = 20240611


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[n] = line
    print(line)


def random_tunings(rng, count):
    """Uniform over topology, switch phase and the unit second-parameter domain."""
    topologies = list(Topology)
    out = []
    for i in range(count):
        topo = topologies[i % len(topologies)]
        phi = 0.0 if topo is Topology.SEH else float(rng.uniform(-PI / 2, PI / 2))
        s = None if topo is Topology.SECE else float(rng.uniform(0.0, 1.0))
        out.append(TuningPoint.from_unit(topo, phi, s))
    return out


def test_criterion_1_ideal_closed_forms():
    t0 = time.perf_counter()
    exact = beta_r(1.0) == 0.25
    rng = np.random.default_rng(SEED)
    band_err = 0.0
    for eta, zeta in zip(rng.uniform(0.0, 5.0, 100), rng.uniform(1e-4, 0.05, 100)):
        band = half_power_roots(float(eta), float(zeta))
        band_err = max(band_err, abs(band.width - band.closed_form) / band.closed_form)
        # the roots really are half-power points
        for w in (band.lower, band.upper):
            assert beta_o(IdealParams(float(zeta), float(eta), w)) == pytest.approx(0.5, abs=1e-9)
    sys = load_preset("strong").system.with_changes(Rp=math.inf)
    f = excitation_force(sys)
    target = f * f / (8 * sys.D)
    match_err = 0.0
    for w in np.linspace(0.5, 1.5, 20) * sys.omega_n:
        d_h, k_e = conjugate_match(sys, w)
        match_err = max(match_err, abs(ideal_power(sys, w, d_h, k_e) - target) / target)
    assert power_limits(sys)[1] == pytest.approx(target, rel=1e-15)
    dt = time.perf_counter() - t0
    ok = exact and band_err <= 1e-9 and match_err <= 1e-12 and dt < 1.0
    record(1, ok, f"beta_r(1)={beta_r(1.0)!r} bandwidth rel err={band_err:.2e} "
                  f"matched power rel err={match_err:.2e} runtime={dt:.2f}s")
    assert exact
    assert band_err <= 1e-9
    assert match_err <= 1e-12
    assert dt < 1.0


def test_criterion_2_impedance_circles():
    t0 = time.perf_counter()
    gamma = -0.6
    phi = np.linspace(-PI / 2, PI / 2, 181)
    c, r = sshi_circle(gamma)
    sshi_bound = ze_bound_pv_sshi_normalized(phi, gamma)
    sshi_err = float(np.max(np.abs(np.abs(sshi_bound - complex(8 / PI, -1)) - 8 / PI)))
    # the extreme load of the waveform model lands on the same circle
    z_wave, _ = impedance_grid(Topology.S_SSHI, phi, np.zeros_like(phi), gamma)
    sshi_err = max(sshi_err, float(np.max(np.abs(np.abs(z_wave - c) - r))))
    sece_bound = ze_bound_pv_sece_normalized(phi)
    sece_err = float(np.max(np.abs(np.abs(sece_bound - complex(2 / PI, -1)) - 2 / PI)))
    z_wave, _ = impedance_grid(Topology.SECE, phi, None, gamma)
    c, r = sece_circle()
    sece_err = max(sece_err, float(np.max(np.abs(np.abs(z_wave - c) - r))))
    identical = np.array_equal(ze_bound_pv_sshi_normalized(phi, 0.0), ze_bound_pv_sece_normalized(phi))
    dt = time.perf_counter() - t0
    ok = sshi_err <= 1e-9 and sece_err <= 1e-9 and identical and dt < 1.0
    record(2, ok, f"SSHI circle err={sshi_err:.2e} SECE circle err={sece_err:.2e} "
                  f"SECE==SSHI(gamma=0): {identical} runtime={dt:.2f}s")
    assert sshi_err <= 1e-9
    assert sece_err <= 1e-9
    assert identical
    assert dt < 1.0


def test_criterion_3_fourier_consistency():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED + 3)
    worst = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for tp in random_tunings(rng, 1000):
            wave = synthesize_vp(tp, -0.6, 1.0)
            a = fundamental_harmonic(wave)
            q = fundamental_harmonic_quad(wave)
            worst = max(worst, abs(a - q) / abs(q))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and dt < 10.0
    record(3, ok, f"max rel err analytic vs quadrature={worst:.2e} over 1000 tunings runtime={dt:.2f}s")
    assert worst <= 1e-9
    assert dt < 10.0


def test_criterion_4_energy_bookkeeping():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED + 4)
    sys = load_preset("weak").system
    omega, i_h = sys.omega_n, 1e-5
    voc = i_h / (omega * sys.Cp)
    area_err = split_err = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for tp in random_tunings(rng, 1000):
            wave = synthesize_vp(tp, sys.gamma, voc)
            cyc = work_cycle(wave, i_h, omega)
            z, _ = impedance_grid(tp.topology, tp.phi, tp.second, sys.gamma)
            p_elec = 0.5 * i_h**2 * complex(z).real / (omega * sys.Cp)
            area_err = max(area_err, abs(cyc.area * omega / (2 * PI) - p_elec) / p_elec)
            split_err = max(split_err, abs(cyc.e_h + cyc.e_d - cyc.area) / cyc.area)
    dt = time.perf_counter() - t0
    ok = area_err <= 1e-3 and split_err <= 1e-3 and dt < 10.0
    record(4, ok, f"area/T vs I^2 Re(Z)/2 max rel err={area_err:.2e} "
                  f"e_h+e_d vs area max rel err={split_err:.2e} runtime={dt:.2f}s")
    assert area_err <= 1e-3
    assert split_err <= 1e-3
    assert dt < 10.0


def _spot_indices(n_omega, n_axis, count):
    """Spread ``count`` points along the grid diagonal."""
    k = np.arange(count)
    return [(int(round(i * (n_omega - 1) / (count - 1))), int(round(i * (n_axis - 1) / (count - 1)))) for i in k]


@pytest.mark.slow
def test_criterion_5_oracle_equivalence():
    t0 = time.perf_counter()
    sys = load_preset("weak").system
    omegas = np.linspace(0.9, 1.1, 21) * sys.omega_n
    phis = np.linspace(-PI / 2, PI / 2, 13)
    # SEH has no switch phase; its second grid axis is 13 interior Vr~ fractions
    axes = {Topology.SEH: np.linspace(0.0, 1.0, 15)[1:-1], Topology.SECE: phis, Topology.S_SSHI: phis}
    # flips are phase-locked to the branch-current fundamental, which is
    # the reference the harmonic-balance switch phase is defined against
    options = SimOptions(sync="locked", initial="open_circuit")
    p_worst, z_mag_worst, z_phase_worst, n_bad, unconverged = {}, 0.0, 0.0, {}, 0
    spots = []
    for topo, axis in axes.items():
        rows = compare_grid(sys, topo, omegas, axis, options)
        unconverged += sum(not r.converged for r in rows)
        d = power_discrepancy(rows)
        p_worst[topo.value] = float(np.nanmax(d)) if np.any(np.isfinite(d)) else math.inf
        n_bad[topo.value] = int(np.sum(~(d <= 0.05)))
        for i, j in _spot_indices(len(omegas), len(axis), 10):
            spots.append(rows[i * len(axis) + j])
    for c in spots:
        z_mag_worst = max(z_mag_worst, abs(c.z_mag_error))
        z_phase_worst = max(z_phase_worst, abs(c.z_phase_error_deg))
    dt = time.perf_counter() - t0
    p_ok = all(v <= 0.05 for v in p_worst.values())
    z_ok = z_mag_worst <= 0.03 and z_phase_worst <= 3.0
    ok = p_ok and z_ok and unconverged == 0 and dt < 600
    per = " ".join(f"{k}={100 * v:.2f}% ({n_bad[k]}/273 over 5%)" for k, v in p_worst.items())
    record(5, ok, f"max P discrepancy {per}; Z spots ({len(spots)}) worst |Z| err={100 * z_mag_worst:.2f}% "
                  f"phase err={z_phase_worst:.2f}deg; unconverged={unconverged} runtime={dt:.0f}s")
    assert unconverged == 0
    assert p_ok, p_worst
    assert z_ok
    assert dt < 600


def _half_power_ratio(sys, topo, omegas):
    pv = envelope(sys, topo, True, omegas)
    fixed = envelope(sys, topo, True, omegas, fix_phi=0.0)
    seh = envelope(sys, Topology.SEH, False, omegas)
    return bandwidth_metrics(omegas, pv.p_h, seh.p_h, fixed.p_h), pv, fixed


@pytest.mark.slow
def test_criterion_6_strong_coupling_reproduction():
    t0 = time.perf_counter()
    sys = load_preset("strong").system
    wn = sys.omega_n
    omegas = np.linspace(0.8, 1.3, 801) * wn
    p_lim = float(power_limit(sys, omegas).max())  # F^2/(8D) with the leakage path included

    seh = envelope(sys, Topology.SEH, False, omegas)
    peaks = argrelmax(seh.p_h)[0]
    two_peaks = len(peaks) >= 2

    sshi, sshi_pv, sshi_fixed = _half_power_ratio(sys, Topology.S_SSHI, omegas)
    sece, _, _ = _half_power_ratio(sys, Topology.SECE, omegas)
    seh_frac = float(seh.p_h.max()) / p_lim
    sshi_frac = sshi.peak_power / p_lim
    peaks_ok = abs(seh_frac - 1) <= 0.15 and abs(sshi_frac - 1) <= 0.15
    ratios_ok = sshi.broadening_ratio > 1.3 and sece.broadening_ratio > 1.3

    # trend proxy: the optimal switch phase changes sign across the phi = 0 peak
    signs = np.sign(sshi_pv.phi[np.abs(sshi_pv.phi) > 1e-3])
    flips = int(np.sum(signs[1:] != signs[:-1]))
    w_flip = float(omegas[np.argmin(np.abs(sshi_pv.phi))] / wn)
    w_phi0_peak = float(omegas[np.argmax(sshi_fixed.p_h)] / wn)

    # the parallel-SSHI variant is reported alongside for reference
    psshi, _, _ = _half_power_ratio(sys, Topology.P_SSHI, omegas)
    dt = time.perf_counter() - t0
    ok = two_peaks and peaks_ok and ratios_ok and dt < 600
    record(6, ok,
           f"(a) SEH envelope maxima at {[round(float(omegas[k] / wn), 4) for k in peaks]} omega_n "
           f"[{'ok' if two_peaks else 'single'}]; "
           f"(b) peak/P_lim SEH={seh_frac:.3f} PV-S-SSHI={sshi_frac:.3f} [{'ok' if peaks_ok else 'out of 15%'}]; "
           f"(c) broadening PV-S-SSHI={sshi.broadening_ratio:.3f} PV-SECE={sece.broadening_ratio:.3f} "
           f"[{'ok' if ratios_ok else 'below 1.3'}]; optimal-phi sign changes={flips} near {w_flip:.3f} omega_n "
           f"(phi=0 peak {w_phi0_peak:.3f}); PV-P-SSHI peak/P_lim={psshi.peak_power / p_lim:.3f} "
           f"broadening={psshi.broadening_ratio:.3f}; runtime={dt:.0f}s")
    assert flips >= 1
    assert dt < 600
    assert two_peaks, "SEH envelope has a single maximum"
    assert peaks_ok, (seh_frac, sshi_frac)
    assert ratios_ok, (sshi.broadening_ratio, sece.broadening_ratio)


def test_criterion_7_dielectric_loss_ordering():
    t0 = time.perf_counter()
    base = load_preset("strong").system
    systems = [base.with_changes(Rp=r) for r in (200e3, 2e6, math.inf)]
    omegas = np.linspace(0.8, 1.3, 21) * base.omega_n
    phis = np.linspace(-PI / 2, PI / 2, 13)
    violations, checked = 0, 0
    for topo in Topology:
        for w in omegas:
            for j, phi in enumerate(phis):
                if topo is Topology.SEH:
                    tunings = [TuningPoint.from_unit(topo, 0.0, j / 12)]
                elif topo is Topology.SECE:
                    tunings = [TuningPoint(topo, float(phi))]
                else:
                    tunings = [TuningPoint.from_unit(topo, float(phi), s) for s in (0.25, 0.5, 0.75)]
                for tp in tunings:
                    p = [power_at(s, tp, float(w)) for s in systems]
                    checked += 1
                    if not (p[0] <= p[1] * (1 + 1e-12) and p[1] <= p[2] * (1 + 1e-12)):
                        violations += 1
    dt = time.perf_counter() - t0
    ok = violations == 0 and dt < 60
    record(7, ok, f"P(200k) <= P(2M) <= P(inf) violated at {violations}/{checked} points runtime={dt:.1f}s")
    assert violations == 0
    assert dt < 60


def test_criterion_8_cli_determinism(tmp_path):
    t0 = time.perf_counter()
    outputs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        for command in ("sweep", "bandwidth"):
            assert cli.main([command, "--out", str(out)]) == cli.EXIT_OK
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    same = outputs[0].keys() == outputs[1].keys() and all(outputs[0][k] == outputs[1][k] for k in outputs[0])
    dt = time.perf_counter() - t0
    record(8, same, f"{len(outputs[0])} artifacts byte-identical across two full default sweeps: {same} "
                    f"runtime={dt:.1f}s")
    assert same
