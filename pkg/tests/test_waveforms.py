import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from peh_impedance.impedance import fundamental_harmonic, fundamental_harmonic_quad, impedance_grid
from peh_impedance.waveforms import (
    Topology,
    TuningPoint,
    energy_split,
    second_bounds,
    shoelace_area,
    synthesize_vp,
    theta_bounds,
    work_cycle,
)

PI = math.pi
GAMMA = -0.6

phis = st.floats(-PI / 2, PI / 2)
units = st.floats(0.0, 1.0)
gammas = st.floats(-0.95, 0.95)


@st.composite
def tunings(draw, topologies=tuple(Topology)):
    topo = draw(st.sampled_from(topologies))
    phi = 0.0 if topo is Topology.SEH else draw(phis)
    if topo is Topology.SECE:
        return TuningPoint(topo, phi)
    # stay strictly inside the conducting domain
    return TuningPoint.from_unit(topo, phi, draw(st.floats(0.0, 0.98)))


def quiet(tuning, gamma=GAMMA, voc=1.0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return synthesize_vp(tuning, gamma, voc)


def test_topology_parse():
    assert Topology.parse("s_sshi") is Topology.S_SSHI
    assert Topology.parse(" sece ") is Topology.SECE
    with pytest.raises(ValueError):
        Topology.parse("SSHC")


def test_tuning_validation():
    with pytest.raises(ValueError):
        TuningPoint(Topology.SEH, 0.2, 0.5)
    with pytest.raises(ValueError):
        TuningPoint(Topology.SECE, 0.0, 0.5)
    with pytest.raises(ValueError):
        TuningPoint(Topology.S_SSHI, 0.0)
    with pytest.raises(ValueError):
        TuningPoint(Topology.S_SSHI, 0.0, -0.1)
    with pytest.raises(ValueError):
        TuningPoint(Topology.SECE, 2.0)
    with pytest.raises(ValueError):
        TuningPoint(Topology.P_SSHI, 0.3, 0.0)


def test_theta_bounds():
    assert theta_bounds(0.0) == pytest.approx((0.0, PI))
    lo, hi = theta_bounds(-0.4)
    assert (lo, hi) == pytest.approx((0.4, PI - 0.4))
    lo, hi = theta_bounds(PI / 3)
    assert lo == pytest.approx(PI / 2)
    assert hi == pytest.approx(PI)
    lo, hi = second_bounds(Topology.S_SSHI, PI / 3)
    assert (float(lo), float(hi)) == pytest.approx((0.0, 0.5))
    with pytest.raises(ValueError):
        second_bounds(Topology.SECE, 0.0)


def test_seh_extremes():
    w = synthesize_vp(TuningPoint(Topology.SEH, 0.0, 0.0), GAMMA)
    assert np.allclose(w.sample(256)[1], 0.0)
    with pytest.warns(RuntimeWarning):
        w = synthesize_vp(TuningPoint(Topology.SEH, 0.0, 1.2), GAMMA)
    assert w.open_circuit
    t = np.linspace(0, 2 * PI, 50)
    assert np.allclose(w.normalized(t), -np.cos(t))


def test_s_sshi_flip_levels():
    # with phi = 0 and Vr~ = 0 the flips go between +/-V with V(1 + gamma) = 2
    w = synthesize_vp(TuningPoint(Topology.S_SSHI, 0.0, 0.0), GAMMA, voc=1.0)
    flips = w.flips()
    assert len(flips) == 2
    angle, before, after = flips[0]
    assert angle == pytest.approx(PI)
    assert before == pytest.approx(5.0)
    assert after == pytest.approx(-3.0)
    assert after == pytest.approx(GAMMA * before)


def test_sece_flip_to_zero():
    w = synthesize_vp(TuningPoint(Topology.SECE, 0.25), GAMMA)
    for _, before, after in w.flips():
        assert after == pytest.approx(0.0, abs=1e-12)
        assert abs(before) == pytest.approx(2.0 * math.cos(0.25))


def test_p_sshi_flip_ratio():
    tp = TuningPoint.from_unit(Topology.P_SSHI, -0.3, 0.4)
    w = synthesize_vp(tp, GAMMA)
    for _, before, after in w.flips():
        assert after == pytest.approx(GAMMA * before)


def test_invalid_voc():
    with pytest.raises(ValueError):
        synthesize_vp(TuningPoint(Topology.SECE, 0.0), GAMMA, voc=0.0)


@given(tunings(), st.floats(0.0, 2 * PI))
def test_half_wave_antisymmetry(tp, angle):
    w = quiet(tp)
    a = w.normalized(angle)
    b = w.normalized(angle + PI)
    # evaluate away from the jump points
    assume(all(abs(math.remainder(angle - f[0], PI)) > 1e-6 for f in w.flips()))
    assert b == pytest.approx(-a, abs=1e-9)


@given(tunings(), st.floats(0.1, 100.0))
def test_fundamental_scales_with_voc(tp, voc):
    z1 = fundamental_harmonic(quiet(tp, voc=1.0))
    z2 = fundamental_harmonic(quiet(tp, voc=voc))
    assert abs(z2 - voc * z1) <= 1e-12 * voc * max(1.0, abs(z1))


@given(tunings(), gammas)
def test_fundamental_matches_quadrature(tp, gamma):
    w = quiet(tp, gamma)
    a = fundamental_harmonic(w)
    q = fundamental_harmonic_quad(w)
    assert abs(a - q) <= 1e-9 * max(abs(q), 1e-6)  # floor in units of V_oc


@given(tunings())
def test_fundamental_is_grid_impedance(tp):
    z, _ = impedance_grid(tp.topology, tp.phi, tp.second, GAMMA)
    assert abs(fundamental_harmonic(quiet(tp)) - complex(z)) < 1e-12 * max(1.0, abs(z))


@given(tunings(), st.floats(1e-7, 1e-3), st.floats(10.0, 1e4))
def test_energy_split_non_negative_and_closes(tp, i_h, omega):
    w = quiet(tp, voc=i_h / (omega * 45.7e-9))
    e_h, e_d = energy_split(w, i_h, omega)
    cyc = work_cycle(w, i_h, omega)
    tol = 1e-9 * i_h * w.voc / omega  # C_p V_oc^2 sets the energy scale
    assert e_h >= -tol
    assert e_d >= -tol
    assert e_h + e_d == pytest.approx(cyc.area, rel=1e-3, abs=tol)


@given(tunings(), st.floats(1e-7, 1e-3), st.floats(10.0, 1e4))
def test_work_cycle_area_is_real_power(tp, i_h, omega):
    cp = 45.7e-9
    w = quiet(tp, voc=i_h / (omega * cp))
    z, _ = impedance_grid(tp.topology, tp.phi, tp.second, GAMMA)
    p_elec = 0.5 * i_h**2 * complex(z).real / (omega * cp)
    area = work_cycle(w, i_h, omega).area
    scale = 0.5 * i_h**2 / (omega * cp)
    assert area * omega / (2 * PI) == pytest.approx(p_elec, rel=1e-3, abs=1e-9 * scale)


def test_shoelace_unit_square():
    v = np.array([0.0, 1.0, 1.0, 0.0])
    q = np.array([0.0, 0.0, 1.0, 1.0])
    assert shoelace_area(v, q) == pytest.approx(1.0)


def test_work_cycle_resolution_guard():
    with pytest.raises(ValueError):
        work_cycle(synthesize_vp(TuningPoint(Topology.SECE, 0.0), GAMMA), 1e-6, 100.0, samples=100)
