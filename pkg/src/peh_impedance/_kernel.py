"""Compiled integrator for the switched electromechanical ODE.

State layout (``NSTATE`` entries)::

    0 x   1 xdot   2 v_p
    3 input work   4 mechanical damping   5 leakage   6 rectifier harvest
    7 diode loss   8 int i_h sin(wt)   9 int i_h cos(wt)

The energy channels and the two Fourier accumulators are integrated with the
dynamics so they share its RK4 accuracy.  Steps land on a uniform grid of
``n_steps`` points per period; events split a grid step into sub-steps.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

NSTATE = 10

SEH, SECE, S_SSHI, P_SSHI, OPEN = 0, 1, 2, 3, 4
SYNC_VELOCITY, SYNC_LOCKED = 0, 1
EV_ZERO_CROSSING, EV_FLIP, EV_CLAMP, EV_RELEASE = 0, 1, 2, 3

# ledger columns, cumulative at every cycle boundary
L_INPUT, L_DAMPING, L_LEAKAGE, L_RECT, L_FLIP_HARVEST, L_FLIP_LOSS, L_DIODE, L_STORED = range(8)
N_LEDGER = 8

# parameter vector
P_M, P_K, P_D, P_ALPHA, P_CP, P_INV_RP, P_F, P_OMEGA, P_VR, P_GAMMA, P_PHI, P_DROP = range(12)
N_PARAM = 12


@njit(cache=True, nogil=True)
def _rhs(t, y, clamp, p, out):
    m, k, d, al, cp, g, f0, w = p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]
    x, u, v = y[0], y[1], y[2]
    s = math.sin(w * t)
    f = f0 * s
    out[0] = u
    out[1] = (f - d * u - k * x - al * v) / m
    i_h = al * u - v * g
    if clamp != 0:
        out[2] = 0.0
        i_rect = abs(i_h)
    else:
        out[2] = i_h / cp
        i_rect = 0.0
    out[3] = f * u
    out[4] = d * u * u
    out[5] = v * v * g
    out[6] = p[8] * i_rect
    out[7] = 2.0 * p[11] * i_rect
    out[8] = i_h * s
    out[9] = i_h * math.cos(w * t)


@njit(cache=True, nogil=True)
def _rk4(t, y, h, clamp, p, k1, k2, k3, k4, tmp, out):
    n = y.shape[0]
    _rhs(t, y, clamp, p, k1)
    for i in range(n):
        tmp[i] = y[i] + 0.5 * h * k1[i]
    _rhs(t + 0.5 * h, tmp, clamp, p, k2)
    for i in range(n):
        tmp[i] = y[i] + 0.5 * h * k2[i]
    _rhs(t + 0.5 * h, tmp, clamp, p, k3)
    for i in range(n):
        tmp[i] = y[i] + h * k3[i]
    _rhs(t + h, tmp, clamp, p, k4)
    for i in range(n):
        out[i] = y[i] + h * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0


@njit(cache=True, nogil=True)
def _crossed(kind, y, clamp, usgn, vc, p):
    """True once the event condition of ``kind`` holds at state ``y``."""
    if kind == EV_ZERO_CROSSING:
        return usgn * y[1] <= 0.0
    if kind == EV_CLAMP:
        return abs(y[2]) >= vc
    # release: rectifier current reverses
    return clamp * (p[3] * y[1] - y[2] * p[5]) <= 0.0


@njit(cache=True, nogil=True)
def _locate(kind, t, y, h, clamp, usgn, vc, p, tol, k1, k2, k3, k4, tmp, out):
    """Bisect for the first instant in (0, h] at which ``kind`` fires."""
    lo, hi = 0.0, h
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        _rk4(t, y, mid, clamp, p, k1, k2, k3, k4, tmp, out)
        if _crossed(kind, out, clamp, usgn, vc, p):
            hi = mid
        else:
            lo = mid
    return hi


@njit(cache=True, nogil=True)
def _stored(y, p):
    return 0.5 * p[0] * y[1] * y[1] + 0.5 * p[1] * y[0] * y[0] + 0.5 * p[4] * y[2] * y[2]


@njit(cache=True, nogil=True)
def _wrap(a):
    return (a + math.pi) % (2.0 * math.pi) - math.pi


@njit(cache=True, nogil=True)
def _next_locked(t_ref, t_now, theta0, w, period):
    """Next instant after t_ref + T/4 with w t = theta0 (mod pi), not before t_now."""
    n = math.ceil((w * (t_ref + 0.25 * period) - theta0) / math.pi)
    t_next = (theta0 + n * math.pi) / w
    return max(t_next, t_now)


@njit(cache=True, nogil=True)
def simulate_kernel(p, topo, sync, lock_gain, lock_start, n_steps, max_cycles, tol,
                    stable_needed, window, record_every, event_tol, y_init):
    period = 2.0 * math.pi / p[P_OMEGA]
    h = period / n_steps
    tol_t = event_tol * period
    w = p[P_OMEGA]
    phi = p[P_PHI]
    delay = phi / w if phi >= 0.0 else (math.pi + phi) / w
    vc = p[P_VR] + 2.0 * p[P_DROP]
    has_rect = topo == SEH or topo == P_SSHI
    has_flip = topo == SECE or topo == S_SSHI or topo == P_SSHI

    y = np.zeros(NSTATE)
    for i in range(3):
        y[i] = y_init[i]
    y_try = np.zeros(NSTATE)
    k1 = np.zeros(NSTATE)
    k2 = np.zeros(NSTATE)
    k3 = np.zeros(NSTATE)
    k4 = np.zeros(NSTATE)
    tmp = np.zeros(NSTATE)
    probe = np.zeros(NSTATE)

    ring_n = window * n_steps
    ring = np.zeros((ring_n, 4))
    n_rec = (max_cycles * n_steps) // record_every + 1
    trace = np.zeros((n_rec, 5))
    ledger = np.zeros((max_cycles + 1, N_LEDGER))
    ev_cap = 64 * window
    events = np.zeros((ev_cap, 4))
    n_ev = 0

    pend = np.zeros(8)
    n_pend = 0
    clamp = 0
    usgn = 0.0
    if y[1] > 0.0:
        usgn = 1.0
    elif y[1] < 0.0:
        usgn = -1.0
    flip_h = 0.0
    flip_l = 0.0
    diode_flip = 0.0
    lock_active = False
    psi = 0.0
    lock_err = 0.0
    last_flip = -1e300

    ledger[0, L_STORED] = _stored(y, p)
    trace[0, 1] = y[0]
    trace[0, 2] = y[1]
    trace[0, 3] = y[2]
    rec = 1
    t = 0.0
    stable = 0
    converged = False
    cycles = 0
    prev_s = 0.0
    prev_c = 0.0

    for cyc in range(max_cycles):
        for step in range(n_steps):
            gidx = cyc * n_steps + step
            t_end = (gidx + 1) * h
            while True:
                rem = t_end - t
                if rem <= 1e-12 * h:
                    t = t_end
                    break
                hs = rem
                sched = False
                if n_pend > 0 and pend[0] - t <= rem:
                    hs = max(pend[0] - t, 0.0)
                    sched = True
                kind = -1
                if hs > 0.0:
                    _rk4(t, y, hs, clamp, p, k1, k2, k3, k4, tmp, y_try)
                    best = hs
                    if usgn != 0.0 and _crossed(EV_ZERO_CROSSING, y_try, clamp, usgn, vc, p):
                        tau = _locate(EV_ZERO_CROSSING, t, y, hs, clamp, usgn, vc, p, tol_t, k1, k2, k3, k4, tmp, probe)
                        if tau <= best:
                            best, kind = tau, EV_ZERO_CROSSING
                    if has_rect and clamp == 0 and abs(y[2]) < vc and abs(y_try[2]) >= vc:
                        tau = _locate(EV_CLAMP, t, y, hs, clamp, usgn, vc, p, tol_t, k1, k2, k3, k4, tmp, probe)
                        if tau < best or (kind == -1 and tau <= best):
                            best, kind = tau, EV_CLAMP
                    if clamp != 0 and not _crossed(EV_RELEASE, y, clamp, usgn, vc, p) \
                            and _crossed(EV_RELEASE, y_try, clamp, usgn, vc, p):
                        tau = _locate(EV_RELEASE, t, y, hs, clamp, usgn, vc, p, tol_t, k1, k2, k3, k4, tmp, probe)
                        if tau < best or (kind == -1 and tau <= best):
                            best, kind = tau, EV_RELEASE
                    if kind == -1:
                        for i in range(NSTATE):
                            y[i] = y_try[i]
                        t = t + hs
                    else:
                        _rk4(t, y, best, clamp, p, k1, k2, k3, k4, tmp, y_try)
                        for i in range(NSTATE):
                            y[i] = y_try[i]
                        t = t + best
                        sched = sched and best >= hs
                if usgn == 0.0 and y[1] != 0.0:
                    usgn = 1.0 if y[1] > 0.0 else -1.0

                if kind == EV_ZERO_CROSSING:
                    usgn = -usgn
                    events[n_ev % ev_cap, 0] = t
                    events[n_ev % ev_cap, 1] = EV_ZERO_CROSSING
                    events[n_ev % ev_cap, 2] = y[2]
                    events[n_ev % ev_cap, 3] = y[2]
                    n_ev += 1
                    if clamp != 0 and _crossed(EV_RELEASE, y, clamp, usgn, vc, p):
                        clamp = 0
                        events[n_ev % ev_cap, 0] = t
                        events[n_ev % ev_cap, 1] = EV_RELEASE
                        events[n_ev % ev_cap, 2] = y[2]
                        events[n_ev % ev_cap, 3] = y[2]
                        n_ev += 1
                    if has_flip and not (sync == SYNC_LOCKED and lock_active):
                        tf = t + delay
                        j = n_pend
                        while j > 0 and pend[j - 1] > tf:
                            pend[j] = pend[j - 1]
                            j -= 1
                        pend[j] = tf
                        n_pend += 1
                        if delay == 0.0:
                            sched = True
                elif kind == EV_CLAMP:
                    sv = 1 if y[2] > 0.0 else -1
                    if sv * (p[3] * y[1] - y[2] * p[5]) > 0.0:
                        y[2] = sv * vc
                        clamp = sv
                        events[n_ev % ev_cap, 0] = t
                        events[n_ev % ev_cap, 1] = EV_CLAMP
                        events[n_ev % ev_cap, 2] = y[2]
                        events[n_ev % ev_cap, 3] = y[2]
                        n_ev += 1
                elif kind == EV_RELEASE:
                    clamp = 0
                    events[n_ev % ev_cap, 0] = t
                    events[n_ev % ev_cap, 1] = EV_RELEASE
                    events[n_ev % ev_cap, 2] = y[2]
                    events[n_ev % ev_cap, 3] = y[2]
                    n_ev += 1

                if sched and n_pend > 0:
                    for j in range(n_pend - 1):
                        pend[j] = pend[j + 1]
                    n_pend -= 1
                    v = y[2]
                    vn = v
                    if topo == SECE:
                        flip_h += 0.5 * p[P_CP] * v * v
                        vn = 0.0
                    elif topo == P_SSHI:
                        flip_l += 0.5 * p[P_CP] * v * v * (1.0 - p[P_GAMMA] * p[P_GAMMA])
                        vn = p[P_GAMMA] * v
                        clamp = 0
                    elif topo == S_SSHI and abs(v) > vc:
                        sv = 1.0 if v > 0.0 else -1.0
                        vn = p[P_GAMMA] * v + (1.0 - p[P_GAMMA]) * sv * vc
                        dq = p[P_CP] * abs(v - vn)
                        flip_h += p[P_VR] * dq
                        diode_flip += 2.0 * p[P_DROP] * dq
                        flip_l += 0.5 * p[P_CP] * (v * v - vn * vn) - vc * dq
                    y[2] = vn
                    last_flip = t
                    events[n_ev % ev_cap, 0] = t
                    events[n_ev % ev_cap, 1] = EV_FLIP
                    events[n_ev % ev_cap, 2] = v
                    events[n_ev % ev_cap, 3] = vn
                    n_ev += 1
                    if sync == SYNC_LOCKED and lock_active:
                        pend[0] = _next_locked(last_flip, t, phi - psi, w, period)
                        n_pend = 1

            ring[gidx % ring_n, 0] = y[0]
            ring[gidx % ring_n, 1] = y[1]
            ring[gidx % ring_n, 2] = y[2]
            ring[gidx % ring_n, 3] = clamp
            if (gidx + 1) % record_every == 0 and rec < n_rec:
                trace[rec, 0] = t
                trace[rec, 1] = y[0]
                trace[rec, 2] = y[1]
                trace[rec, 3] = y[2]
                trace[rec, 4] = clamp
                rec += 1

        cycles = cyc + 1
        row = ledger[cycles]
        row[L_INPUT] = y[3]
        row[L_DAMPING] = y[4]
        row[L_LEAKAGE] = y[5]
        row[L_RECT] = y[6]
        row[L_FLIP_HARVEST] = flip_h
        row[L_FLIP_LOSS] = flip_l
        row[L_DIODE] = y[7] + diode_flip
        row[L_STORED] = _stored(y, p)

        # phase of the branch-current fundamental over the cycle just ended
        s_cyc = y[8] - prev_s
        c_cyc = y[9] - prev_c
        prev_s, prev_c = y[8], y[9]
        if sync == SYNC_LOCKED and has_flip and cycles >= lock_start and (s_cyc != 0.0 or c_cyc != 0.0):
            psi_meas = math.atan2(c_cyc, s_cyc)
            if not lock_active:
                lock_active = True
                psi = psi_meas
                lock_err = 0.0
            else:
                lock_err = _wrap(psi_meas - psi)
                psi = _wrap(psi + lock_gain * lock_err)
            pend[0] = _next_locked(last_flip, t, phi - psi, w, period)
            n_pend = 1

        if cycles >= max(window, 3):
            e_now = (row[L_RECT] - ledger[cycles - 1, L_RECT]) + (row[L_FLIP_HARVEST] - ledger[cycles - 1, L_FLIP_HARVEST])
            e_prev = (ledger[cycles - 1, L_RECT] - ledger[cycles - 2, L_RECT]) \
                + (ledger[cycles - 1, L_FLIP_HARVEST] - ledger[cycles - 2, L_FLIP_HARVEST])
            w_in = row[L_INPUT] - ledger[cycles - 1, L_INPUT]
            d_stored = row[L_STORED] - ledger[cycles - 1, L_STORED]
            ok = abs(e_now - e_prev) <= tol * max(abs(e_now), 1e-6 * abs(w_in), 1e-300)
            ok = ok and abs(d_stored) <= tol * max(abs(w_in), 1e-300)
            if sync == SYNC_LOCKED and has_flip:
                ok = ok and lock_active and abs(lock_err) <= tol
            stable = stable + 1 if ok else 0
            if stable >= stable_needed:
                converged = True
                break

    return (converged, cycles, t, ring, trace[:rec], ledger[:cycles + 1], events, n_ev, psi)
