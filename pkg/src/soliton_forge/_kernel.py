"""Compiled Dormand-Prince 5(4) march with PI step control and in-loop monitors."""

from __future__ import annotations

import numpy as np
from numba import njit

from .profile_ode import _second_derivatives_nb

STATUS_OK = 0
STATUS_BLOWUP = 1
STATUS_SIGN = 2
STATUS_STEPS = 3
STATUS_UNDERFLOW = 4
STATUS_DEGENERATE = 5

C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
A71, A73, A74, A75, A76 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)


@njit(cache=True, nogil=True)
def _deriv(y, out):
    dda, ddb, ddf = _second_derivatives_nb(y[0], y[1], y[2], y[3], y[5])
    out[0] = y[1]
    out[1] = dda
    out[2] = y[3]
    out[3] = ddb
    out[4] = y[5]
    out[5] = ddf


@njit(cache=True, nogil=True)
def _dp_step(y, comp, k1, h, ynew, inc, err, k2, k3, k4, k5, k6, k7, tmp):
    """One trial step; ``inc`` receives the raw increment and ``comp`` is the carried rounding."""
    n = 6
    for i in range(n):
        tmp[i] = y[i] + (h * A21 * k1[i] + comp[i])
    _deriv(tmp, k2)
    for i in range(n):
        tmp[i] = y[i] + (h * (A31 * k1[i] + A32 * k2[i]) + comp[i])
    _deriv(tmp, k3)
    for i in range(n):
        tmp[i] = y[i] + (h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]) + comp[i])
    _deriv(tmp, k4)
    for i in range(n):
        tmp[i] = y[i] + (h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]) + comp[i])
    _deriv(tmp, k5)
    for i in range(n):
        tmp[i] = y[i] + (h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]) + comp[i])
    _deriv(tmp, k6)
    for i in range(n):
        inc[i] = h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]) + comp[i]
        ynew[i] = y[i] + inc[i]
    _deriv(ynew, k7)
    for i in range(n):
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])


@njit(cache=True, nogil=True)
def march(y0, r_start, out_r, rtol, atol, h0, max_steps, check_signs, sign_tol,
          guard, event_level, event_on):
    """Integrate from (r_start, y0) through every radius in ``out_r`` (sorted).

    Steps are clipped so that each output radius is hit exactly.  Returns
    (status, n_filled, Y, steps, rejected, h_next, r_last, y_last,
    event_found, r_event, y_event).
    """
    n = 6
    n_out = out_r.shape[0]
    Y = np.zeros((n_out, n))
    y = y0.copy()
    ynew = np.empty(n)
    err = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    tmp = np.empty(n)
    ybr = np.empty(n)
    inc = np.empty(n)
    inc_br = np.empty(n)
    # compensated summation: b' sits next to 1 at the handoff and every ulp lost
    # there is amplified by 1/b^2 in f''
    comp = np.zeros(n)
    y_event = np.zeros(n)
    r_event = -1.0
    event_found = False

    r = r_start
    h = h0
    facold = 1e-4
    beta = 0.04
    expo1 = 0.2 - beta * 0.75
    safe = 0.9
    steps = 0
    rejected = 0
    last_rejected = False
    idx = 0
    status = STATUS_OK
    _deriv(y, k1)

    while idx < n_out:
        if steps >= max_steps:
            status = STATUS_STEPS
            break
        target = out_r[idx]
        h_try = h
        clipped = False
        if r + h_try >= target or r + 1.01 * h_try > target:
            h_try = target - r
            clipped = True
        if h_try <= 1e-15 * (1.0 + abs(r)):
            if clipped:
                for i in range(n):
                    Y[idx, i] = y[i]
                idx += 1
                continue
            status = STATUS_UNDERFLOW
            break
        _dp_step(y, comp, k1, h_try, ynew, inc, err, k2, k3, k4, k5, k6, k7, tmp)
        steps += 1
        finite = True
        for i in range(n):
            if not np.isfinite(ynew[i]):
                finite = False
        if not finite or ynew[0] <= 0.0 or ynew[2] <= 0.0:
            # treat as a rejected step with a hard cut; genuine blow-up ends in underflow
            h = 0.25 * h_try
            rejected += 1
            last_rejected = True
            if h < 1e-14 * (1.0 + abs(r)):
                status = STATUS_BLOWUP if not finite else STATUS_DEGENERATE
                break
            continue
        s = 0.0
        for i in range(n):
            sk = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            s += (err[i] / sk) ** 2
        e = np.sqrt(s / n)
        fac11 = e ** expo1
        if e <= 1.0:
            fac = fac11 / facold ** beta
            fac = max(0.1, min(5.0, fac / safe))
            hnew = h_try / fac
            if last_rejected:
                hnew = min(hnew, h_try)
            facold = max(e, 1e-4)
            # accepted step: event check on f' then monitors
            if event_on and not event_found and y[5] > event_level and ynew[5] <= event_level:
                lo = 0.0
                hi = 1.0
                glo = y[5] - event_level
                ghi = ynew[5] - event_level
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    _dp_step(y, comp, k1, mid * h_try, ybr, inc_br, err, k2, k3, k4, k5, k6, k7, tmp)
                    g = ybr[5] - event_level
                    if g > 0.0:
                        lo = mid
                        glo = g
                    else:
                        hi = mid
                        ghi = g
                    if hi - lo < 1e-15:
                        break
                # polish by linear interpolation inside the final bracket
                if ghi != glo:
                    th = lo + (hi - lo) * glo / (glo - ghi)
                else:
                    th = hi
                _dp_step(y, comp, k1, th * h_try, ybr, inc_br, err, k2, k3, k4, k5, k6, k7, tmp)
                r_event = r + th * h_try
                for i in range(n):
                    y_event[i] = ybr[i]
                event_found = True
                # restore error buffer is unnecessary; k7 is recomputed below
                _dp_step(y, comp, k1, h_try, ynew, inc, err, k2, k3, k4, k5, k6, k7, tmp)
            r = target if clipped else r + h_try
            for i in range(n):
                comp[i] = inc[i] - (ynew[i] - y[i])
                y[i] = ynew[i]
                k1[i] = k7[i]
            last_rejected = False
            big = 0.0
            for i in range(n):
                big = max(big, abs(y[i]))
            if big > guard:
                status = STATUS_BLOWUP
                break
            if check_signs:
                if (y[1] < -sign_tol * (1.0 + abs(y[0])) or y[3] < -sign_tol * (1.0 + abs(y[2]))
                        or y[5] > sign_tol * (1.0 + abs(y[4]))):
                    status = STATUS_SIGN
                    break
            if clipped:
                for i in range(n):
                    Y[idx, i] = y[i]
                idx += 1
                if hnew < h:
                    h = hnew
            else:
                h = hnew
        else:
            hnew = h_try / min(5.0, fac11 / safe)
            rejected += 1
            last_rejected = True
            h = hnew
    return (status, idx, Y, steps, rejected, h, r, y, event_found, r_event, y_event)
