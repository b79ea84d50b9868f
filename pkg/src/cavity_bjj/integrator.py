"""Compiled adaptive Dormand-Prince 5(4) kernel for the mean-field flows.

One kernel serves the three vector fields used in the package (selected by an
integer model id), all expressed on the regular internal coordinates
(Sx, Sy, Sz, Re alpha, Im alpha):

  FULL      coupled junction + cavity:  dS = B x S, B = (-2*nu, 0, u*Sz),
            nu = 1 - (w12/N)*|alpha|^2; dalpha = i*delta*alpha + e,
            delta = d_c - w0 - w12*Sx.
  REDUCED   cavity adiabatically eliminated: nu = 1 - (w12/N)*e^2/delta^2,
            alpha components frozen.
  PURE_BJJ  bare junction: nu = 1, alpha components frozen.

The embedded pair uses PI (Lund) step-size control and steps exactly onto the
requested sample times, so sampled output carries no interpolation error.
Sampling may run in either time direction.  A positive ``fixed_step``
disables error control (used by the order-verification study).
"""

from __future__ import annotations

import numpy as np
from numba import njit

FULL = 0
REDUCED = 1
PURE_BJJ = 2

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_SINGULAR = 2
STATUS_MAXSTEPS = 3

_MAX_STEPS = 200_000_000


@njit(cache=True)
def rhs_into(model, y, p, out):
    d_c = p[0]
    w0 = p[1]
    w12 = p[2]
    u = p[3]
    e = p[4]
    n_atoms = p[5]
    sx, sy, sz, ar, ai = y[0], y[1], y[2], y[3], y[4]

    delta = d_c - w0 - w12 * sx
    if model == FULL:
        nu = 1.0 - (w12 / n_atoms) * (ar * ar + ai * ai)
    elif model == REDUCED:
        xi2 = (e / delta) * (e / delta)
        nu = 1.0 - (w12 / n_atoms) * xi2
    else:
        nu = 1.0

    bx = -2.0 * nu
    bz = u * sz
    out[0] = -bz * sy
    out[1] = bz * sx - bx * sz
    out[2] = bx * sy
    if model == FULL:
        out[3] = -delta * ai + e
        out[4] = delta * ar
    else:
        out[3] = 0.0
        out[4] = 0.0
    return delta


@njit(cache=True)
def _error_norm(err, y0, y1, rtol, atol):
    acc = 0.0
    for i in range(5):
        sc = atol + rtol * max(abs(y0[i]), abs(y1[i]))
        acc += (err[i] / sc) * (err[i] / sc)
    return np.sqrt(acc / 5.0)


@njit(cache=True)
def _scale_rms(y0, y1, rtol, atol):
    acc = 0.0
    for i in range(5):
        sc = atol + rtol * max(abs(y0[i]), abs(y1[i]))
        acc += sc * sc
    return np.sqrt(acc / 5.0)


@njit(cache=True)
def integrate_kernel(model, p, y0, sample_ts, rtol, atol, max_step, fixed_step, floor):
    """Integrate from sample_ts[0] to sample_ts[-1], recording each sample.

    Returns (ys, n_filled, status, t_stop, n_accepted, n_rejected, n_fev,
    err_accum, min_delta) where err_accum accumulates the per-step local
    error estimates (absolute, scale-weighted) over accepted steps and
    min_delta tracks the smallest |effective detuning| seen.
    """
    # Dormand-Prince coefficients (propagating solution is 5th order, FSAL).
    a21 = 1.0 / 5.0
    a31, a32 = 3.0 / 40.0, 9.0 / 40.0
    a41, a42, a43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
    a51, a52, a53, a54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
    a61, a62, a63, a64, a65 = (
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    )
    b1, b3, b4, b5, b6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
    e1, e3, e4, e5, e6, e7 = (
        71.0 / 57600.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    )

    n_samples = sample_ts.shape[0]
    ys = np.empty((n_samples, 5))
    for i in range(5):
        ys[0, i] = y0[i]

    t = sample_ts[0]
    t_end = sample_ts[n_samples - 1]
    sgn = 1.0 if t_end >= t else -1.0
    span = abs(t_end - t)

    y = y0.copy()
    ynew = np.empty(5)
    ytmp = np.empty(5)
    k1 = np.empty(5)
    k2 = np.empty(5)
    k3 = np.empty(5)
    k4 = np.empty(5)
    k5 = np.empty(5)
    k6 = np.empty(5)
    k7 = np.empty(5)
    errv = np.empty(5)

    n_acc = 0
    n_rej = 0
    n_fev = 0
    err_accum = 0.0

    delta0 = rhs_into(model, y, p, k1)
    n_fev += 1
    min_delta = abs(delta0)

    if span == 0.0 or n_samples == 1:
        return ys[:1], 1, STATUS_OK, t, n_acc, n_rej, n_fev, err_accum, min_delta

    # Automatic initial step (standard order-5 heuristic).
    if fixed_step > 0.0:
        h = fixed_step
    else:
        d0 = 0.0
        d1 = 0.0
        for i in range(5):
            sc = atol + rtol * abs(y[i])
            d0 += (y[i] / sc) ** 2
            d1 += (k1[i] / sc) ** 2
        d0 = np.sqrt(d0 / 5.0)
        d1 = np.sqrt(d1 / 5.0)
        if d0 < 1e-5 or d1 < 1e-5:
            h0 = 1e-6
        else:
            h0 = 0.01 * d0 / d1
        h0 = min(h0, span)
        for i in range(5):
            ytmp[i] = y[i] + sgn * h0 * k1[i]
        rhs_into(model, ytmp, p, k2)
        n_fev += 1
        d2 = 0.0
        for i in range(5):
            sc = atol + rtol * abs(y[i])
            d2 += ((k2[i] - k1[i]) / sc) ** 2
        d2 = np.sqrt(d2 / 5.0) / h0
        dm = max(d1, d2)
        if dm <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / dm) ** 0.2
        h = min(100.0 * h0, h1, span, max_step)

    safe = 0.9
    beta = 0.04
    expo1 = 0.2 - beta * 0.75
    facc1 = 5.0  # 1 / min-scale-factor
    facc2 = 0.1  # 1 / max-scale-factor
    facold = 1e-4

    idx = 1
    t_target = sample_ts[idx]
    rejected = False
    n_steps = 0

    while True:
        n_steps += 1
        if n_steps > _MAX_STEPS:
            return ys, idx, STATUS_MAXSTEPS, t, n_acc, n_rej, n_fev, err_accum, min_delta

        if fixed_step <= 0.0:
            h = min(h, max_step)
        hmin = 16.0 * 2.220446049250313e-16 * max(abs(t), 1.0)
        if h < hmin and fixed_step <= 0.0:
            return ys, idx, STATUS_UNDERFLOW, t, n_acc, n_rej, n_fev, err_accum, min_delta

        hit_sample = False
        if (abs(t_target - t) - h) <= 1e-14 * max(abs(t), abs(t_target), 1.0):
            h_use = abs(t_target - t)
            hit_sample = True
        else:
            h_use = h
        hs = sgn * h_use

        # Stages (k1 holds f(y) via FSAL).
        for i in range(5):
            ytmp[i] = y[i] + hs * a21 * k1[i]
        rhs_into(model, ytmp, p, k2)
        for i in range(5):
            ytmp[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i])
        rhs_into(model, ytmp, p, k3)
        for i in range(5):
            ytmp[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i])
        rhs_into(model, ytmp, p, k4)
        for i in range(5):
            ytmp[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i])
        rhs_into(model, ytmp, p, k5)
        for i in range(5):
            ytmp[i] = y[i] + hs * (
                a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]
            )
        rhs_into(model, ytmp, p, k6)
        for i in range(5):
            ynew[i] = y[i] + hs * (
                b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]
            )
        delta_new = rhs_into(model, ynew, p, k7)
        n_fev += 5

        for i in range(5):
            errv[i] = hs * (
                e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]
            )

        if fixed_step > 0.0:
            err = 0.0
        else:
            err = _error_norm(errv, y, ynew, rtol, atol)

        if err <= 1.0:
            # Accepted.
            n_acc += 1
            err_accum += err * _scale_rms(y, ynew, rtol, atol)
            t = t_target if hit_sample else t + hs
            for i in range(5):
                y[i] = ynew[i]
                k1[i] = k7[i]
            if abs(delta_new) < min_delta:
                min_delta = abs(delta_new)

            if hit_sample:
                for i in range(5):
                    ys[idx, i] = y[i]
                idx += 1
                if idx >= n_samples:
                    return ys, idx, STATUS_OK, t, n_acc, n_rej, n_fev, err_accum, min_delta
                t_target = sample_ts[idx]

            if model == REDUCED and abs(delta_new) < floor:
                return ys, idx, STATUS_SINGULAR, t, n_acc, n_rej, n_fev, err_accum, min_delta

            if fixed_step <= 0.0 and not hit_sample:
                # Steps clamped onto a sample time keep the controller's h.
                fac11 = err ** expo1
                fac = fac11 / facold ** beta
                fac = max(facc2, min(facc1, fac / safe))
                hnew = h_use / fac
                if rejected:
                    hnew = min(hnew, h_use)
                facold = max(err, 1e-4)
                h = hnew
            rejected = False
        else:
            n_rej += 1
            fac11 = err ** expo1
            h = h_use / min(facc1, fac11 / safe)
            rejected = True
