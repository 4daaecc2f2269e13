"""Compiled per-edge kernels for the data-slot part of the EP schedule.

Each kernel is a fused loop equivalent to a sequence of the vectorized
functions in :mod:`gfscma.receivers.ep`; the test suite checks the two
agree.
"""

from __future__ import annotations

import numba as nb
import numpy as np

from ..messages import VAR_FLOOR


@nb.njit(cache=True, fastmath=False)
def detect_project(fm, fv, am, av, X, log_prior, user_edges):
    """Distances, extrinsic symbol messages, weights and both projections.

    Parameters have shapes ``fm, fv, am, av`` (B, S, E), ``X`` (E, M+1),
    ``log_prior`` (M+1, K) and ``user_edges`` (K, d_v).

    Returns ``delta, xf, beta`` (B, S, E, M+1) and the projected
    ``(u_mean, u_var, a_mean, a_var)`` (B, S, E).
    """
    B, S, E = fm.shape
    M1 = X.shape[1]
    K, dv = user_edges.shape
    delta = np.empty((B, S, E, M1))
    xf = np.empty((B, S, E, M1))
    beta = np.empty((B, S, E, M1))
    um = np.empty((B, S, E), dtype=np.complex128)
    uv = np.empty((B, S, E))
    amo = np.empty((B, S, E), dtype=np.complex128)
    avo = np.empty((B, S, E))
    X2 = np.empty((E, M1))
    for e in range(E):
        for m in range(M1):
            X2[e, m] = X[e, m].real ** 2 + X[e, m].imag ** 2
    svec = np.empty(M1)
    dsum = np.empty(M1)
    lw = np.empty(M1)
    for b in range(B):
        for t in range(S):
            for e in range(E):
                f_m = fm[b, t, e]
                a_m = am[b, t, e]
                for m in range(M1):
                    s = fv[b, t, e] + av[b, t, e] * X2[e, m]
                    x = X[e, m]
                    rr = f_m.real - (a_m.real * x.real - a_m.imag * x.imag)
                    ri = f_m.imag - (a_m.real * x.imag + a_m.imag * x.real)
                    delta[b, t, e, m] = (rr * rr + ri * ri) / s + np.log(s)
            for k in range(K):
                for m in range(M1):
                    acc = 0.0
                    for i in range(dv):
                        acc += delta[b, t, user_edges[k, i], m]
                    dsum[m] = acc
                # beta is the full posterior of user k, shared by its edges
                top = -np.inf
                for m in range(M1):
                    lw[m] = log_prior[m, k] - dsum[m]
                    if lw[m] > top:
                        top = lw[m]
                z = 0.0
                for m in range(M1):
                    lw[m] = np.exp(lw[m] - top)
                    z += lw[m]
                for i in range(dv):
                    e = user_edges[k, i]
                    for m in range(M1):
                        beta[b, t, e, m] = lw[m] / z
                    top2 = -np.inf
                    for m in range(M1):
                        svec[m] = log_prior[m, k] - (dsum[m] - delta[b, t, e, m])
                        if svec[m] > top2:
                            top2 = svec[m]
                    z2 = 0.0
                    for m in range(M1):
                        svec[m] = np.exp(svec[m] - top2)
                        z2 += svec[m]
                    for m in range(M1):
                        xf[b, t, e, m] = svec[m] / z2
            for e in range(E):
                f_m = fm[b, t, e]
                f_v = fv[b, t, e]
                a_m = am[b, t, e]
                a_v = av[b, t, e]
                mur = 0.0
                mui = 0.0
                su = 0.0
                mar = 0.0
                mai = 0.0
                sa = 0.0
                for m in range(M1):
                    w = beta[b, t, e, m]
                    x = X[e, m]
                    ax2 = a_v * X2[e, m]
                    inv = 1.0 / (f_v + ax2)
                    # a_m x and f_m conj(x) as real pairs
                    axr = a_m.real * x.real - a_m.imag * x.imag
                    axi = a_m.real * x.imag + a_m.imag * x.real
                    fxr = f_m.real * x.real + f_m.imag * x.imag
                    fxi = f_m.imag * x.real - f_m.real * x.imag
                    cur = (axr * f_v + f_m.real * ax2) * inv
                    cui = (axi * f_v + f_m.imag * ax2) * inv
                    car = (a_m.real * f_v + fxr * a_v) * inv
                    cai = (a_m.imag * f_v + fxi * a_v) * inv
                    mur += w * cur
                    mui += w * cui
                    su += w * (cur * cur + cui * cui + f_v * ax2 * inv)
                    mar += w * car
                    mai += w * cai
                    sa += w * (car * car + cai * cai + f_v * a_v * inv)
                um[b, t, e] = mur + 1j * mui
                uv[b, t, e] = max(su - (mur * mur + mui * mui), VAR_FLOOR)
                amo[b, t, e] = mar + 1j * mai
                avo[b, t, e] = max(sa - (mar * mar + mai * mai), VAR_FLOOR)
    return delta, xf, beta, um, uv, amo, avo


@nb.njit(cache=True)
def ep_update(mb, vb, mi, vi, mo, vo, var_cap, factor):
    """Clamped EP division ``belief / incoming`` followed by damping against ``(mo, vo)``.

    Elementwise equivalent of ``damp(*ep_divide(mb, vb, mi, vi, var_cap), mo, vo, factor)``;
    all inputs share one shape.
    """
    m_out = np.empty(mb.shape, dtype=np.complex128)
    v_out = np.empty(mb.shape)
    fm_b, fv_b, fm_i, fv_i = mb.ravel(), vb.ravel(), mi.ravel(), vi.ravel()
    fm_o, fv_o = mo.ravel(), vo.ravel()
    om, ov = m_out.ravel(), v_out.ravel()
    for j in range(fm_b.size):
        p = 1.0 / fv_b[j] - 1.0 / fv_i[j]
        if p > 0.0 and np.isfinite(p):
            v = 1.0 / p
            m = v * (fm_b[j] / fv_b[j] - fm_i[j] / fv_i[j])
            if not (np.isfinite(m.real) and np.isfinite(m.imag)):
                v = var_cap
                m = fm_b[j]
        else:
            v = var_cap
            m = fm_b[j]
        if factor < 1.0:
            pd = factor / v + (1.0 - factor) / fv_o[j]
            eta = factor * m / v + (1.0 - factor) * fm_o[j] / fv_o[j]
            v = 1.0 / pd
            m = eta * v
        om[j] = m
        ov[j] = v
    return m_out, v_out
