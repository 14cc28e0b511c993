# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: RK4 stepping and batched path sampling.

Drop-in twin of ``bdpz._kernels_py`` (same signatures, same numbers);
selected automatically at import when the extension built.
"""

import numpy as np

from libc.math cimport cos, log, sin

BACKEND = "compiled"

cdef unsigned long long GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_POW_NEG53 = 2.0 ** -53


cdef inline unsigned long long mix64(unsigned long long z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline void _stage_rates(double t,
                              double[::1] a, double[::1] b, double[::1] c,
                              int[::1] widx, double[::1] omegas,
                              double[::1] st, double[::1] ct,
                              double[::1] out, Py_ssize_t n, Py_ssize_t m) nogil:
    cdef Py_ssize_t i
    for i in range(m):
        st[i] = sin(omegas[i] * t)
        ct[i] = cos(omegas[i] * t)
    for i in range(n):
        out[i] = a[i] + b[i] * st[widx[i]] + c[i] * ct[widx[i]]


cdef inline void _deriv(double[::1] lam, double[::1] mu, double[::1] q,
                        double[::1] out, Py_ssize_t n) nogil:
    cdef Py_ssize_t i
    cdef double fb_prev = 0.0, fb
    for i in range(n):
        fb = lam[i] * q[i]
        out[i] = fb_prev - fb - mu[i] * q[i]
        fb_prev = fb
    for i in range(n - 1):
        out[i] += mu[i + 1] * q[i + 1]


def rk4_segment(p, double t0, double h, Py_ssize_t n_steps,
                lam_a, lam_b, lam_c, lam_w,
                mu_a, mu_b, mu_c, mu_w, omegas):
    """Advance the truncated forward equations by n_steps of size h."""
    pa = np.array(p, dtype=np.float64, copy=True)
    cdef double[::1] pv = pa
    cdef double[::1] la = lam_a, lb = lam_b, lc = lam_c
    cdef double[::1] ma = mu_a, mb = mu_b, mc = mu_c
    cdef int[::1] lw = lam_w, mw = mu_w
    cdef double[::1] om = omegas
    cdef Py_ssize_t n = pv.shape[0], m = om.shape[0], step, i
    cdef double t

    scratch = np.empty((10, n))
    cdef double[::1] lam1 = scratch[0], mu1 = scratch[1]
    cdef double[::1] lam2 = scratch[2], mu2 = scratch[3]
    cdef double[::1] lam3 = scratch[4], mu3 = scratch[5]
    cdef double[::1] k = scratch[6], acc = scratch[7], q = scratch[8]
    cdef double[::1] st, ct
    trig = np.empty((2, m))
    st = trig[0]
    ct = trig[1]

    with nogil:
        for step in range(n_steps):
            t = t0 + step * h
            _stage_rates(t, la, lb, lc, lw, om, st, ct, lam1, n, m)
            _stage_rates(t, ma, mb, mc, mw, om, st, ct, mu1, n, m)
            _stage_rates(t + 0.5 * h, la, lb, lc, lw, om, st, ct, lam2, n, m)
            _stage_rates(t + 0.5 * h, ma, mb, mc, mw, om, st, ct, mu2, n, m)
            _stage_rates(t + h, la, lb, lc, lw, om, st, ct, lam3, n, m)
            _stage_rates(t + h, ma, mb, mc, mw, om, st, ct, mu3, n, m)

            _deriv(lam1, mu1, pv, k, n)            # k1
            for i in range(n):
                acc[i] = k[i]
                q[i] = pv[i] + 0.5 * h * k[i]
            _deriv(lam2, mu2, q, k, n)             # k2
            for i in range(n):
                acc[i] += 2.0 * k[i]
                q[i] = pv[i] + 0.5 * h * k[i]
            _deriv(lam2, mu2, q, k, n)             # k3
            for i in range(n):
                acc[i] += 2.0 * k[i]
                q[i] = pv[i] + h * k[i]
            _deriv(lam3, mu3, q, k, n)             # k4
            for i in range(n):
                pv[i] += (h / 6.0) * (acc[i] + k[i])
    return pa


def simulate_final_states(Py_ssize_t n_paths, seed, long long x0, double t_end,
                          int h_clamp,
                          lam_a, lam_b, lam_c, lam_w,
                          mu_a, mu_b, mu_c, mu_w, omegas,
                          lam_bar, mu_bar, chunk=0):
    """Final states X(t_end) of n_paths thinned jump paths (see the
    Python twin for the drawing scheme)."""
    cdef double[::1] la = lam_a, lb = lam_b, lc = lam_c
    cdef double[::1] ma = mu_a, mb = mu_b, mc = mu_c
    cdef int[::1] lw = lam_w, mw = mu_w
    cdef double[::1] om = omegas
    cdef double[::1] lbar = lam_bar, mbar = mu_bar
    finals_arr = np.empty(n_paths, dtype=np.int64)
    cdef long long[::1] finals = finals_arr
    cdef unsigned long long master = <unsigned long long> (int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef unsigned long long base, s, gamma, x
    cdef Py_ssize_t ipath
    cdef long long state, idx
    cdef double t, rr, u1, u2, lam, mu, v, w

    with nogil:
        for ipath in range(n_paths):
            base = master + (<unsigned long long> (ipath + 1)) * GOLDEN
            s = mix64(base)
            gamma = mix64(base + GOLDEN) | 1ULL
            state = x0
            t = 0.0
            while True:
                idx = state
                if idx > h_clamp:
                    idx = h_clamp
                elif idx < -h_clamp:
                    idx = -h_clamp
                idx += h_clamp
                rr = lbar[idx] + mbar[idx]
                if rr <= 0.0:
                    break
                s += gamma
                x = mix64(s)
                u1 = (<double> (x >> 11) + 0.5) * TWO_POW_NEG53
                t -= log(u1) / rr
                if t > t_end:
                    break
                s += gamma
                x = mix64(s)
                u2 = (<double> (x >> 11) + 0.5) * TWO_POW_NEG53
                w = om[lw[idx]] * t
                lam = la[idx] + lb[idx] * sin(w) + lc[idx] * cos(w)
                w = om[mw[idx]] * t
                mu = ma[idx] + mb[idx] * sin(w) + mc[idx] * cos(w)
                v = u2 * rr
                if v < lam:
                    state += 1
                elif v < lam + mu:
                    state -= 1
            finals[ipath] = state
    return finals_arr
