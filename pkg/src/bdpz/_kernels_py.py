"""Pure NumPy kernels: RK4 stepping and batched path sampling.

This module is the fallback used when the compiled extension
(``bdpz._kernels``) is not available; both expose the same functions and
produce the same results (the compiled core is just faster).  Rates are
passed as per-state coefficient tables ``a + b*sin(w t) + c*cos(w t)``
with ``w`` looked up through ``widx`` in the shared ``omegas`` table, so
a step needs only a handful of trig evaluations.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_2_POW_NEG53 = 2.0 ** -53


def _rates(t, a, b, c, widx, omegas):
    s = np.sin(omegas * t)
    co = np.cos(omegas * t)
    return a + b * s[widx] + c * co[widx]


def rk4_segment(p, t0, h, n_steps,
                lam_a, lam_b, lam_c, lam_w,
                mu_a, mu_b, mu_c, mu_w, omegas):
    """Advance the truncated forward equations by n_steps of size h.

    The state vector is indexed by window position; boundary coefficient
    rows are expected to be pre-zeroed by the caller (no flow out of the
    window).  Returns a new array, leaving ``p`` untouched.
    """
    p = np.array(p, dtype=float, copy=True)
    n = p.size
    k1, k2, k3, k4 = (np.empty(n) for _ in range(4))
    q = np.empty(n)
    fb = np.empty(n)
    fd = np.empty(n)

    def deriv(lam, mu, state, out):
        np.multiply(lam, state, out=fb)
        np.multiply(mu, state, out=fd)
        np.add(fb, fd, out=out)
        np.negative(out, out=out)
        out[1:] += fb[:-1]
        out[:-1] += fd[1:]

    for step in range(n_steps):
        t = t0 + step * h
        lam1 = _rates(t, lam_a, lam_b, lam_c, lam_w, omegas)
        mu1 = _rates(t, mu_a, mu_b, mu_c, mu_w, omegas)
        lam2 = _rates(t + 0.5 * h, lam_a, lam_b, lam_c, lam_w, omegas)
        mu2 = _rates(t + 0.5 * h, mu_a, mu_b, mu_c, mu_w, omegas)
        lam3 = _rates(t + h, lam_a, lam_b, lam_c, lam_w, omegas)
        mu3 = _rates(t + h, mu_a, mu_b, mu_c, mu_w, omegas)

        deriv(lam1, mu1, p, k1)
        np.multiply(k1, 0.5 * h, out=q)
        q += p
        deriv(lam2, mu2, q, k2)
        np.multiply(k2, 0.5 * h, out=q)
        q += p
        deriv(lam2, mu2, q, k3)
        np.multiply(k3, h, out=q)
        q += p
        deriv(lam3, mu3, q, k4)

        k2 += k3
        k2 *= 2.0
        k1 += k2
        k1 += k4
        k1 *= h / 6.0
        p += k1
    return p


def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def path_stream_state(seed: int, index) -> tuple:
    """Initial (state, gamma) of the counter-based per-path generator.

    ``index`` may be a scalar or an array of path indices.
    """
    idx = np.asarray(index, dtype=np.uint64)
    base = np.uint64(seed) + (idx + np.uint64(1)) * _GOLDEN
    s = _mix64(base)
    gamma = _mix64(base + _GOLDEN) | np.uint64(1)
    return s, gamma


def simulate_final_states(n_paths, seed, x0, t_end, h_clamp,
                          lam_a, lam_b, lam_c, lam_w,
                          mu_a, mu_b, mu_c, mu_w, omegas,
                          lam_bar, mu_bar, chunk=262144):
    """Final states X(t_end) of n_paths thinned jump paths.

    Coefficient tables cover the clamped state range [-h_clamp, h_clamp];
    states beyond it reuse the boundary row (rates there no longer depend
    on the state).  Path i draws from its own splitmix stream, so results
    do not depend on chunking or execution order.
    """
    finals = np.empty(n_paths, dtype=np.int64)
    r_tot = lam_bar + mu_bar
    for lo in range(0, n_paths, chunk):
        hi = min(lo + chunk, n_paths)
        finals[lo:hi] = _simulate_chunk(
            np.arange(lo, hi, dtype=np.uint64), seed, x0, t_end, h_clamp,
            lam_a, lam_b, lam_c, lam_w, mu_a, mu_b, mu_c, mu_w, omegas,
            lam_bar, mu_bar, r_tot)
    return finals


def _simulate_chunk(indices, seed, x0, t_end, h_clamp,
                    lam_a, lam_b, lam_c, lam_w,
                    mu_a, mu_b, mu_c, mu_w, omegas,
                    lam_bar, mu_bar, r_tot):
    m = indices.size
    s, gamma = path_stream_state(seed, indices)
    state = np.full(m, x0, dtype=np.int64)
    t = np.zeros(m)
    out = np.full(m, x0, dtype=np.int64)
    slot = np.arange(m)

    while slot.size:
        idx = np.clip(state, -h_clamp, h_clamp) + h_clamp
        rr = r_tot[idx]
        alive = rr > 0.0  # zero total rate: absorbing, final state known
        if not alive.all():
            out[slot[~alive]] = state[~alive]
            slot, s, gamma, state, t, idx, rr = (
                a[alive] for a in (slot, s, gamma, state, t, idx, rr))
            if not slot.size:
                break

        s = s + gamma
        u1 = ((_mix64(s) >> np.uint64(11)).astype(np.float64) + 0.5) * _2_POW_NEG53
        t = t - np.log(u1) / rr
        s = s + gamma
        u2 = ((_mix64(s) >> np.uint64(11)).astype(np.float64) + 0.5) * _2_POW_NEG53

        expired = t > t_end
        if expired.any():
            out[slot[expired]] = state[expired]

        sin_t = np.sin(np.outer(t, omegas))
        cos_t = np.cos(np.outer(t, omegas))
        ar = np.arange(t.size)
        lam = lam_a[idx] + lam_b[idx] * sin_t[ar, lam_w[idx]] + lam_c[idx] * cos_t[ar, lam_w[idx]]
        mu = mu_a[idx] + mu_b[idx] * sin_t[ar, mu_w[idx]] + mu_c[idx] * cos_t[ar, mu_w[idx]]
        v = u2 * rr
        state = state + (v < lam).astype(np.int64) - ((v >= lam) & (v < lam + mu)).astype(np.int64)

        keep = ~expired
        slot, s, gamma, state, t = (a[keep] for a in (slot, s, gamma, state, t))

    return out
