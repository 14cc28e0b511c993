"""Monte-Carlo path sampling by thinning, for cross-validating the solver.

While the walker sits at state i, proposals arrive at the constant
dominating rate lambda_bar_i + mu_bar_i; a proposal at time t is accepted
as an up-move with probability lambda_i(t)/R_i, as a down-move with
probability mu_i(t)/R_i, and rejected otherwise.  This samples the exact
law of the time-varying process.

Every path draws from its own counter-based splitmix64 stream derived from
the master seed and the path index, so histograms are reproducible
regardless of chunking or execution order, and path 0 of a batch is the
path returned by ``sample_path`` for the same seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .model import RateModel, birth_coeffs, death_coeffs, rate_upper_bounds
from .solver import ProbabilitySnapshot

_MASK = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_2_POW_NEG53 = 2.0 ** -53


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _stream(seed: int, path_index: int) -> tuple[int, int]:
    base = (seed + (path_index + 1) * _GOLDEN) & _MASK
    return _mix64(base), _mix64((base + _GOLDEN) & _MASK) | 1


@dataclass(frozen=True)
class PathSample:
    """One exact path: jump times and the visited states (one more state
    than jumps; consecutive states differ by exactly one)."""

    seed: int
    times: np.ndarray
    states: np.ndarray
    t_end: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=np.int64)
        if states.size != times.size + 1:
            raise ValueError("need exactly one more state than jump times")
        if times.size and (np.any(np.diff(times) <= 0) or times[0] <= 0 or times[-1] > self.t_end):
            raise ValueError("jump times must be strictly increasing within (0, t_end]")
        if np.any(np.abs(np.diff(states)) != 1):
            raise ValueError("consecutive states must differ by exactly 1")
        times.flags.writeable = False
        states.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    def state_at_end(self) -> int:
        return int(self.states[-1])


def _clamped_tables(m: RateModel):
    """Coefficient tables on the clamped state range [-H, H]; beyond the
    horizon the boundary rows apply verbatim."""
    h = m.horizon
    states = range(-h, h + 1)
    lam = [birth_coeffs(m, i) for i in states]
    mu = [death_coeffs(m, i) for i in states]
    freqs = sorted({c[3] for c in lam} | {c[3] for c in mu})
    omegas = np.array([2.0 * math.pi * f for f in freqs])
    fidx = {f: j for j, f in enumerate(freqs)}

    def unpack(coeffs):
        return (np.array([c[0] for c in coeffs]),
                np.array([c[1] for c in coeffs]),
                np.array([c[2] for c in coeffs]),
                np.array([fidx[c[3]] for c in coeffs], dtype=np.int32))

    bounds = [rate_upper_bounds(m, i) for i in states]
    lam_bar = np.array([b[0] for b in bounds])
    mu_bar = np.array([b[1] for b in bounds])
    return unpack(lam), unpack(mu), omegas, lam_bar, mu_bar


def sample_path(m: RateModel, x0: int, t_end: float, seed: int) -> PathSample:
    """Sample one path on [0, t_end]; identical to path 0 of a batch run
    with the same master seed."""
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    seed = int(seed) & _MASK
    (la, lb, lc, lw), (ma, mb, mc, mw), omegas, lam_bar, mu_bar = _clamped_tables(m)
    h = m.horizon
    s, gamma = _stream(seed, 0)
    state = int(x0)
    t = 0.0
    times = []
    states = [state]
    while True:
        idx = min(max(state, -h), h) + h
        r_tot = lam_bar[idx] + mu_bar[idx]
        if r_tot <= 0.0:
            break  # absorbing state: the path stays put
        s = (s + gamma) & _MASK
        u1 = ((_mix64(s) >> 11) + 0.5) * _2_POW_NEG53
        t -= math.log(u1) / r_tot
        if t > t_end:
            break
        s = (s + gamma) & _MASK
        u2 = ((_mix64(s) >> 11) + 0.5) * _2_POW_NEG53
        w = omegas[lw[idx]] * t
        lam = la[idx] + lb[idx] * math.sin(w) + lc[idx] * math.cos(w)
        w = omegas[mw[idx]] * t
        mu = ma[idx] + mb[idx] * math.sin(w) + mc[idx] * math.cos(w)
        v = u2 * r_tot
        if v < lam:
            state += 1
        elif v < lam + mu:
            state -= 1
        else:
            continue  # thinning rejection
        times.append(t)
        states.append(state)
    return PathSample(seed, np.array(times), np.array(states, dtype=np.int64), t_end)


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Histogram of X(t) over independent paths, with per-state standard
    errors sqrt(p_hat (1 - p_hat) / n)."""

    snapshot: ProbabilitySnapshot
    stderr: np.ndarray
    n_paths: int
    seed: int

    def total_stderr(self) -> float:
        return float(self.stderr.sum())


def final_states(m: RateModel, x0: int, t: float, n_paths: int, seed: int) -> np.ndarray:
    """Raw final states of n_paths independent paths at time t."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if t <= 0:
        raise ValueError("t must be positive")
    seed = int(seed) & _MASK
    (la, lb, lc, lw), (ma, mb, mc, mw), omegas, lam_bar, mu_bar = _clamped_tables(m)
    return np.asarray(kernels.simulate_final_states(
        n_paths, seed, int(x0), float(t), m.horizon,
        la, lb, lc, lw, ma, mb, mc, mw, omegas, lam_bar, mu_bar))


def empirical_distribution(m: RateModel, x0: int, t: float, n_paths: int,
                           seed: int) -> EmpiricalDistribution:
    """Empirical distribution of X(t), windowed to the observed support."""
    finals = final_states(m, x0, t, n_paths, seed)
    lo = int(finals.min())
    hi = int(finals.max())
    counts = np.bincount(finals - lo, minlength=hi - lo + 1)
    p_hat = counts / n_paths
    snap = ProbabilitySnapshot((lo, hi), p_hat, time=t)
    stderr = np.sqrt(p_hat * (1.0 - p_hat) / n_paths)
    return EmpiricalDistribution(snap, stderr, n_paths, int(seed) & _MASK)


def write_histogram_csv(emp: EmpiricalDistribution, path) -> None:
    snap = emp.snapshot
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("k,p_hat,stderr,n_paths,seed,t\n")
        for k, p, se in zip(snap.states(), snap.probs, emp.stderr):
            fh.write(f"{k},{format(p, '.17g')},{format(se, '.17g')},"
                     f"{emp.n_paths},{emp.seed},{format(snap.time, '.17g')}\n")
