"""Transient solver for the truncated forward equations.

The doubly infinite system is truncated to a window {N1..N2} by zeroing the
outgoing rates at the window edges (the birth rate at N2 and the death rate
at N1), which keeps the generator's column sums at zero so probability mass
is conserved exactly.  Time stepping is classical fixed-step RK4 through
the kernel backend; output times are hit exactly by choosing an integer
number of steps per output segment, never exceeding the requested dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .errors import MassDrift, NoConvergence, StepTooLarge
from .model import (
    RateModel,
    birth_coeffs,
    death_coeffs,
    global_bound,
    rate_upper_bounds,
)

MASS_TOL = 1e-9
NEG_TOL = 1e-12


@dataclass(frozen=True)
class ProbabilitySnapshot:
    """A distribution over the window {N1..N2} at one time point.

    Entries in (-1e-12, 0) are rounding noise and are clamped to zero;
    anything more negative, or total mass outside 1 +- 1e-9, is rejected.
    """

    window: tuple[int, int]
    probs: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        n1, n2 = self.window
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (n2 - n1 + 1,):
            raise ValueError(f"probs length {p.size} does not match window {self.window}")
        if p.min(initial=0.0) < -NEG_TOL:
            raise ValueError(f"negative probability {p.min()} below tolerance")
        p = np.where(p < 0.0, 0.0, p)
        total = p.sum()
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"total mass {total} outside 1 +- {MASS_TOL}")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "window", (int(n1), int(n2)))

    @classmethod
    def delta(cls, state: int, window: tuple[int, int] | None = None,
              time: float = 0.0) -> "ProbabilitySnapshot":
        if window is None:
            window = (state, state)
        n1, n2 = window
        p = np.zeros(n2 - n1 + 1)
        p[state - n1] = 1.0
        return cls(window, p, time)

    def states(self) -> np.ndarray:
        return np.arange(self.window[0], self.window[1] + 1)

    def prob(self, k: int) -> float:
        n1, n2 = self.window
        if n1 <= k <= n2:
            return float(self.probs[k - n1])
        return 0.0

    def l1_distance(self, other: "ProbabilitySnapshot") -> float:
        n1 = min(self.window[0], other.window[0])
        n2 = max(self.window[1], other.window[1])
        a = np.zeros(n2 - n1 + 1)
        b = np.zeros(n2 - n1 + 1)
        a[self.window[0] - n1: self.window[1] - n1 + 1] = self.probs
        b[other.window[0] - n1: other.window[1] - n1 + 1] = other.probs
        return float(np.abs(a - b).sum())

    def tail_mass(self, N: int, side: str = "both") -> float:
        ks = self.states()
        if side == "left":
            sel = ks <= -N
        elif side == "right":
            sel = ks >= N
        elif side == "both":
            sel = np.abs(ks) >= N
        else:
            raise ValueError(f"unknown side {side!r}")
        return float(self.probs[sel].sum())


def moments(s: ProbabilitySnapshot) -> tuple[float, float]:
    """(mean, variance) of the snapshot."""
    ks = s.states().astype(float)
    mean = float(ks @ s.probs)
    var = float((ks * ks) @ s.probs) - mean * mean
    return mean, max(var, 0.0)


@dataclass(frozen=True)
class Trajectory:
    """Snapshots at strictly increasing times, with their moments.

    ``cycle_distance`` is set by the limiting-cycle detector: the achieved
    l1 distance between the ends of the returned period.
    """

    snapshots: tuple[ProbabilitySnapshot, ...]
    cycle_distance: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "snapshots", tuple(self.snapshots))
        times = self.times
        if np.any(np.diff(times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    @property
    def means(self) -> np.ndarray:
        return np.array([moments(s)[0] for s in self.snapshots])

    @property
    def variances(self) -> np.ndarray:
        return np.array([moments(s)[1] for s in self.snapshots])


def _window_tables(m: RateModel, n1: int, n2: int):
    """Per-state coefficient tables for the truncated window, with the
    outgoing edge rates zeroed (reflecting truncation)."""
    states = range(n1, n2 + 1)
    lam = [birth_coeffs(m, i) for i in states]
    mu = [death_coeffs(m, i) for i in states]
    lam[-1] = (0.0, 0.0, 0.0, lam[-1][3])
    mu[0] = (0.0, 0.0, 0.0, mu[0][3])
    freqs = sorted({c[3] for c in lam} | {c[3] for c in mu})
    omegas = np.array([2.0 * math.pi * f for f in freqs])
    fidx = {f: j for j, f in enumerate(freqs)}

    def unpack(coeffs):
        a = np.array([c[0] for c in coeffs])
        b = np.array([c[1] for c in coeffs])
        c_ = np.array([c[2] for c in coeffs])
        wi = np.array([fidx[c[3]] for c in coeffs], dtype=np.int32)
        return a, b, c_, wi

    return unpack(lam), unpack(mu), omegas


def default_dt(m: RateModel) -> float:
    """min(1e-3, 0.05/Delta): small enough for RK4 on any window of m."""
    delta = global_bound(m)
    return min(1e-3, 0.05 / delta) if delta > 0 else 1e-3


def integrate(m: RateModel, window: tuple[int, int], p0: ProbabilitySnapshot,
              t_end: float, dt: float | None = None,
              output_every: float | None = None) -> Trajectory:
    """Integrate the truncated forward equations from p0.time to t_end.

    Snapshots are emitted at p0.time, every ``output_every`` after it, and
    at t_end.  ``dt`` must respect the stability budget 0.1/||A|| with
    ||A|| <= 2 sup(lambda_bar_i + mu_bar_i) over the window.
    """
    n1, n2 = window
    if not (n1 < n2):
        raise ValueError("window must contain more than one state")
    if not (n1 <= p0.window[0] and p0.window[1] <= n2):
        raise ValueError("p0 must be supported on the integration window")
    t0 = p0.time
    if t_end <= t0:
        raise ValueError("t_end must exceed the starting time")
    if dt is None:
        dt = default_dt(m)
    if output_every is None:
        output_every = t_end - t0

    a_bound = 2.0 * max(sum(rate_upper_bounds(m, i)) for i in range(n1, n2 + 1))
    if a_bound > 0 and dt > 0.1 / a_bound:
        raise StepTooLarge(f"dt={dt} exceeds stability budget {0.1 / a_bound:.3e}")

    (la, lb, lc, lw), (ma, mb, mc, mw), omegas = _window_tables(m, n1, n2)

    p = np.zeros(n2 - n1 + 1)
    p[p0.window[0] - n1: p0.window[1] - n1 + 1] = p0.probs

    out_times = [t0]
    k = 1
    while t0 + k * output_every < t_end - 1e-12:
        out_times.append(t0 + k * output_every)
        k += 1
    out_times.append(t_end)

    snaps = [ProbabilitySnapshot(window, p, t0)]
    t = t0
    for t_next in out_times[1:]:
        seg = t_next - t
        n_steps = max(1, math.ceil(seg / dt - 1e-12))
        h = seg / n_steps
        p = kernels.rk4_segment(p, t, h, n_steps, la, lb, lc, lw,
                                ma, mb, mc, mw, omegas)
        t = t_next
        total = p.sum()
        if abs(total - 1.0) > MASS_TOL:
            raise MassDrift(f"mass {total} left 1 +- {MASS_TOL} at t={t}")
        if p.min() < -NEG_TOL:
            raise MassDrift(f"probability {p.min()} fell below -{NEG_TOL} at t={t}")
        snaps.append(ProbabilitySnapshot(window, p, t))
    return Trajectory(snaps)


def limiting_cycle(m: RateModel, window: tuple[int, int], p0: ProbabilitySnapshot,
                   period: float, tol: float, t_hint: float = 0.0,
                   dt: float | None = None, outputs_per_period: int = 100,
                   max_periods: int = 1000) -> Trajectory:
    """Integrate until one period reproduces itself to within tol in l1.

    Starting from ``t_hint`` (see ``bounds.convergence_time`` for a
    principled choice) the solution is advanced one period at a time and
    the ends of each period are compared; the first period with distance
    below tol is returned, with the achieved distance recorded on the
    trajectory.  Raises NoConvergence after ``max_periods`` periods.
    """
    if period <= 0 or tol <= 0:
        raise ValueError("period and tol must be positive")
    prev = p0
    if t_hint > p0.time:
        warm = integrate(m, window, p0, t_hint, dt=dt)
        prev = warm.snapshots[-1]
    for _ in range(max_periods):
        traj = integrate(m, window, prev, prev.time + period, dt=dt,
                         output_every=period / outputs_per_period)
        nxt = traj.snapshots[-1]
        dist = nxt.l1_distance(prev)
        if dist < tol:
            return Trajectory(traj.snapshots, cycle_distance=dist)
        prev = nxt
    raise NoConvergence(
        f"period-to-period distance still above {tol} after {max_periods} periods")


# ---------------------------------------------------------------------------
# CSV output (17 significant digits, byte-stable across reruns)
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(x, ".17g")


def write_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,k,p\n")
        for s in traj.snapshots:
            for k, p in zip(s.states(), s.probs):
                fh.write(f"{_fmt(s.time)},{k},{_fmt(p)}\n")


def write_moments_csv(traj: Trajectory, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,mean,variance,mass\n")
        for s in traj.snapshots:
            mean, var = moments(s)
            fh.write(f"{_fmt(s.time)},{_fmt(mean)},{_fmt(var)},{_fmt(float(s.probs.sum()))}\n")
