"""Ergodicity, concentration and truncation bounds.

Everything here is driven by a positive weight sequence {d_k, k != 0} with
inf d_k = 1, represented as a finite head plus two geometric tails.  The
weights define column-sum rate functions beta_k(t) whose infimum beta(t)
over the nonzero states controls the decay of the distance between any two
solutions of the forward equations in a weighted l1 norm.  Exponential
envelopes (M, beta) fitted to exp(-int beta) turn that decay into
closed-form concentration (tail) bounds and into an a-priori error bound
for truncating the doubly infinite state space to a finite window.

Because the truncation bound is a ratio of geometric partial sums whose
magnitudes can span dozens of orders of magnitude, it is evaluated with
mpmath at >= 50 significant digits; reports carry a full-precision decimal
string next to the float value.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from mpmath import mp, mpf

from .errors import (
    DecreasingQuotient,
    NotAchievable,
    NotErgodicWithTheseWeights,
    WeightConfigError,
)
from .model import RateModel, birth_rate, death_rate, rate_upper_bounds
from .solver import ProbabilitySnapshot


# ---------------------------------------------------------------------------
# Weight sequences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightSequence:
    """Doubly infinite positive weights d_k (k != 0) with inf d_k = 1.

    ``head`` lists d_k explicitly for 0 < |k| <= K0; beyond the head the
    sequence continues geometrically: d_{k+1} = pos_ratio * d_k for k >= K0
    and d_{-k-1} = neg_ratio * d_{-k} for k >= K0.  Ratios below 1 would
    drive the infimum to 0 and are rejected.
    """

    head: dict[int, float]
    pos_ratio: float = 1.0
    neg_ratio: float = 1.0

    def __post_init__(self):
        if not self.head:
            raise WeightConfigError("weight head is empty")
        k0 = max(abs(k) for k in self.head)
        for j in range(1, k0 + 1):
            if j not in self.head or -j not in self.head:
                raise WeightConfigError(f"weight head must list every 0<|k|<={k0}; missing {j} or {-j}")
        if any(k == 0 for k in self.head):
            raise WeightConfigError("weight head must not contain k=0")
        if any(v <= 0 for v in self.head.values()):
            raise WeightConfigError("weights must be positive")
        if self.pos_ratio < 1.0 or self.neg_ratio < 1.0:
            raise WeightConfigError("a tail ratio below 1 drives inf d_k to 0")
        if abs(min(self.head.values()) - 1.0) > 1e-12:
            raise WeightConfigError("inf over k of d_k must equal 1")
        object.__setattr__(self, "head", dict(self.head))

    @property
    def k0(self) -> int:
        return max(abs(k) for k in self.head)

    def d(self, k: int, conv=float):
        """Weight d_k; ``conv`` lifts to another arithmetic (e.g. mpf)."""
        if k == 0:
            raise ValueError("weights are indexed by nonzero k")
        a = abs(k)
        if a <= self.k0:
            return conv(self.head[k])
        if k > 0:
            return conv(self.head[self.k0]) * conv(self.pos_ratio) ** (a - self.k0)
        return conv(self.head[-self.k0]) * conv(self.neg_ratio) ** (a - self.k0)

    def ratio(self, a: int, b: int) -> float:
        """d_a / d_b with geometric tail powers cancelled symbolically, so
        the ratio is literally constant once both indices leave the head."""
        if a == 0 or b == 0:
            raise ValueError("weights are indexed by nonzero k")
        k0 = self.k0
        sa, sb = (1 if a > 0 else -1), (1 if b > 0 else -1)
        ea, eb = max(0, abs(a) - k0), max(0, abs(b) - k0)
        ha = self.head[sa * min(abs(a), k0)]
        hb = self.head[sb * min(abs(b), k0)]
        ra = self.pos_ratio if sa > 0 else self.neg_ratio
        rb = self.pos_ratio if sb > 0 else self.neg_ratio
        if sa == sb:
            return (ha / hb) * ra ** (ea - eb)
        return (ha * ra ** ea) / (hb * rb ** eb)

    def _one_sided_sum(self, sign: int, n: int, conv):
        if n <= 0:
            return conv(0.0)
        k0 = self.k0
        total = conv(0.0)
        for j in range(1, min(n, k0) + 1):
            total += conv(self.head[sign * j])
        if n > k0:
            a = conv(self.head[sign * k0])
            r = conv(self.pos_ratio if sign > 0 else self.neg_ratio)
            tail_len = n - k0
            if r == 1:
                total += a * tail_len
            else:
                total += a * r * (r ** tail_len - 1) / (r - 1)
        return total

    def sum_pos(self, n: int, conv=float):
        """Partial sum d_1 + ... + d_n (0 for n <= 0)."""
        return self._one_sided_sum(+1, n, conv)

    def sum_neg(self, n: int, conv=float):
        """Partial sum d_{-1} + ... + d_{-n} (0 for n <= 0)."""
        return self._one_sided_sum(-1, n, conv)

    def digest(self) -> dict:
        return {
            "head": {str(k): v for k, v in sorted(self.head.items())},
            "pos_ratio": self.pos_ratio,
            "neg_ratio": self.neg_ratio,
        }


def mirror_geometric(ratio: float) -> WeightSequence:
    """d_k = ratio^(|k|-1): the shape used for the built-in random walk."""
    return WeightSequence({1: 1.0, -1: 1.0}, pos_ratio=ratio, neg_ratio=ratio)


def scaled_geometric(ratio: float, neg_scale: float) -> WeightSequence:
    """d_1 = 1, d_{-1} = c, growing by the same ratio on both sides."""
    return WeightSequence({1: 1.0, -1: neg_scale}, pos_ratio=ratio, neg_ratio=ratio)


BUILTIN_WEIGHTS = {
    "ex1": lambda: mirror_geometric(8.0 / 7.0),
    "ex1-star": lambda: mirror_geometric(4.0 / 3.0),
    "ex2": lambda: scaled_geometric(8.0 / 7.0, 2.0),
    "ex2-star": lambda: scaled_geometric(math.sqrt(2.0), 2.0),
}


def load_weights(document: str) -> WeightSequence:
    """Build a WeightSequence from a JSON document or a built-in name."""
    name = document.strip()
    if name in BUILTIN_WEIGHTS:
        return BUILTIN_WEIGHTS[name]()
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as e:
        raise WeightConfigError(f"weight config is not valid JSON: {e}") from None
    if not isinstance(doc, dict) or "head" not in doc:
        raise WeightConfigError("weight config must be an object with a 'head'")
    try:
        head = {int(k): float(v) for k, v in doc["head"].items()}
    except (TypeError, ValueError, AttributeError) as e:
        raise WeightConfigError(f"bad weight head: {e}") from None
    return WeightSequence(
        head,
        pos_ratio=float(doc.get("pos_ratio", 1.0)),
        neg_ratio=float(doc.get("neg_ratio", 1.0)),
    )


def serialize_weights(w: WeightSequence) -> str:
    return json.dumps(w.digest(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Envelopes and reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeConstants:
    """Certificate exp(-int_s^t beta(u) du) <= M exp(-beta*(t-s))."""

    M: float
    beta: float

    def __post_init__(self):
        if self.M < 1.0:
            raise ValueError("envelope prefactor M must be >= 1")
        if self.beta <= 0.0:
            raise ValueError("envelope rate beta must be positive")


@dataclass(frozen=True)
class BoundReport:
    """An evaluated right-hand side: kind, value and a parameter echo.

    ``value_str`` preserves more digits than the float when the value was
    computed in high precision; bounds are not clamped and may exceed 1.
    """

    kind: str
    value: float
    inputs_digest: dict = field(default_factory=dict)
    value_str: str = ""

    def __post_init__(self):
        if not (self.value >= 0.0):
            raise ValueError(f"bound value must be non-negative, got {self.value}")
        if not self.value_str:
            object.__setattr__(self, "value_str", repr(self.value))

    def to_json(self) -> dict:
        return {"kind": self.kind, "value": self.value_str, "inputs_digest": self.inputs_digest}


# ---------------------------------------------------------------------------
# Column-sum rate functions
# ---------------------------------------------------------------------------

def beta_kk(m: RateModel, w: WeightSequence, k: int, t):
    """Negated k-th column sum of the twice-transformed generator.

    Four-case split around the removed zero state; t may be an array.
    The value can well be negative for a poor weight choice.
    """
    if k == 0:
        raise ValueError("k must be nonzero")
    r = w.ratio
    if k < -1:
        return (birth_rate(m, k, t) + death_rate(m, k + 1, t)
                - r(k + 1, k) * birth_rate(m, k + 1, t)
                - r(k - 1, k) * death_rate(m, k, t))
    if k == -1:
        return (birth_rate(m, -1, t) + death_rate(m, 0, t)
                - r(1, -1) * birth_rate(m, 0, t)
                - r(-2, -1) * death_rate(m, -1, t))
    if k == 1:
        return (birth_rate(m, 0, t) + death_rate(m, 1, t)
                - r(2, 1) * birth_rate(m, 1, t)
                - r(-1, 1) * death_rate(m, 0, t))
    return (birth_rate(m, k - 1, t) + death_rate(m, k, t)
            - r(k + 1, k) * birth_rate(m, k, t)
            - r(k - 1, k) * death_rate(m, k - 1, t))


def candidate_ks(m: RateModel, w: WeightSequence) -> list[int]:
    """States at which beta_kk can still differ; beyond them it is constant
    in k because both the rates and the weight ratios are."""
    reach = max(w.k0, m.horizon) + 2
    return [k for a in range(1, reach + 1) for k in (a, -a)]


def beta_inf(m: RateModel, w: WeightSequence, t):
    """inf over k != 0 of beta_kk, exact thanks to tail constancy."""
    vals = [beta_kk(m, w, k, t) for k in candidate_ks(m, w)]
    out = np.minimum.reduce([np.asarray(v, dtype=float) for v in vals])
    if np.ndim(t) == 0:
        return float(out)
    return out


def _simpson(y: np.ndarray, h: float) -> float:
    n = y.size - 1
    if n % 2 or n < 2:
        raise ValueError("composite Simpson needs an even panel count")
    return (h / 3.0) * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())


def beta_integral(m: RateModel, w: WeightSequence, t_end: float, panels: int = 10000) -> float:
    """int_0^t_end of beta_inf by composite Simpson."""
    if t_end == 0.0:
        return 0.0
    panels += panels % 2
    ts = np.linspace(0.0, t_end, panels + 1)
    return _simpson(beta_inf(m, w, ts), t_end / panels)


def _golden_min(f, a: float, b: float, xtol: float = 1e-12) -> tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _check_period(m: RateModel, period: float) -> None:
    for band in m.birth_bands + m.death_bands:
        cycles = band.expr.freq * period
        if abs(cycles - round(cycles)) > 1e-9:
            raise ValueError(
                f"rates are not periodic with period {period}: frequency {band.expr.freq}"
            )


def fit_envelope(m: RateModel, w: WeightSequence, strategy: str = "pointwise",
                 period: float = 1.0, grid: int = 10000) -> EnvelopeConstants:
    """Fit (M, beta) with exp(-int_s^t beta_inf) <= M exp(-beta (t-s)).

    pointwise: beta = min_t beta_inf(t) over one period (grid + golden
    section refinement around the grid minimum), M = 1.

    period-average: beta = mean of beta_inf over one period (Simpson);
    M = exp(Omega) with Omega the oscillation (max - min) of the running
    integral of beta_inf - beta over the period grid.  Useful when
    beta_inf dips negative but its average does not.

    Raises NotErgodicWithTheseWeights when beta <= 0.
    """
    if period <= 0:
        raise ValueError("period must be positive")
    _check_period(m, period)
    grid += grid % 2
    ts = np.linspace(0.0, period, grid + 1)
    vals = beta_inf(m, w, ts)

    if strategy == "pointwise":
        j = int(np.argmin(vals))
        lo = ts[j - 1] if j > 0 else 0.0
        hi = ts[j + 1] if j < grid else period
        _, refined = _golden_min(lambda t: beta_inf(m, w, t), lo, hi)
        beta = min(float(vals[j]), refined)
        if beta <= 0.0:
            raise NotErgodicWithTheseWeights(
                f"pointwise envelope failed: min beta = {beta:.6g} <= 0")
        return EnvelopeConstants(M=1.0, beta=beta)

    if strategy == "period-average":
        beta = _simpson(vals, period / grid) / period
        if beta <= 0.0:
            raise NotErgodicWithTheseWeights(
                f"period-average envelope failed: mean beta = {beta:.6g} <= 0")
        # Running integral of (beta_inf - beta); its oscillation bounds
        # how far exp(-int beta_inf) can exceed exp(-beta (t-s)).
        devs = vals - beta
        h = period / grid
        running = np.concatenate(([0.0], np.cumsum(0.5 * h * (devs[1:] + devs[:-1]))))
        omega = float(running.max() - running.min())
        return EnvelopeConstants(M=math.exp(omega), beta=beta)

    raise ValueError(f"unknown envelope strategy {strategy!r}")


# ---------------------------------------------------------------------------
# Norms and the contraction bound
# ---------------------------------------------------------------------------

def _cumulative_weight(w: WeightSequence, k: int) -> float:
    """Sum of d_j from min(1,k) to max(-1,k): the price of moving the unit
    mass at state k to state 0 in the transformed norm."""
    if k > 0:
        return w.sum_pos(k)
    return w.sum_neg(-k)


def weighted_initial_norm(w: WeightSequence, p: ProbabilitySnapshot,
                          q: ProbabilitySnapshot) -> float:
    """Weighted l1 distance of the zero-state-free reductions of p and q.

    Equals sum over k != 0 of |p_k - q_k| * (d_1 + ... + d_k) (mirrored for
    negative k); zero exactly when p = q off state 0.
    """
    n1 = min(p.window[0], q.window[0])
    n2 = max(p.window[1], q.window[1])
    total = 0.0
    for k in range(n1, n2 + 1):
        if k == 0:
            continue
        diff = abs(p.prob(k) - q.prob(k))
        if diff:
            total += diff * _cumulative_weight(w, k)
    return total


def theorem1_bound(w: WeightSequence, env, p0: ProbabilitySnapshot,
                   q0: ProbabilitySnapshot, t: float) -> BoundReport:
    """Bound on ||p(t) - q(t)||_1 for two solutions started at p0, q0.

    ``env`` is either EnvelopeConstants (value M exp(-beta t) * norm0) or a
    number, read as the precomputed integral of beta_inf over [0, t]
    (value exp(-integral) * norm0).
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    norm0 = weighted_initial_norm(w, p0, q0)
    if isinstance(env, EnvelopeConstants):
        value = env.M * math.exp(-env.beta * t) * norm0
        digest = {"M": env.M, "beta": env.beta, "t": t, "norm0": norm0}
    else:
        value = math.exp(-float(env)) * norm0
        digest = {"beta_integral": float(env), "t": t, "norm0": norm0}
    return BoundReport("theorem1", value, digest)


def convergence_time(env: EnvelopeConstants, norm0: float, eps: float) -> float:
    """Smallest t with M exp(-beta t) norm0 <= eps (0 when already below)."""
    if norm0 <= 0 or eps <= 0:
        raise ValueError("norm0 and eps must be positive")
    return max(0.0, math.log(env.M * norm0 / eps) / env.beta)


# ---------------------------------------------------------------------------
# Concentration (tail) bounds
# ---------------------------------------------------------------------------

def tail_bound(m: RateModel, w: WeightSequence, env: EnvelopeConstants,
               p0: ProbabilitySnapshot, N: int, t: float,
               side: str = "both") -> BoundReport:
    """Bound on Pr(X(t) <= -N), Pr(X(t) >= N) or their sum.

    ``t = inf`` evaluates the limiting bound (the transient term vanishes).
    The bound is not clamped and may exceed 1 for small N.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    lam0_bar, mu0_bar = rate_upper_bounds(m, 0)
    norm0 = weighted_initial_norm(w, p0, ProbabilitySnapshot.delta(0, time=p0.time))
    decay = 0.0 if math.isinf(t) else math.exp(-env.beta * t)
    bracket = env.M * (decay * norm0 + (w.d(-1) * mu0_bar + w.d(1) * lam0_bar) / env.beta)
    digest = {"N": N, "t": t, "side": side, "M": env.M, "beta": env.beta,
              "norm0": norm0, "lam0_bar": lam0_bar, "mu0_bar": mu0_bar}
    left = bracket / w.sum_neg(N)
    right = bracket / w.sum_pos(N)
    if side == "left":
        return BoundReport("tail_left", left, digest)
    if side == "right":
        return BoundReport("tail_right", right, digest)
    if side == "both":
        return BoundReport("tail_two_sided", left + right, digest)
    raise ValueError(f"unknown side {side!r}")


# ---------------------------------------------------------------------------
# Truncation bound and its consequences
# ---------------------------------------------------------------------------

def theorem2_values(m: RateModel, w: WeightSequence, w_star: WeightSequence,
                    env: EnvelopeConstants, env_star: EnvelopeConstants,
                    N1: int, N2: int, dps: int = 50):
    """(weighted, full) truncation bounds as mpmath values.

    ``weighted`` bounds the D-weighted distance between the doubly infinite
    and the window-truncated solutions started at state 0; ``full`` is the
    certified l1 bound 2 * weighted / min(d_{-1}, d_1).  High-precision
    arithmetic is mandatory: the partial sums span enough orders of
    magnitude that double evaluation degrades the quotients.
    """
    if not (N1 < 0 < N2):
        raise ValueError("need N1 < 0 < N2")
    with mp.workdps(dps):
        lam0_bar, mu0_bar = rate_upper_bounds(m, 0)
        mu_bar_lo = rate_upper_bounds(m, N1)[1]
        lam_bar_hi = rate_upper_bounds(m, N2)[0]
        prefactor = (2 * mpf(env.M) * mpf(env_star.M)
                     * (mpf(mu0_bar) * w_star.d(-1, mpf) + mpf(lam0_bar) * w_star.d(1, mpf))
                     / (mpf(env_star.beta) * mpf(env.beta)))
        left = w.sum_neg(-N1 + 1, mpf) * mpf(mu_bar_lo) / w_star.sum_neg(-N1, mpf)
        right = w.sum_pos(N2 + 1, mpf) * mpf(lam_bar_hi) / w_star.sum_pos(N2, mpf)
        weighted = prefactor * (left + right)
        full = 2 * weighted / min(w.d(-1, mpf), w.d(1, mpf))
        return weighted, full


def theorem2_bound(m: RateModel, w: WeightSequence, w_star: WeightSequence,
                   env: EnvelopeConstants, env_star: EnvelopeConstants,
                   N1: int, N2: int, dps: int = 50) -> BoundReport:
    """Certified bound on ||p(t) - p_truncated(t)||_1, valid for every t,
    for processes started at state 0."""
    weighted, full = theorem2_values(m, w, w_star, env, env_star, N1, N2, dps=dps)
    with mp.workdps(dps):
        digest = {
            "N1": N1, "N2": N2, "M": env.M, "beta": env.beta,
            "M_star": env_star.M, "beta_star": env_star.beta,
            "weights": w.digest(), "weights_star": w_star.digest(),
            "weighted_value": mp.nstr(weighted, 30, min_fixed=1, max_fixed=1),
        }
        return BoundReport("theorem2", float(full), digest, value_str=mp.nstr(full, 30, min_fixed=1, max_fixed=1))


def w_constant(w: WeightSequence, K_probe: int = 200) -> float:
    """W = inf over k >= 1 of both one-sided partial sums divided by k.

    Probes k = 1..K and then certifies the probe was exhaustive by checking
    that both quotients are non-decreasing at K (with geometric tails of
    ratio >= 1 they then stay non-decreasing forever).  Raises
    DecreasingQuotient when the quotients are still falling at K.
    """
    K = max(K_probe, w.k0, 1)
    best = math.inf
    s_pos = s_neg = 0.0
    for k in range(1, K + 1):
        s_pos += w.d(k)
        s_neg += w.d(-k)
        best = min(best, s_pos / k, s_neg / k)
    # Quotient monotone at K iff K * d_{K+1} >= S_K; once true for some
    # K >= K0 it stays true because the tail ratio is >= 1.
    tol = 1e-12
    if K * w.d(K + 1) < s_pos * (1 - tol) or K * w.d(-K - 1) < s_neg * (1 - tol):
        raise DecreasingQuotient(
            f"partial-sum quotients still decreasing at K={K}; increase K_probe")
    return best


def mean_error_bound(theorem2_value_weighted, W: float) -> BoundReport:
    """Bound on sum over k of |k| |p_k(t) - p_truncated_k(t)|.

    Takes the weighted (pre-conversion) truncation bound and divides by the
    W constant of the weight sequence.
    """
    if W <= 0:
        raise ValueError("W must be positive")
    if isinstance(theorem2_value_weighted, mpf):
        with mp.workdps(50):
            value = theorem2_value_weighted / mpf(W)
            return BoundReport("mean_error", float(value),
                               {"W": W, "weighted_value": mp.nstr(theorem2_value_weighted, 30, min_fixed=1, max_fixed=1)},
                               value_str=mp.nstr(value, 30, min_fixed=1, max_fixed=1))
    value = float(theorem2_value_weighted) / W
    return BoundReport("mean_error", value,
                       {"W": W, "weighted_value": repr(float(theorem2_value_weighted))})


def plan_truncation(m: RateModel, w: WeightSequence, w_star: WeightSequence,
                    env: EnvelopeConstants, env_star: EnvelopeConstants,
                    eps: float, max_n: int = 2 ** 24) -> tuple[int, int]:
    """Smallest symmetric window (-N, N) whose truncation bound is <= eps.

    Requires the star weights to grow strictly faster on both sides, which
    makes the bound eventually decreasing in the window size (doubling then
    bisection exploit that).  Raises NotAchievable otherwise.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if w_star.pos_ratio <= w.pos_ratio or w_star.neg_ratio <= w.neg_ratio:
        raise NotAchievable(
            "star weights must grow strictly faster than the base weights on both sides")

    def value(n: int):
        return theorem2_values(m, w, w_star, env, env_star, -n, n)[1]

    with mp.workdps(50):
        target = mpf(eps)
        n = 1
        if value(n) <= target:
            return (-1, 1)
        while value(2 * n) > target:
            n *= 2
            if n > max_n:
                raise NotAchievable(f"bound still above eps at N={n}")
        lo, hi = n, 2 * n  # value(lo) > eps >= value(hi)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if value(mid) <= target:
                hi = mid
            else:
                lo = mid
    return (-hi, hi)
