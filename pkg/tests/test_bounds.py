import json
import math

import numpy as np
import pytest
from mpmath import mp, mpf

from bdpz import bounds as bd
from bdpz import model as md
from bdpz import solver as sv
from bdpz.errors import (
    DecreasingQuotient,
    NotAchievable,
    NotErgodicWithTheseWeights,
    WeightConfigError,
)

from conftest import constant_model


def weight_oracle(w, j, conv=float):
    """Independent reconstruction of d_j from head and ratios."""
    a = abs(j)
    if a <= w.k0:
        return conv(w.head[j])
    base = conv(w.head[w.k0 if j > 0 else -w.k0])
    r = conv(w.pos_ratio if j > 0 else w.neg_ratio)
    return base * r ** (a - w.k0)


def beta_k_oracle(m, w, k, t):
    """Plain transcription of the four-case column-sum formula using raw
    weight divisions; used to cross-check the candidate-set reduction."""
    lam = lambda i: md.birth_rate(m, i, t)
    mu = lambda i: md.death_rate(m, i, t)
    d = lambda j: weight_oracle(w, j)
    if k < -1:
        return lam(k) + mu(k + 1) - d(k + 1) / d(k) * lam(k + 1) - d(k - 1) / d(k) * mu(k)
    if k == -1:
        return lam(-1) + mu(0) - d(1) / d(-1) * lam(0) - d(-2) / d(-1) * mu(-1)
    if k == 1:
        return lam(0) + mu(1) - d(2) / d(1) * lam(1) - d(-1) / d(1) * mu(0)
    return lam(k - 1) + mu(k) - d(k + 1) / d(k) * lam(k) - d(k - 1) / d(k) * mu(k - 1)


class TestBetaK:
    def test_ex1_beyond_cap(self, ex1, w_ex1):
        # direct substitution into the k > S case: (1 - 7/8)(6 - (8/7)*1)
        assert bd.beta_kk(ex1, w_ex1, 5, 0.0) == pytest.approx(17.0 / 28.0, abs=1e-12)

    def test_telescoping_null(self):
        m = constant_model(2.0, 1.0)
        unit = bd.WeightSequence({1: 1.0, -1: 1.0}, 1.0, 1.0)
        for k in [k for a in range(1, 21) for k in (a, -a)]:
            for t in (0.0, 0.3, 1.7):
                assert bd.beta_kk(m, unit, k, t) == 0.0

    def test_ex2_k_minus_one(self, ex2, w_ex2):
        # lambda(0)/2 - mu_1(0)/7 = 6/7
        assert bd.beta_kk(ex2, w_ex2, -1, 0.0) == pytest.approx(6.0 / 7.0, abs=1e-12)

    def test_rejects_zero_index(self, ex1, w_ex1):
        with pytest.raises(ValueError):
            bd.beta_kk(ex1, w_ex1, 0, 0.0)


class TestBetaInf:
    def test_ex1_paper_value(self, ex1, w_ex1):
        assert bd.beta_inf(ex1, w_ex1, 0.25) == pytest.approx(13.0 / 28.0, abs=1e-12)

    def test_ex2_paper_value(self, ex2, w_ex2):
        assert bd.beta_inf(ex2, w_ex2, 0.75) == pytest.approx(0.09375, abs=1e-12)

    def test_zero_model(self, zero_model, w_ex1):
        assert bd.beta_inf(zero_model, w_ex1, 0.4) == 0.0

    def test_candidate_set_matches_brute_force(self, ex1, ex2, w_ex1, w_ex2):
        rng = np.random.default_rng(3)
        for m, w in ((ex1, w_ex1), (ex2, w_ex2)):
            for t in rng.uniform(0.0, 2.0, size=25):
                brute = min(beta_k_oracle(m, w, k, float(t))
                            for a in range(1, 201) for k in (a, -a))
                assert bd.beta_inf(m, w, float(t)) == pytest.approx(brute, abs=1e-11)

    def test_tail_constancy_is_exact(self, ex1, ex2, w_ex1, w_ex2):
        for m, w in ((ex1, w_ex1), (ex2, w_ex2)):
            edge = max(w.k0, m.horizon) + 1
            for t in (0.0, 0.37, 1.92):
                ref_pos = bd.beta_kk(m, w, edge + 1, t)
                ref_neg = bd.beta_kk(m, w, -edge - 1, t)
                for k in list(range(edge + 2, edge + 40)) + [10 ** 6]:
                    assert bd.beta_kk(m, w, k, t) == ref_pos
                    assert bd.beta_kk(m, w, -k, t) == ref_neg


class TestEnvelope:
    def test_ex1_pointwise(self, ex1, w_ex1):
        env = bd.fit_envelope(ex1, w_ex1)
        assert env.M == 1.0
        assert env.beta == pytest.approx(13.0 / 28.0, abs=1e-12)

    def test_ex1_star_pointwise(self, ex1, w_ex1_star):
        env = bd.fit_envelope(ex1, w_ex1_star)
        assert env.M == 1.0
        assert env.beta == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_ex2_pointwise(self, ex2, w_ex2):
        env = bd.fit_envelope(ex2, w_ex2)
        assert env.M == 1.0
        assert env.beta == pytest.approx(0.09375, abs=1e-12)

    def test_ex2_star_pointwise(self, ex2, w_ex2_star):
        # (1 - 1/sqrt(2)) * 7/4 - (sqrt(2) - 1) * 7/8, attained at t = 3/4
        env = bd.fit_envelope(ex2, w_ex2_star)
        expected = (1 - 1 / math.sqrt(2)) * 7 / 4 - (math.sqrt(2) - 1) * 7 / 8
        assert env.beta == pytest.approx(expected, abs=1e-10)

    def test_pointwise_failure_raises(self, ex1):
        aggressive = bd.WeightSequence({1: 1.0, -1: 1.0}, 2.0, 2.0)
        with pytest.raises(NotErgodicWithTheseWeights):
            bd.fit_envelope(ex1, aggressive)

    def test_period_average_rescues_dipping_beta(self, ex1):
        # ratio-2 weights dip pointwise (3 - 2 lambda(t) < 0 near sin = 1)
        # but average to min_t over cases of 1 - 2 sin, whose mean is 1.
        aggressive = bd.WeightSequence({1: 1.0, -1: 1.0}, 2.0, 2.0)
        env = bd.fit_envelope(ex1, aggressive, strategy="period-average")
        assert env.beta == pytest.approx(1.0, abs=1e-9)
        assert env.M == pytest.approx(math.exp(2.0 / math.pi), rel=1e-5)

    def test_period_average_negative_mean_raises(self):
        # constant drift outward: every beta_k is negative on average
        m = constant_model(2.0, 1.0)
        w = bd.WeightSequence({1: 1.0, -1: 1.0}, 1.5, 1.5)
        with pytest.raises(NotErgodicWithTheseWeights):
            bd.fit_envelope(m, w, strategy="period-average")

    def test_non_periodic_rates_rejected(self, ex1, w_ex1):
        with pytest.raises(ValueError, match="periodic"):
            bd.fit_envelope(ex1, w_ex1, period=0.9)

    @pytest.mark.parametrize("case", ["ex1", "ex2", "avg"])
    def test_envelope_soundness(self, case, ex1, ex2, w_ex1, w_ex2):
        if case == "ex1":
            m, w = ex1, w_ex1
            env = bd.fit_envelope(m, w)
        elif case == "ex2":
            m, w = ex2, w_ex2
            env = bd.fit_envelope(m, w)
        else:
            m, w = ex1, bd.WeightSequence({1: 1.0, -1: 1.0}, 2.0, 2.0)
            env = bd.fit_envelope(m, w, strategy="period-average")
        # exp(-int_s^t beta_inf) <= M exp(-beta (t-s)) on random pairs within
        # three periods; integrals by composite Simpson on a shared fine grid.
        panels = 30000
        ts = np.linspace(0.0, 3.0, panels + 1)
        vals = bd.beta_inf(m, w, ts)
        h = 3.0 / panels
        rng = np.random.default_rng(11)
        pairs = rng.integers(0, panels // 2, size=(1000, 2)) * 2
        for a, b in pairs:
            a, b = (a, b) if a <= b else (b, a)
            if a == b:
                continue
            seg = vals[a:b + 1]
            integral = (h / 3.0) * (seg[0] + seg[-1] + 4.0 * seg[1:-1:2].sum()
                                    + 2.0 * seg[2:-1:2].sum())
            lhs = math.exp(-integral)
            rhs = env.M * math.exp(-env.beta * (ts[b] - ts[a]))
            assert lhs <= rhs * (1.0 + 1e-9)


class TestNormsAndTheorem1:
    def test_identical_distributions(self, w_ex1):
        p = sv.ProbabilitySnapshot.delta(3, window=(-5, 5))
        assert bd.weighted_initial_norm(w_ex1, p, p) == 0.0

    def test_mass_at_origin_only(self, w_ex1):
        p = sv.ProbabilitySnapshot.delta(0, window=(-5, 5))
        q = sv.ProbabilitySnapshot.delta(0)
        assert bd.weighted_initial_norm(w_ex1, p, q) == 0.0

    def test_two_step_displacement(self, w_ex1):
        p = sv.ProbabilitySnapshot.delta(2)
        q = sv.ProbabilitySnapshot.delta(0)
        assert bd.weighted_initial_norm(w_ex1, p, q) == pytest.approx(15.0 / 7.0, abs=1e-12)

    def test_theorem1_zero_for_equal_starts(self, w_ex1, ex1):
        env = bd.fit_envelope(ex1, w_ex1)
        p = sv.ProbabilitySnapshot.delta(0)
        for t in (0.0, 1.0, 10.0):
            assert bd.theorem1_bound(w_ex1, env, p, p, t).value == 0.0

    def test_theorem1_at_time_zero(self, w_ex1, ex1):
        env = bd.fit_envelope(ex1, w_ex1)
        p = sv.ProbabilitySnapshot.delta(1)
        q = sv.ProbabilitySnapshot.delta(0)
        assert bd.theorem1_bound(w_ex1, env, p, q, 0.0).value == pytest.approx(1.0, abs=1e-12)

    def test_theorem1_decade_decay_time(self, w_ex1, ex1):
        env = bd.fit_envelope(ex1, w_ex1)
        p = sv.ProbabilitySnapshot.delta(1)
        q = sv.ProbabilitySnapshot.delta(0)
        t_star = 28.0 * math.log(10.0) / 13.0  # 4.9594140464487138
        assert bd.theorem1_bound(w_ex1, env, p, q, t_star).value == pytest.approx(0.1, abs=1e-9)

    def test_theorem1_exact_integral_form(self, w_ex1, ex1):
        p = sv.ProbabilitySnapshot.delta(1)
        q = sv.ProbabilitySnapshot.delta(0)
        integral = bd.beta_integral(ex1, w_ex1, 2.0)
        rep = bd.theorem1_bound(w_ex1, integral, p, q, 2.0)
        # the exact form can only be tighter than the envelope form
        env = bd.fit_envelope(ex1, w_ex1)
        assert rep.value <= bd.theorem1_bound(w_ex1, env, p, q, 2.0).value * (1 + 1e-12)

    def test_chain_inequality(self, w_ex1):
        # ||p - q||_1 <= 2 ||z_p - z_q||_1 <= ||D(z_p - z_q)||
        rng = np.random.default_rng(5)
        for _ in range(200):
            a = rng.dirichlet(np.ones(21))
            b = rng.dirichlet(np.ones(21))
            p = sv.ProbabilitySnapshot((-10, 10), a)
            q = sv.ProbabilitySnapshot((-10, 10), b)
            l1 = p.l1_distance(q)
            z1 = sum(abs(p.prob(k) - q.prob(k)) for k in range(-10, 11) if k != 0)
            dz = bd.weighted_initial_norm(w_ex1, p, q)
            assert l1 <= 2.0 * z1 + 1e-12
            assert 2.0 * z1 <= dz + 1e-12

    def test_convergence_time(self, ex1, w_ex1):
        env = bd.fit_envelope(ex1, w_ex1)
        t = bd.convergence_time(env, 1.0, 0.1)
        assert t == pytest.approx(28.0 * math.log(10.0) / 13.0, abs=1e-9)
        assert bd.convergence_time(env, 1.0, 2.0) == 0.0
        slow = bd.EnvelopeConstants(1.0, 0.09375)
        assert bd.convergence_time(slow, 1.0, 1e-3) == pytest.approx(
            math.log(1000.0) / 0.09375, abs=1e-9)


def tail_oracle(m, w, M, beta, N, t, norm0=0.0):
    """Direct mpmath summation of the concentration bound."""
    with mp.workdps(40):
        lam0, mu0 = md.rate_upper_bounds(m, 0)
        s_pos = sum(weight_oracle(w, j, mpf) for j in range(1, N + 1))
        s_neg = sum(weight_oracle(w, -j, mpf) for j in range(1, N + 1))
        decay = mpf(0) if math.isinf(t) else mp.e ** (-mpf(beta) * t)
        bracket = mpf(M) * (decay * norm0 + (weight_oracle(w, -1, mpf) * mu0
                                             + weight_oracle(w, 1, mpf) * lam0) / mpf(beta))
        return float(bracket / s_neg), float(bracket / s_pos)


class TestTailBound:
    def test_ex1_limiting_value(self, ex1, w_ex1):
        # frozen from the direct-summation oracle with beta = 13/28, M = 1
        env = bd.EnvelopeConstants(1.0, 13.0 / 28.0)
        p0 = sv.ProbabilitySnapshot.delta(0)
        rep = bd.tail_bound(ex1, w_ex1, env, p0, 10, math.inf, side="both")
        assert rep.value == pytest.approx(0.87874770881880590767, rel=1e-12)
        left, right = tail_oracle(ex1, w_ex1, env.M, env.beta, 10, math.inf)
        assert rep.value == pytest.approx(left + right, rel=1e-12)

    def test_one_sided_matches_oracle(self, ex2, w_ex2):
        env = bd.fit_envelope(ex2, w_ex2)
        p0 = sv.ProbabilitySnapshot.delta(0)
        for n in (3, 10, 25):
            for t in (0.5, 4.0, math.inf):
                left, right = tail_oracle(ex2, w_ex2, env.M, env.beta, n, t)
                assert bd.tail_bound(ex2, w_ex2, env, p0, n, t, "left").value == pytest.approx(left, rel=1e-12)
                assert bd.tail_bound(ex2, w_ex2, env, p0, n, t, "right").value == pytest.approx(right, rel=1e-12)
                both = bd.tail_bound(ex2, w_ex2, env, p0, n, t, "both").value
                assert both == pytest.approx(left + right, rel=1e-12)

    def test_vacuous_bound_not_clamped(self, ex1, w_ex1):
        env = bd.fit_envelope(ex1, w_ex1)
        p0 = sv.ProbabilitySnapshot.delta(0)
        rep = bd.tail_bound(ex1, w_ex1, env, p0, 1, 0.0, side="both")
        assert rep.value >= 1.0

    def test_zero_rate_model(self, zero_model, w_ex1):
        env = bd.EnvelopeConstants(1.0, 1.0)  # formula input; rates are zero
        p0 = sv.ProbabilitySnapshot.delta(0)
        for n in (1, 5, 10):
            for t in (0.0, 3.0, math.inf):
                assert bd.tail_bound(zero_model, w_ex1, env, p0, n, t).value == 0.0


def theorem2_oracle(m, w, ws, env, envs, N1, N2):
    """Independent 60-digit evaluation: term-by-term partial sums, no
    closed-form geometric shortcuts."""
    with mp.workdps(60):
        lam0, mu0 = md.rate_upper_bounds(m, 0)
        mu_lo = md.rate_upper_bounds(m, N1)[1]
        lam_hi = md.rate_upper_bounds(m, N2)[0]
        sum_d_neg = sum(weight_oracle(w, j, mpf) for j in range(N1 - 1, 0))
        sum_ds_neg = sum(weight_oracle(ws, j, mpf) for j in range(N1, 0))
        sum_d_pos = sum(weight_oracle(w, j, mpf) for j in range(1, N2 + 2))
        sum_ds_pos = sum(weight_oracle(ws, j, mpf) for j in range(1, N2 + 1))
        d = min(weight_oracle(w, -1, mpf), weight_oracle(w, 1, mpf))
        pref = (4 * mpf(env.M) * mpf(envs.M)
                * (mpf(mu0) * weight_oracle(ws, -1, mpf) + mpf(lam0) * weight_oracle(ws, 1, mpf))
                / (d * mpf(envs.beta) * mpf(env.beta)))
        return pref * (sum_d_neg * mpf(mu_lo) / sum_ds_neg
                       + sum_d_pos * mpf(lam_hi) / sum_ds_pos)


class TestTheorem2:
    def test_ex1_paper_window(self, ex1, w_ex1, w_ex1_star):
        env = bd.fit_envelope(ex1, w_ex1)
        envs = bd.fit_envelope(ex1, w_ex1_star)
        rep = bd.theorem2_bound(ex1, w_ex1, w_ex1_star, env, envs, -150, 150)
        assert rep.value <= 1e-6
        oracle = theorem2_oracle(ex1, w_ex1, w_ex1_star, env, envs, -150, 150)
        assert abs(mpf(rep.value_str) - oracle) / oracle < 1e-10

    def test_ex2_paper_window(self, ex2, w_ex2, w_ex2_star):
        env = bd.fit_envelope(ex2, w_ex2)
        envs = bd.fit_envelope(ex2, w_ex2_star)
        rep = bd.theorem2_bound(ex2, w_ex2, w_ex2_star, env, envs, -150, 150)
        assert rep.value <= 1e-6
        oracle = theorem2_oracle(ex2, w_ex2, w_ex2_star, env, envs, -150, 150)
        assert abs(mpf(rep.value_str) - oracle) / oracle < 1e-10

    def test_weighted_value_relation(self, ex1, w_ex1, w_ex1_star):
        env = bd.fit_envelope(ex1, w_ex1)
        envs = bd.fit_envelope(ex1, w_ex1_star)
        weighted, full = bd.theorem2_values(ex1, w_ex1, w_ex1_star, env, envs, -150, 150)
        d = min(w_ex1.d(-1), w_ex1.d(1))
        assert float(full) == pytest.approx(float(2 * weighted / d), rel=1e-25)

    def test_strictly_decreasing_in_n2(self, ex1, w_ex1, w_ex1_star):
        env = bd.fit_envelope(ex1, w_ex1)
        envs = bd.fit_envelope(ex1, w_ex1_star)
        vals = [bd.theorem2_values(ex1, w_ex1, w_ex1_star, env, envs, -60, n2)[1]
                for n2 in range(5, 80, 5)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_right_term_vanishes_for_faster_star_growth(self, ex1, w_ex1, w_ex1_star):
        # with r+ < r*+ the positive-side contribution decays geometrically,
        # so the bound plateaus at the (fixed-N1) left term
        env = bd.fit_envelope(ex1, w_ex1)
        envs = bd.fit_envelope(ex1, w_ex1_star)
        v300 = bd.theorem2_values(ex1, w_ex1, w_ex1_star, env, envs, -150, 300)[1]
        v600 = bd.theorem2_values(ex1, w_ex1, w_ex1_star, env, envs, -150, 600)[1]
        assert v600 < v300
        assert float((v300 - v600) / v300) < 1e-5


class TestWConstant:
    def test_unit_weights(self):
        w = bd.WeightSequence({1: 1.0, -1: 1.0}, 1.0, 1.0)
        assert bd.w_constant(w, 50) == 1.0

    def test_mirror_geometric(self, w_ex1):
        assert bd.w_constant(w_ex1, 200) == 1.0

    def test_asymmetric_head(self, w_ex2):
        assert bd.w_constant(w_ex2, 200) == 1.0

    def test_decreasing_quotient_raises(self):
        w = bd.WeightSequence({1: 1000.0, 2: 1.0, -1: 1000.0, -2: 1.0}, 1.0, 1.0)
        with pytest.raises(DecreasingQuotient):
            bd.w_constant(w, 50)


class TestMeanError:
    def test_paper_values(self):
        assert bd.mean_error_bound(2e-8, 1.0).value == pytest.approx(2e-8, rel=1e-15)
        assert bd.mean_error_bound(1e-7, 1.0).value == pytest.approx(1e-7, rel=1e-15)
        assert bd.mean_error_bound(0.0, 1.0).value == 0.0

    def test_mpf_input_preserves_precision(self):
        with mp.workdps(50):
            rep = bd.mean_error_bound(mpf("3.5e-9"), 2.0)
        assert rep.value == pytest.approx(1.75e-9, rel=1e-12)
        assert rep.value_str.startswith("1.75")
        assert float(mpf(rep.value_str)) == rep.value


class TestPlanTruncation:
    def test_ex1_matches_paper_threshold(self, ex1, w_ex1, w_ex1_star):
        env = bd.fit_envelope(ex1, w_ex1)
        envs = bd.fit_envelope(ex1, w_ex1_star)
        n1, n2 = bd.plan_truncation(ex1, w_ex1, w_ex1_star, env, envs, 1e-6)
        assert n1 == -n2 and n2 <= 150
        assert bd.theorem2_values(ex1, w_ex1, w_ex1_star, env, envs, -n2, n2)[1] <= mpf(1e-6)
        prev = bd.theorem2_values(ex1, w_ex1, w_ex1_star, env, envs, -(n2 - 1), n2 - 1)[1]
        assert prev > mpf(1e-6)

    def test_ex2_matches_paper_threshold(self, ex2, w_ex2, w_ex2_star):
        env = bd.fit_envelope(ex2, w_ex2)
        envs = bd.fit_envelope(ex2, w_ex2_star)
        n1, n2 = bd.plan_truncation(ex2, w_ex2, w_ex2_star, env, envs, 1e-6)
        assert n1 == -n2 and n2 <= 150

    def test_boundary_eps_returns_one(self, ex1, w_ex1, w_ex1_star):
        env = bd.fit_envelope(ex1, w_ex1)
        envs = bd.fit_envelope(ex1, w_ex1_star)
        eps = float(bd.theorem2_values(ex1, w_ex1, w_ex1_star, env, envs, -1, 1)[1]) * (1 + 1e-12)
        assert bd.plan_truncation(ex1, w_ex1, w_ex1_star, env, envs, eps) == (-1, 1)

    def test_slower_star_growth_not_achievable(self, ex1, w_ex1, w_ex1_star):
        env = bd.fit_envelope(ex1, w_ex1_star)
        envs = bd.fit_envelope(ex1, w_ex1)
        with pytest.raises(NotAchievable):
            # star ratio 8/7 below base ratio 4/3
            bd.plan_truncation(ex1, w_ex1_star, w_ex1, env, envs, 1e-6)


class TestWeightConfig:
    def test_round_trip(self, w_ex2):
        back = bd.load_weights(bd.serialize_weights(w_ex2))
        for k in [k for a in range(1, 12) for k in (a, -a)]:
            assert back.d(k) == w_ex2.d(k)

    def test_builtin_names(self):
        assert bd.load_weights("ex1").pos_ratio == pytest.approx(8.0 / 7.0)
        assert bd.load_weights("ex2-star").head[-1] == 2.0

    def test_ratio_below_one_rejected(self):
        with pytest.raises(WeightConfigError, match="ratio"):
            bd.WeightSequence({1: 1.0, -1: 1.0}, 0.9, 1.0)

    def test_infimum_must_be_one(self):
        with pytest.raises(WeightConfigError, match="inf"):
            bd.WeightSequence({1: 2.0, -1: 3.0}, 1.5, 1.5)

    def test_missing_head_entry(self):
        with pytest.raises(WeightConfigError, match="missing"):
            bd.WeightSequence({1: 1.0, -1: 1.0, 2: 1.5}, 1.5, 1.5)

    def test_bad_json(self):
        with pytest.raises(WeightConfigError):
            bd.load_weights("{not json")

    def test_report_serialization(self, ex1, w_ex1):
        env = bd.fit_envelope(ex1, w_ex1)
        p0 = sv.ProbabilitySnapshot.delta(1)
        q0 = sv.ProbabilitySnapshot.delta(0)
        rep = bd.theorem1_bound(w_ex1, env, p0, q0, 1.0)
        doc = rep.to_json()
        assert doc["kind"] == "theorem1"
        assert float(doc["value"]) == pytest.approx(rep.value)
        json.dumps(doc)  # digest must be JSON-serializable
