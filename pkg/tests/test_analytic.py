import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from regsat.analytic import (
    ModelParams, solve_q, log_first_moment, log_normalizer, first_moment_rate,
    event_probabilities, log_event_probabilities, log_first_moment_bayes, exact_log_first_moment,
    log_first_moment_llt, truncated_binomial_variance, bar_mu, bar_mu_vector,
    pattern_from_code, kl_divergence, nu_sq, threshold_info, max_admissible_degree,
    cycle_series_sum, cycle_series_partial, second_moment_limit, RateTable,
    rate_table, transfer_matrices, delta_trace, delta_closed, lambda_pattern,
    lambda_agg_closed, theorem_lambda_lt, flip_count, code_to_string,
    string_to_code, overlap_solve, overlap_exponents, g_stationary_points,
    bar_nu, bar_nu_matrix, g_exponent,
)
from regsat.analytic.rates import lambda_pattern_product_form
from regsat.errors import ConsistencyError, DomainError, NumericalError

Q3 = (3 - math.sqrt(5)) / 2


def _bisect_q(k):
    # Plain bisection on [1/4, 1/2], used as an independent oracle.
    lo, hi = 0.25, 0.5
    for _ in range(200):
        mid = (lo + hi) / 2
        if 2 * mid - 1 + (1 - mid) ** k < 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


class TestModelParams:
    def test_derived_m(self):
        p = ModelParams(15, 2, 3)
        assert p.m == 20
        assert p.slots == 60

    @pytest.mark.parametrize("n,d,k", [(5, 2, 3), (3, 1, 1), (2, 1, 3), (4, 0, 2)])
    def test_rejects_invalid(self, n, d, k):
        with pytest.raises(DomainError):
            ModelParams(n, d, k)

    def test_divisibility_message(self):
        with pytest.raises(DomainError, match="k must divide 2dn"):
            ModelParams(5, 2, 3)

    def test_rejects_non_integer(self):
        with pytest.raises(DomainError):
            ModelParams(6.0, 1, 3)


class TestSolveQ:
    def test_k3_closed_form(self):
        assert abs(solve_q(3) - Q3) <= 1e-12

    def test_k4_bisection_oracle(self):
        assert solve_q(4) == pytest.approx(0.4563109873, abs=1e-10)
        assert solve_q(4) == pytest.approx(_bisect_q(4), abs=1e-12)

    def test_k20_asymptotics(self):
        assert abs(solve_q(20) - (0.5 - 2.0 ** -21)) <= 2 * 20 * 4.0 ** -20

    def test_k2_degenerate_root(self):
        # 2q = 1 - (1-q)^2 reduces to q^2 = 0.
        assert solve_q(2) == 0.0

    @pytest.mark.parametrize("k", range(2, 65))
    def test_residual(self, k):
        q = solve_q(k)
        assert 0.0 <= q <= 0.5
        assert abs(2 * q - 1 + (1 - q) ** k) <= 1e-14

    def test_monotone(self):
        qs = [solve_q(k) for k in range(2, 65)]
        assert all(b >= a for a, b in zip(qs, qs[1:]))
        # Strict until q rounds to 1/2 in double precision.
        assert all(b > a for a, b in zip(qs[:40], qs[1:41]))

    @pytest.mark.parametrize("k", [1, 0, -3, 2.5])
    def test_domain(self, k):
        with pytest.raises(DomainError):
            solve_q(k)

    @given(st.integers(3, 40))
    def test_matches_bisection(self, k):
        assert solve_q(k) == pytest.approx(_bisect_q(k), abs=1e-13)


class TestFirstMoment:
    def test_value_n15(self):
        p = ModelParams(15, 2, 3)
        assert log_first_moment(p) == pytest.approx(6.6257, abs=1e-3)
        assert math.exp(log_first_moment(p)) == pytest.approx(755, rel=2e-3)

    def test_normalizer_is_negation(self):
        p = ModelParams(30, 2, 3)
        assert log_normalizer(p) == -log_first_moment(p)

    def test_bayes_route(self):
        p = ModelParams(15, 2, 3)
        assert math.exp(log_first_moment_bayes(p)) == pytest.approx(753, rel=1e-2)
        big = ModelParams(3000, 2, 3)
        # Agreement up to the O(1/n) Stirling correction of the binomial.
        assert log_first_moment_bayes(big) == pytest.approx(log_first_moment(big), abs=1e-4)

    def test_only_half_terms_non_extensive(self):
        a, b = ModelParams(300, 2, 3), ModelParams(600, 2, 3)
        q = solve_q(3)
        expect = -0.5 * (math.log(1 - (1 - q) ** 3) - math.log(4 * q * (1 - q)))
        assert log_first_moment(b) - 2 * log_first_moment(a) == pytest.approx(expect, abs=1e-9)

    def test_per_variable_rate(self):
        assert first_moment_rate(3, 2) == pytest.approx(0.4486, abs=2e-4)
        p = ModelParams(30000, 2, 3)
        assert log_first_moment(p) / p.n == pytest.approx(first_moment_rate(3, 2), abs=1e-4)

    def test_event_probabilities(self):
        p = ModelParams(15, 2, 3)
        ev = event_probabilities(p)
        q = Q3
        assert ev.P_S == pytest.approx((2 * q) ** 20, rel=1e-12)
        assert ev.P_B == pytest.approx(math.comb(60, 30) * (q * (1 - q)) ** 30, rel=1e-10)
        assert ev.P_B_given_S == pytest.approx(0.09265, abs=1e-5)
        assert ev.P_S == pytest.approx(4.58e-3, abs=1e-5)
        assert ev.P_B == pytest.approx(0.01836, abs=1e-5)

    def test_log_domain_large_n(self):
        logs = log_event_probabilities(ModelParams(30000, 5, 3))
        assert all(math.isfinite(x) for x in logs)
        assert event_probabilities(ModelParams(600, 2, 3)).P_B > 0

    def test_exact_first_moment_small(self):
        # Brute force over all bijections for n=3, d=1, k=2 (6 slots, 720 formulas).
        from regsat.model import Formula
        from regsat.counting import count_naive
        p = ModelParams(3, 1, 2)
        total = 0
        perms = list(itertools.permutations(range(p.slots)))
        for perm in perms:
            total += count_naive(Formula.from_clones(p, perm))
        assert math.exp(exact_log_first_moment(p)) == pytest.approx(total / len(perms), rel=1e-12)

    def test_exact_first_moment_value(self):
        p = ModelParams(15, 2, 3)
        assert math.exp(exact_log_first_moment(p)) == pytest.approx(1147.986044584905, rel=1e-12)

    def test_llt_constant(self):
        # The exact finite-n expectation approaches the truncated-variance LLT value.
        p = ModelParams(300, 2, 3)
        ratio = math.exp(exact_log_first_moment(p) - log_first_moment_llt(p))
        assert ratio == pytest.approx(1.0, abs=5e-3)
        q = Q3
        limit = math.sqrt(3 * (1 - q) / 2 / truncated_binomial_variance(3))
        assert math.exp(log_first_moment_llt(p) - log_first_moment(p)) == pytest.approx(limit, rel=1e-2)


class TestBarMu:
    def test_values(self):
        q = Q3
        assert bar_mu(3, (1, 1, 1)) == pytest.approx(q * q / 2, rel=1e-12)
        assert bar_mu(3, (1, 1, 1)) == pytest.approx(0.0729490, abs=1e-7)
        assert bar_mu(3, (1, -1, 1)) == pytest.approx(0.1180340, abs=1e-7)
        assert bar_mu(3, (1, -1, -1)) == pytest.approx(0.190983, abs=1e-6)

    @pytest.mark.parametrize("k", [3, 4, 5, 8])
    def test_normalized_and_balanced(self, k):
        vec = bar_mu_vector(k)
        assert vec.sum() == pytest.approx(1.0, abs=1e-10)
        weights = np.array([2 * bin(c).count("1") - k for c in range(1 << k)])
        assert abs(np.dot(vec, weights)) <= 1e-10

    def test_simplified_form(self):
        q = solve_q(5)
        for code in range(1, 32):
            w = bin(code).count("1")
            assert bar_mu(5, code) == pytest.approx(q ** w * (1 - q) ** (5 - w) / (2 * q), rel=1e-12)

    def test_all_false_rejected(self):
        with pytest.raises(DomainError):
            bar_mu(3, (-1, -1, -1))
        with pytest.raises(DomainError):
            bar_mu(3, 0)


class TestKL:
    def test_cases(self):
        assert kl_divergence([0.3, 0.7], [0.3, 0.7]) == 0.0
        assert kl_divergence([1, 0], [0.5, 0.5]) == pytest.approx(math.log(2))
        assert kl_divergence([0.5, 0.5], [1, 0]) == math.inf
        assert kl_divergence([0, 1], [0, 1]) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            kl_divergence([1.0], [0.5, 0.5])

    @given(st.lists(st.floats(0.01, 1), min_size=4, max_size=4),
           st.lists(st.floats(0.01, 1), min_size=4, max_size=4))
    def test_nonnegative(self, a, b):
        p = np.array(a) / sum(a)
        r = np.array(b) / sum(b)
        assert kl_divergence(p, r) >= 0.0


class TestNuThreshold:
    def test_nu_sq(self):
        assert nu_sq(3) == pytest.approx(0.208398, abs=1e-6)
        assert nu_sq(2) == pytest.approx(0.25, abs=1e-15)

    @pytest.mark.parametrize("k", range(2, 30))
    def test_nu_sq_formula(self, k):
        q = solve_q(k)
        assert nu_sq(k) > 0
        assert nu_sq(k) == pytest.approx(k / 16 * (1 + (k - 1) * (2 * q - 1) ** 2), rel=1e-12)

    def test_threshold_k10(self):
        info = threshold_info(10)
        assert info.max_2d_over_k == pytest.approx(702.31, abs=1e-2)
        assert info.asymptotic_threshold == pytest.approx(
            1024 * math.log(2) - 5 * math.log(2) - (1 + math.log(2)) / 2, abs=1e-12)
        assert info.asymptotic_threshold == pytest.approx(705.4704, abs=1e-4)
        assert info.condition_holds(3511)
        assert not info.condition_holds(3512)

    def test_threshold_k3_excludes_all_degrees(self):
        info = threshold_info(3)
        assert info.max_2d_over_k == pytest.approx(0.5055, abs=1e-4)
        assert not info.condition_holds(1)

    def test_max_degree(self):
        assert max_admissible_degree(10) == pytest.approx(5 * 702.3169769905843, rel=1e-12)


class TestSeries:
    def test_k3_d2(self):
        assert cycle_series_sum(3, 2) == pytest.approx(0.203513, abs=1e-5)
        assert second_moment_limit(3, 2) == pytest.approx(1.22570, abs=1e-4)

    def test_partial_l1(self):
        diag = cycle_series_partial(3, 2, 1)
        assert diag.partial_sum == pytest.approx(0.167184, abs=1e-6)
        assert diag.partial_sum + diag.tail_bound >= diag.closed_form

    @pytest.mark.parametrize("k,d", [(3, 2), (4, 3), (5, 5), (7, 10), (3, 1)])
    def test_exp_identity(self, k, d):
        assert math.exp(cycle_series_sum(k, d)) == pytest.approx(second_moment_limit(k, d), abs=1e-12)

    def test_pattern_sum_converges(self):
        rates = rate_table(3, 2, 8)
        diag = cycle_series_partial(3, 2, 8, rates)
        closed = cycle_series_partial(3, 2, 8)
        assert diag.partial_sum == pytest.approx(closed.partial_sum, rel=1e-12)
        assert 0 <= diag.closed_form - diag.partial_sum <= diag.tail_bound

    def test_divergent(self):
        with pytest.raises(DomainError, match=r"\(2d-1\)\(k-1\)\(1-4q\(1-q\)\)<1"):
            cycle_series_sum(3, 5)
        with pytest.raises(DomainError):
            second_moment_limit(3, 5)


class TestRates:
    def test_k3_d2_examples(self):
        t = rate_table(3, 2, 2)
        assert t.lambda_of((1, 1)) == 0.5
        assert t.delta_of((1, 1)) == pytest.approx(-0.2360680, abs=1e-7)
        assert t.lambda_of((1, -1)) == 1.0
        assert t.delta_of((1, -1)) == pytest.approx(0.2360680, abs=1e-7)
        assert t.lambda_of("-+") == 1.0

    @pytest.mark.parametrize("k", [3, 5, 10])
    def test_delta_routes_agree(self, k):
        q = solve_q(k)
        t = rate_table(k, 2, 6)
        for l in range(1, 7):
            closed = np.array([delta_closed([1 if c == "+" else -1 for c in s], q)
                               for s in t.patterns(l)])
            assert np.max(np.abs(t.delta[l - 1] - closed)) <= 1e-12

    def test_delta_scalar_routes(self):
        q = solve_q(4)
        for s in itertools.product([1, -1], repeat=6):
            assert delta_trace(s, q) == pytest.approx(delta_closed(s, q), abs=1e-12)

    def test_all_plus(self):
        q = solve_q(6)
        t = rate_table(6, 3, 5)
        for l in range(1, 6):
            assert t.delta_of((1,) * (2 * l)) == pytest.approx((2 * q - 1) ** l, abs=1e-14)

    @pytest.mark.parametrize("k", [3, 4, 7, 12])
    def test_eigen_relations(self, k):
        q = solve_q(k)
        mats = transfer_matrices(q)
        fixed = np.array([1 - q, q])
        other = np.array([q - 1, q])
        for sign, mat in mats.items():
            assert np.max(np.abs(mat @ fixed - fixed)) <= 1e-12
            assert np.max(np.abs(mat @ other - sign * (2 * q - 1) * other)) <= 1e-12

    @pytest.mark.parametrize("k,d", [(3, 2), (4, 3), (5, 1), (6, 4)])
    def test_lambda_agg(self, k, d):
        t = rate_table(k, d, 5)
        for (l, tt), value in t.lambda_agg.items():
            assert value == pytest.approx(lambda_agg_closed(k, d, l, tt), rel=1e-12)
            assert value == pytest.approx(2 ** l * theorem_lambda_lt(k, d, l, tt), rel=1e-12)

    def test_product_form(self):
        for s in itertools.product([1, -1], repeat=4):
            assert lambda_pattern(s, 5, 3) == pytest.approx(lambda_pattern_product_form(s, 5, 3),
                                                            rel=1e-12)

    def test_delta_bounded(self):
        t = rate_table(3, 2, 4)
        for arr in t.delta:
            assert np.all(np.abs(arr) < 1)

    def test_series_sum_field(self):
        assert rate_table(3, 2, 1).series_sum == pytest.approx(cycle_series_sum(3, 2))
        assert rate_table(3, 5, 1).series_sum is None

    def test_json_round_trip(self):
        t = rate_table(4, 3, 3)
        obj = json.loads(t.to_json())
        assert set(obj) == {"k", "d", "q", "max_len", "lambda", "delta", "series_sum"}
        assert obj["lambda"][0]["s"] == "--"
        back = RateTable.from_json(t.to_json())
        for a, b in zip(t.lam, back.lam):
            assert np.array_equal(a, b)
        for a, b in zip(t.delta, back.delta):
            assert np.array_equal(a, b)
        assert back.lambda_agg == t.lambda_agg

    def test_pattern_strings(self):
        assert code_to_string(2, 0b1001) == "+--+"
        assert string_to_code("+--+") == (2, 0b1001)
        assert flip_count((1, -1, -1, -1)) == 1

    def test_caps(self):
        with pytest.raises(DomainError):
            rate_table(3, 2, 13)
        with pytest.raises(DomainError):
            rate_table(3, 2, 0)

    def test_consistency_error(self, monkeypatch):
        import regsat.analytic.rates as rates_mod
        monkeypatch.setattr(rates_mod, "_trace_deltas", lambda l, q: np.zeros(1 << (2 * l)))
        with pytest.raises(ConsistencyError):
            rates_mod.rate_table(3, 2, 1)


class TestOverlap:
    @pytest.mark.parametrize("k", range(3, 13))
    def test_product_measure_at_bar_rho(self, k):
        q = solve_q(k)
        pt = overlap_solve(k, 0.25)
        expect = [q * q, q * (1 - q), q * (1 - q), (1 - q) ** 2]
        assert np.max(np.abs(np.array(pt.qmat) - expect)) <= 1e-10
        assert pt.s == pytest.approx(4 * q * q, rel=1e-12)

    def test_k3_values(self):
        pt = overlap_solve(3, 0.25)
        assert pt.qmat == pytest.approx((0.145898, 0.236068, 0.236068, 0.381966), abs=1e-6)
        assert pt.qmat[0] / pt.s == pytest.approx(0.25, abs=1e-12)
        assert pt.entropy == pytest.approx(2 * math.log(2), abs=1e-12)
        q = Q3
        assert pt.f_val == pytest.approx(math.log(4 * q * q) - 3 * math.log(4 * q * (1 - q)), abs=1e-12)
        assert pt.f_val == pytest.approx(-0.36653, abs=1e-5)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(3, 12), st.floats(0.005, 0.495))
    def test_invariants(self, k, rho11):
        pt = overlap_solve(k, rho11)
        r = pt.rho
        assert r[0] + r[1] == pytest.approx(0.5) and r[0] + r[2] == pytest.approx(0.5)
        assert sum(r) == pytest.approx(1.0)
        assert all(0 < x < 1 for x in pt.qmat)
        assert sum(pt.qmat) == pytest.approx(1.0, abs=1e-12)
        assert pt.qmat[1] == pt.qmat[2]
        a, b, _, c = pt.qmat
        s = 1 - 2 * (c + b) ** k + c ** k
        assert abs(a / s - rho11) <= 1e-10
        assert abs(b * (1 - (c + b) ** (k - 1)) / s - (0.5 - rho11)) <= 1e-10
        assert pt.residual <= 1e-10

    def test_domain(self):
        for bad in (0.0, 0.5, -0.1, 0.7):
            with pytest.raises(DomainError):
                overlap_solve(3, bad)

    def test_nonconvergence_raises(self, monkeypatch):
        import regsat.analytic.overlap as ov
        monkeypatch.setattr(ov, "_newton", lambda k, r, x0: (np.asarray(x0), 1.0, 50))
        with pytest.raises(NumericalError, match="residual"):
            ov.overlap_solve(3, 0.3)

    def test_exponents(self):
        ex = overlap_exponents(3, 2, 0.25)
        assert ex.H == pytest.approx(1.386294, abs=1e-6)
        assert ex.g == pytest.approx(2 * math.log(2) + (4 / 3) * math.log(1 - 0.25 + 0.25 ** 3))
        assert g_exponent(3, 2, 0.25) == ex.g

    @pytest.mark.parametrize("k", [5, 10])
    def test_stationary_at_bar_rho(self, k):
        h = 1e-5
        d = max_admissible_degree(k)
        fp = overlap_exponents(k, d, 0.25 + h).f
        fm = overlap_exponents(k, d, 0.25 - h).f
        assert abs((fp - fm) / (2 * h)) <= 1e-6

    def test_g_roots_k10(self):
        x1, x2 = g_stationary_points(10, max_admissible_degree(10))
        assert 0.8 * 2 ** -10 <= x1 <= 1.3 * 2 ** -10
        assert 0.1 <= x2 <= 0.5
        assert x1 < x2
        assert x1 == pytest.approx(1.1175e-3, rel=1e-3)

    @pytest.mark.parametrize("k", [8, 9, 11, 12])
    def test_g_roots_ordered(self, k):
        x1, x2 = g_stationary_points(k, max_admissible_degree(k))
        assert 0 < x1 < x2 < 0.5

    def test_bar_nu(self):
        q = Q3
        assert bar_nu(3, 0.25, (1, 1, 1), (1, 1, 1)) == pytest.approx(q ** 4 / 4, rel=1e-10)
        assert bar_nu(3, 0.25, (1, 1, 1), (1, 1, 1)) == pytest.approx(0.005322, abs=1e-6)
        assert bar_nu(3, 0.25, (1, 1, 1), (-1, 1, 1)) == pytest.approx(0.008610, abs=1e-6)

    @pytest.mark.parametrize("k,rho", [(3, 0.25), (3, 0.1), (5, 0.4), (6, 0.02)])
    def test_bar_nu_normalized(self, k, rho):
        assert bar_nu_matrix(k, rho).sum() == pytest.approx(1.0, abs=1e-8)

    def test_bar_nu_rejects_all_false(self):
        with pytest.raises(DomainError):
            bar_nu(3, 0.25, (-1, -1, -1), (1, 1, 1))

    def test_pattern_codes(self):
        assert pattern_from_code(0b101, 3) == (1, -1, 1)
