import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from regsat.analytic import ModelParams, lambda_pattern, rate_table
from regsat.cycles import (CycleCensus, cycle_census, cycle_census_oracle, i_s_enumerate,
                           i_s_rate, pattern_signs, pattern_strings, u_statistic)
from regsat.errors import DomainError, ResourceError
from regsat.model import sample_formula, sample_planted

from conftest import formula_from_clauses


def census_params():
    return st.sampled_from([(6, 1, 3), (9, 2, 3), (12, 2, 3), (8, 2, 4), (10, 1, 2),
                            (15, 2, 3), (20, 2, 4), (30, 2, 3), (30, 1, 3), (12, 3, 4)])


class TestFixture:
    def test_four_cycle(self, cycle_fixture):
        census = cycle_census(cycle_fixture, 2)
        assert census.as_dict() == {"+--+": 1}
        assert census == cycle_census_oracle(cycle_fixture, 2)

    def test_six_cycle(self, cycle_fixture):
        census = cycle_census(cycle_fixture, 3)
        assert census.total(3) == 1
        assert census.count("+--+-+") == 1
        assert census == cycle_census_oracle(cycle_fixture, 3)


class TestCensus:
    def test_l1_counts_repeated_variables(self):
        f = formula_from_clauses([(1, -1, 2), (-2, 3, 3), (-3, 2, -3), (1, -1, -2)], n=3, d=2)
        census = cycle_census(f, 1)
        # Clause 1: x1 at +,-; clause 2: x3 at +,+; clause 3: x3 at -,-; clause 4: x1 at +,-.
        assert census.as_dict() == {"+-": 2, "++": 1, "--": 1}

    def test_simple_formula_no_short_cycles(self):
        f = formula_from_clauses([(1, 2, 3), (-1, 4, 5), (-2, -4, 6), (-3, -5, -6)], n=6, d=1)
        census = cycle_census(f, 2)
        assert census.total(1) == 0 and census.total(2) == 0

    @settings(max_examples=200, deadline=None)
    @given(census_params(), st.integers(1, 3), st.integers(0, 2 ** 32))
    def test_matches_oracle(self, triple, L, seed):
        f = sample_formula(ModelParams(*triple), np.random.default_rng(seed))
        assert cycle_census(f, L) == cycle_census_oracle(f, L)

    def test_minimal_formula(self):
        f = sample_formula(ModelParams(3, 1, 3), np.random.default_rng(0))
        assert cycle_census(f, 3) == cycle_census_oracle(f, 3)

    @pytest.mark.parametrize("seed", range(5))
    def test_chunks_do_not_matter(self, seed):
        f = sample_formula(ModelParams(60, 2, 3), np.random.default_rng(seed))
        assert cycle_census(f, 4) == cycle_census(f, 4, chunks=7)

    @pytest.mark.parametrize("seed", range(10))
    def test_orientation_doubling(self, seed):
        f = sample_formula(ModelParams(30, 2, 3), np.random.default_rng(seed))
        single = cycle_census(f, 3)
        double = cycle_census(f, 3, both_orientations=True)
        for l in range(1, 4):
            assert double.total(l) == 2 * single.total(l)
        assert double == single + single.reversed()

    def test_json(self, cycle_fixture):
        census = cycle_census(cycle_fixture, 2)
        obj = json.loads(census.to_json())
        assert obj["L"] == 2 and obj["counts"]["+--+"] == 1 and obj["counts"]["++"] == 0
        assert CycleCensus.from_json(census.to_json()) == census

    def test_caps(self):
        f = sample_formula(ModelParams(6, 1, 3), np.random.default_rng(0))
        with pytest.raises(DomainError):
            cycle_census(f, 9)
        with pytest.raises(ResourceError):
            cycle_census_oracle(f, 5)
        big = sample_formula(ModelParams(1002, 1, 2), np.random.default_rng(0))
        with pytest.raises(ResourceError):
            cycle_census_oracle(big, 1)


class TestUStatistic:
    def test_empty_census(self):
        rates = rate_table(3, 2, 1)
        empty = CycleCensus(1, (np.zeros(4, dtype=np.int64),))
        assert u_statistic(empty, rates, 1) == pytest.approx(-0.236068, abs=1e-6)

    def test_single_count(self):
        rates = rate_table(3, 2, 1)
        one = CycleCensus(1, (np.array([0, 0, 1, 0]),))
        expect = math.log(1.2360680) - 0.236068
        assert u_statistic(one, rates, 1) == pytest.approx(expect, abs=1e-6)
        assert u_statistic(one, rates, 1) == pytest.approx(-0.0241327, abs=1e-6)

    def test_zero_ell(self):
        rates = rate_table(3, 2, 1)
        assert u_statistic(CycleCensus(1, (np.ones(4, dtype=np.int64),)), rates, 0) == 0.0

    def test_short_table(self):
        rates = rate_table(3, 2, 1)
        census = CycleCensus(2, (np.zeros(4, dtype=np.int64), np.zeros(16, dtype=np.int64)))
        with pytest.raises(DomainError):
            u_statistic(census, rates, 2)


class TestIS:
    def test_examples(self):
        r = i_s_enumerate(3, 2, (1, 1))
        assert r.count == 12 and r.closed_form_l == 12 and r.closed_form_printed == 72
        assert r.matches_l and not r.matches_printed
        assert i_s_enumerate(3, 2, (1, -1)).count == 24

    def test_joint_brute_force(self):
        # Enumerate (j, g) jointly rather than factorized, for one small case.
        s = (1, -1, 1, 1)
        k, d, l = 3, 2, 2
        total = 0
        for js in itertools.product(range(k), repeat=2 * l):
            if js[0] == js[-1] or js[1] == js[2]:
                continue
            for gs in itertools.product(range(d), repeat=2 * l):
                if any(s[2 * h] * s[2 * h + 1] == 1 and gs[2 * h] == gs[2 * h + 1]
                       for h in range(l)):
                    continue
                total += 1
        assert i_s_enumerate(k, d, s).count == total

    @pytest.mark.parametrize("k,d", [(2, 1), (3, 2), (4, 3), (3, 3)])
    def test_rate_identity(self, k, d):
        for l in (1, 2):
            for text in pattern_strings(l):
                s = pattern_signs(text)
                assert i_s_rate(k, d, s) == pytest.approx(lambda_pattern(s, k, d), rel=1e-12, abs=0)

    def test_caps(self):
        with pytest.raises(ResourceError):
            i_s_enumerate(3, 2, (1,) * 8)
        with pytest.raises(ResourceError):
            i_s_enumerate(65, 1, (1, 1))


@pytest.mark.slow
def test_census_means_small_sample():
    # Quick smoke version of the Poisson check with a loose band.
    params = ModelParams(300, 2, 3)
    rng = np.random.default_rng(12)
    rows = np.array([np.concatenate(cycle_census(sample_formula(params, rng), 1).counts)
                     for _ in range(400)])
    lam = np.array([lambda_pattern(pattern_signs(s), 3, 2) for s in pattern_strings(1)])
    se = rows.std(axis=0, ddof=1) / math.sqrt(rows.shape[0])
    assert np.all(np.abs(rows.mean(axis=0) - lam) <= 5 * se)


def test_planted_census_runs():
    f, _ = sample_planted(ModelParams(60, 2, 3), np.random.default_rng(3))
    assert cycle_census(f, 2) == cycle_census_oracle(f, 2)
