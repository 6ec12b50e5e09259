import math

import numpy as np
import pytest

from assoclab.oracles import (
    JointPmf,
    bk_check,
    covariance_identity_check,
    disjoint_occurrence_probability,
    exact_association_check,
    random_monotone_values,
    reweighted_dominance_check,
)
from assoclab.order import FinitePoset, is_monotone, product_poset
from conftest import random_poset


def bernoulli_square(p00, p01, p10, p11):
    poset = product_poset([FinitePoset.chain([0, 1])] * 2)
    return JointPmf(poset, [p00, p01, p10, p11])


def multinomial_two_cells():
    # two trials over two cells: X2 = 2 - X1
    poset = product_poset([FinitePoset.chain([0, 1, 2])] * 2)
    probs = np.zeros(9)
    probs[0 * 3 + 2] = 0.25
    probs[1 * 3 + 1] = 0.5
    probs[2 * 3 + 0] = 0.25
    return JointPmf(poset, probs)


def random_joint_pmf(rng, n_coords=3, factor_size=2, concentrate=None):
    poset = product_poset([FinitePoset.chain(range(factor_size))] * n_coords)
    raw = rng.exponential(1.0, size=poset.n)
    if concentrate == "positive":
        # push mass onto the diagonal to force positive dependence
        for i in range(factor_size):
            raw[int(i * (poset.n - 1) / (factor_size - 1))] += poset.n
    probs = raw / raw.sum()
    return JointPmf(poset, probs)


class TestExactCheck:
    def test_independent_bernoulli_both_ways(self):
        pmf = bernoulli_square(0.25, 0.25, 0.25, 0.25)
        assert exact_association_check(pmf, [0], "NA").holds
        assert exact_association_check(pmf, [0, 1], "PA").holds

    def test_multinomial_na_holds(self):
        assert exact_association_check(multinomial_two_cells(), [0], "NA").holds

    def test_perfectly_correlated_witness(self):
        pmf = bernoulli_square(0.5, 0.0, 0.0, 0.5)
        result = exact_association_check(pmf, [0], "NA")
        assert not result.holds
        assert result.witness.upper_j == frozenset({(1,)})
        assert result.witness.upper_k == frozenset({(1,)})
        assert result.witness.covariance == pytest.approx(0.25)

    def test_anticorrelated_fails_pa(self):
        pmf = bernoulli_square(0.0, 0.5, 0.5, 0.0)
        result = exact_association_check(pmf, [0, 1], "PA")
        assert not result.holds
        assert result.witness.covariance == pytest.approx(-0.25)

    def test_split_validation(self):
        pmf = bernoulli_square(0.25, 0.25, 0.25, 0.25)
        with pytest.raises(ValueError, match="proper"):
            exact_association_check(pmf, [0, 1], "NA")
        with pytest.raises(ValueError, match="hypothesis"):
            exact_association_check(pmf, [0], "XX")

    def test_state_cap(self):
        poset = product_poset([FinitePoset.chain(range(9))] * 4)
        with pytest.raises(ValueError, match="capped"):
            JointPmf(poset, np.full(9**4, 9.0**-4))


class TestOracleSoundness:
    def exact_pair_cov(self, pmf, split_j, f_vals, g_vals):
        j = sorted(split_j)
        k = [a for a in range(pmf.n_coords) if a not in j]
        table = pmf.split_table(j, k)
        joint = f_vals @ table @ g_vals
        return joint - (f_vals @ table.sum(axis=1)) * (g_vals @ table.sum(axis=0))

    def test_na_implies_all_monotone_pairs_nonpositive(self):
        rng = np.random.default_rng(101)
        checked_pairs = 0
        while checked_pairs < 100:
            pmf = random_joint_pmf(rng)
            if not exact_association_check(pmf, [0], "NA").holds:
                continue
            pj = pmf.marginal_poset([0])
            pk = pmf.marginal_poset([1, 2])
            for _ in range(10):
                f = random_monotone_values(pj, rng)
                g = random_monotone_values(pk, rng)
                assert self.exact_pair_cov(pmf, [0], f, g) <= 1e-9
                checked_pairs += 1

    def test_na_implies_reweighted_dominance(self):
        rng = np.random.default_rng(102)
        checked = 0
        while checked < 100:
            pmf = random_joint_pmf(rng)
            if not exact_association_check(pmf, [0], "NA").holds:
                continue
            pk = pmf.marginal_poset([1, 2])
            for _ in range(5):
                g = random_monotone_values(pk, rng)
                assert reweighted_dominance_check(pmf, [0], g)
                checked += 1


class TestReweightedDominance:
    def test_independent_trivial(self):
        pmf = bernoulli_square(0.25, 0.25, 0.25, 0.25)
        assert reweighted_dominance_check(pmf, [0], [0.0, 1.0])

    def test_multinomial_shift_down(self):
        pmf = multinomial_two_cells()
        # conditioning on the other cell being occupied shifts mass down
        assert reweighted_dominance_check(pmf, [0], [0.0, 1.0, 1.0])

    def test_positively_correlated_fails(self):
        pmf = bernoulli_square(0.5, 0.0, 0.0, 0.5)
        assert not reweighted_dominance_check(pmf, [0], [0.0, 1.0])

    def test_rejects_non_monotone_weight(self):
        pmf = bernoulli_square(0.25, 0.25, 0.25, 0.25)
        with pytest.raises(ValueError, match="monotone"):
            reweighted_dominance_check(pmf, [0], [1.0, 0.0])

    def test_rejects_zero_normalizer(self):
        pmf = bernoulli_square(0.5, 0.0, 0.5, 0.0)
        with pytest.raises(ValueError, match="zero expectation"):
            reweighted_dominance_check(pmf, [0], [0.0, 1.0])


class TestBkCheck:
    def product_measure(self, ps):
        n = len(ps)
        out = np.empty(1 << n)
        for s in range(1 << n):
            pr = 1.0
            for i, p in enumerate(ps):
                pr *= p if s >> i & 1 else 1.0 - p
            out[s] = pr
        return out

    def test_product_measures_hold(self):
        rng = np.random.default_rng(103)
        for _ in range(25):
            ps = rng.uniform(0.1, 0.9, size=4)
            assert bk_check(self.product_measure(ps)).holds

    def test_full_space_tight(self):
        pmf = self.product_measure([0.3, 0.6])
        full = list(range(4))
        b = [s for s in range(4) if s >> 1 & 1]
        box = disjoint_occurrence_probability(pmf, full, b)
        pb = sum(pmf[s] for s in b)
        assert box == pytest.approx(pb)

    def test_correlated_two_point_counterexample(self):
        pmf = np.zeros(4)
        pmf[0b00] = 0.5
        pmf[0b11] = 0.5
        result = bk_check(pmf)
        assert not result.holds
        assert result.witness.box_probability == pytest.approx(0.5)
        assert result.witness.product_bound == pytest.approx(0.25)
        # the canonical witness pair: A = {first coordinate on}, B = {second on}
        a = [s for s in range(4) if s & 1]
        b = [s for s in range(4) if s >> 1 & 1]
        assert disjoint_occurrence_probability(pmf, a, b) == pytest.approx(0.5)

    def test_cap(self):
        with pytest.raises(ValueError, match="capped"):
            bk_check(np.full(32, 1 / 32))


class TestCovarianceIdentity:
    def test_identical_uniform(self):
        rng = np.random.default_rng(104)
        x = rng.random(200_000)
        assert abs(np.var(x) - 1 / 12) < 4 * np.std((x - x.mean()) ** 2) / math.sqrt(len(x))
        assert covariance_identity_check(x, x, grid=200) < 3e-3

    def test_independent(self):
        rng = np.random.default_rng(105)
        x, y = rng.random(150_000), rng.random(150_000)
        assert covariance_identity_check(x, y, grid=200) < 3e-3

    def test_clipped_bivariate_normal(self):
        rng = np.random.default_rng(106)
        rho = -0.5
        z = rng.multivariate_normal([0, 0], [[1, rho], [rho, 1]], size=200_000)
        z = np.clip(z, -5.0, 5.0)
        assert abs(np.cov(z[:, 0], z[:, 1], ddof=0)[0, 1] - rho) < 0.01
        assert covariance_identity_check(z[:, 0], z[:, 1], grid=200) < 3e-3

    def test_grid_refinement_shrinks_discrepancy(self):
        rng = np.random.default_rng(107)
        x = rng.random(50_000)
        y = 0.5 * x + 0.5 * rng.random(50_000)
        coarse = covariance_identity_check(x, y, grid=3)
        fine = covariance_identity_check(x, y, grid=50)
        assert fine < coarse

    def test_constant_sample(self):
        x = np.ones(100)
        assert covariance_identity_check(x, x) == 0.0


def test_random_monotone_values_are_monotone():
    rng = np.random.default_rng(108)
    for _ in range(30):
        p = random_poset(rng, int(rng.integers(2, 9)))
        assert is_monotone(random_monotone_values(p, rng), p)
