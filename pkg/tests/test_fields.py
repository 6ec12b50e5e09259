import math

import numpy as np
import pytest
from scipy import integrate
from scipy import stats

from assoclab.fields import (
    CovarianceSpec,
    ExclusionSpec,
    random_integral_field,
    sample_dirichlet_sequence,
    sample_gaussian_field,
    sample_multinomial,
    sample_permutation,
    simulate_exclusion,
)
from assoclab.geometry import PointConfiguration, Window
from assoclab.measures import sample_poisson
from conftest import exact_orthant_minus_quarter


def draw_many(sampler, n, seed=0):
    rng = np.random.default_rng(seed)
    return np.vstack([sampler(rng).values for _ in range(n)])


class TestGaussianField:
    def test_identity_covariance_iid(self):
        spec = CovarianceSpec([0.0, 0.0], np.eye(2))
        x = draw_many(lambda rng: sample_gaussian_field(spec, rng), 40_000, seed=1)
        ind = (x > 0).astype(float)
        cov = np.cov(ind[:, 0], ind[:, 1])[0, 1]
        se = 1.0 / math.sqrt(len(x))
        assert abs(cov) < 4 * se

    def test_negative_correlation_orthant_value(self):
        # closed-form orthant covariance, cross-checked by 2-d quadrature
        rho = -0.5
        closed_form = exact_orthant_minus_quarter(rho)
        assert closed_form == pytest.approx(-1.0 / 12.0)

        def density(y, x):
            det = 1 - rho**2
            return math.exp(-(x * x - 2 * rho * x * y + y * y) / (2 * det)) / (
                2 * math.pi * math.sqrt(det)
            )

        orthant, _ = integrate.dblquad(density, 0, 8, 0, 8)
        assert orthant - 0.25 == pytest.approx(closed_form, abs=1e-6)

        spec = CovarianceSpec([0.0, 0.0], [[1.0, rho], [rho, 1.0]])
        x = draw_many(lambda rng: sample_gaussian_field(spec, rng), 60_000, seed=2)
        ind = (x > 0).astype(float)
        est = np.cov(ind[:, 0], ind[:, 1])[0, 1]
        se = np.std((ind[:, 0] - ind[:, 0].mean()) * (ind[:, 1] - ind[:, 1].mean())) / math.sqrt(len(x))
        assert abs(est - closed_form) < 4 * se

    def test_zero_covariance_constant(self):
        spec = CovarianceSpec([2.0, -1.0], np.zeros((2, 2)))
        rng = np.random.default_rng(3)
        s = sample_gaussian_field(spec, rng)
        assert np.allclose(s.values, [2.0, -1.0])

    def test_empirical_covariance_matrix(self):
        cov = np.array([[2.0, -0.6, 0.0], [-0.6, 1.0, 0.3], [0.0, 0.3, 0.5]])
        spec = CovarianceSpec(np.zeros(3), cov)
        x = draw_many(lambda rng: sample_gaussian_field(spec, rng), 100_000, seed=4)
        emp = np.cov(x.T)
        # per-entry binomial-free bound: se of a covariance entry
        for i in range(3):
            for j in range(3):
                prod = (x[:, i] - x[:, i].mean()) * (x[:, j] - x[:, j].mean())
                se = prod.std() / math.sqrt(len(x))
                assert abs(emp[i, j] - cov[i, j]) < 5 * se

    def test_rejects_non_psd(self):
        with pytest.raises(ValueError, match="PSD"):
            CovarianceSpec([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            CovarianceSpec([0.0, 0.0], [[1.0, 0.1], [0.0, 1.0]])

    def test_semidefinite_accepted(self):
        spec = CovarianceSpec([0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]])
        rng = np.random.default_rng(5)
        s = sample_gaussian_field(spec, rng)
        assert s.values[0] == pytest.approx(s.values[1], abs=1e-9)


class TestDirichletSequence:
    def test_single_positive_alpha(self):
        rng = np.random.default_rng(6)
        s = sample_dirichlet_sequence([3.0, 0.0, 0.0], 3, rng)
        assert np.allclose(s.values, [1.0, 0.0, 0.0])

    def test_all_zero_prefix_rejected(self):
        rng = np.random.default_rng(7)
        with pytest.raises(ValueError, match="all-zero"):
            sample_dirichlet_sequence([0.0, 0.0, 1.0], 2, rng)

    def test_uniform_pair_covariance(self):
        # Dirichlet(1, 1): Cov = -a1*a2 / (a0^2 (a0+1)) = -1/12
        x = draw_many(lambda rng: sample_dirichlet_sequence([1.0, 1.0], 2, rng), 60_000, seed=8)
        est = np.cov(x[:, 0], x[:, 1])[0, 1]
        prod = (x[:, 0] - x[:, 0].mean()) * (x[:, 1] - x[:, 1].mean())
        se = prod.std() / math.sqrt(len(x))
        assert abs(est - (-1.0 / 12.0)) < 4 * se

    def test_marginal_means(self):
        x = draw_many(lambda rng: sample_dirichlet_sequence([2.0, 3.0, 5.0], 3, rng), 60_000, seed=9)
        means = x.mean(axis=0)
        for got, want in zip(means, [0.2, 0.3, 0.5]):
            assert abs(got - want) < 4 * x.std(axis=0).max() / math.sqrt(len(x))

    def test_sums_to_one_when_truncation_covers(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            s = sample_dirichlet_sequence([0.5, 1.5, 2.0], 3, rng)
            assert abs(s.values.sum() - 1.0) <= 1e-12

    def test_tail_mass_reduces_sum(self):
        rng = np.random.default_rng(11)
        sums = [sample_dirichlet_sequence([1.0] * 6, 3, rng).values.sum() for _ in range(200)]
        assert all(s < 1.0 for s in sums)
        assert np.mean(sums) == pytest.approx(0.5, abs=0.05)

    def test_small_shape_handled(self):
        rng = np.random.default_rng(12)
        s = sample_dirichlet_sequence([0.1, 0.2], 2, rng)
        assert s.values.sum() == pytest.approx(1.0, abs=1e-12)
        assert (s.values >= 0).all()


class TestMultinomialPermutation:
    def test_zero_trials(self):
        rng = np.random.default_rng(13)
        assert (sample_multinomial(0, [0.5, 0.5], rng).values == 0).all()

    def test_negative_trials(self):
        rng = np.random.default_rng(14)
        with pytest.raises(ValueError, match="negative"):
            sample_multinomial(-1, [1.0], rng)

    def test_single_trial_covariance(self):
        x = draw_many(lambda rng: sample_multinomial(1, [0.5, 0.5], rng), 40_000, seed=15)
        est = np.cov(x[:, 0], x[:, 1])[0, 1]
        prod = (x[:, 0] - x[:, 0].mean()) * (x[:, 1] - x[:, 1].mean())
        se = prod.std() / math.sqrt(len(x))
        assert abs(est - (-0.25)) < 4 * se

    def test_permutation_uniform_over_orderings(self):
        rng = np.random.default_rng(16)
        counts = {}
        n = 30_000
        for _ in range(n):
            perm = tuple(sample_permutation([1, 2, 3], rng).values)
            counts[perm] = counts.get(perm, 0) + 1
        assert len(counts) == 6
        _, p = stats.chisquare(list(counts.values()))
        assert p > 1e-4

    def test_permutation_preserves_values(self):
        rng = np.random.default_rng(17)
        s = sample_permutation([4.0, -2.0, 0.5], rng)
        assert sorted(s.values) == [-2.0, 0.5, 4.0]


class TestExclusion:
    def ring_spec(self, n, alpha, horizon):
        p = np.zeros((n, n))
        for i in range(n):
            p[i, (i + 1) % n] = 0.5
            p[i, (i - 1) % n] = 0.5
        return ExclusionSpec(list(range(n)), p, alpha, horizon)

    def test_rejects_asymmetric_rates(self):
        p = np.array([[0.0, 1.0], [0.5, 0.5]])
        with pytest.raises(ValueError, match="symmetric"):
            ExclusionSpec([0, 1], p, 0.5, 1.0)

    def test_rejects_disconnected(self):
        p = np.eye(4)
        with pytest.raises(ValueError, match="irreducible"):
            ExclusionSpec(list(range(4)), p, 0.5, 1.0)

    def test_zero_particles_stay_zero(self):
        spec = self.ring_spec(5, 0.0, 10.0)
        rng = np.random.default_rng(18)
        assert (simulate_exclusion(spec, rng).values == 0).all()

    def test_particle_count_conserved(self):
        # horizon 0 returns the initial state drawn from the same stream,
        # so equal totals across horizons certify conservation
        for seed in range(20):
            spec0 = self.ring_spec(6, 0.5, 0.0)
            specT = self.ring_spec(6, 0.5, 3.0)
            before = simulate_exclusion(spec0, np.random.default_rng(seed)).values.sum()
            after = simulate_exclusion(specT, np.random.default_rng(seed)).values.sum()
            assert before == after

    def test_product_bernoulli_invariant(self):
        # constant occupation probability is harmonic for symmetric kernels
        spec = self.ring_spec(4, 0.3, 2.0)
        occ = draw_many(lambda rng: simulate_exclusion(spec, rng), 20_000, seed=19)
        freq = occ.mean(axis=0)
        se = math.sqrt(0.3 * 0.7 / len(occ))
        assert np.abs(freq - 0.3).max() < 4 * se

    def test_two_site_single_particle_splits_evenly(self):
        p = np.array([[0.0, 1.0], [1.0, 0.0]])
        spec = ExclusionSpec([0, 1], p, np.array([1.0, 0.0]), 50.0)
        occ = draw_many(lambda rng: simulate_exclusion(spec, rng), 4_000, seed=20)
        assert occ.sum(axis=1).min() == 1.0
        freq = occ[:, 0].mean()
        assert abs(freq - 0.5) < 4 * math.sqrt(0.25 / len(occ))


def test_field_samplers_bit_for_bit_reproducible():
    spec = CovarianceSpec([0.0, 1.0], [[1.0, 0.2], [0.2, 1.0]])
    samplers = [
        lambda rng: sample_gaussian_field(spec, rng),
        lambda rng: sample_dirichlet_sequence([0.5, 1.0, 2.0], 3, rng),
        lambda rng: sample_multinomial(6, [0.2, 0.3, 0.5], rng),
        lambda rng: sample_permutation([1.0, 2.0, 3.0, 4.0], rng),
    ]
    for k, sampler in enumerate(samplers):
        a = sampler(np.random.default_rng([7, k])).values
        b = sampler(np.random.default_rng([7, k])).values
        assert np.array_equal(a, b)


class TestRandomIntegralField:
    def test_zero_weights(self):
        w = Window.unit(1)
        rng = np.random.default_rng(21)
        sampler = lambda r: sample_poisson(3.0, w, r)
        s = random_integral_field([lambda pts: np.zeros(len(pts))], sampler, rng)
        assert (s.values == 0).all()

    def test_rejects_negative_weights(self):
        w = Window.unit(1)
        rng = np.random.default_rng(22)
        sampler = lambda r: sample_poisson(3.0, w, r)
        with pytest.raises(ValueError, match="nonnegative"):
            random_integral_field([lambda pts: -np.ones(len(pts))], sampler, rng)

    def test_disjoint_boxes_independent_counts(self):
        w = Window.unit(1)
        fa = lambda pts: (pts[:, 0] < 0.5).astype(float)
        fb = lambda pts: (pts[:, 0] >= 0.5).astype(float)
        sampler = lambda r: sample_poisson(2.0, w, r)
        x = draw_many(
            lambda r: random_integral_field([fa, fb], sampler, r), 30_000, seed=23
        )
        est = np.cov(x[:, 0], x[:, 1])[0, 1]
        prod = (x[:, 0] - x[:, 0].mean()) * (x[:, 1] - x[:, 1].mean())
        se = prod.std() / math.sqrt(len(x))
        assert abs(est) < 4 * se

    def test_nested_boxes_poisson_covariance(self):
        # A = [0, 0.3), B = [0, 1): Cov(N(A), N(B)) = |A| at unit rate
        w = Window.unit(1)
        fa = lambda pts: (pts[:, 0] < 0.3).astype(float)
        fb = lambda pts: np.ones(len(pts))
        sampler = lambda r: sample_poisson(1.0, w, r)
        x = draw_many(
            lambda r: random_integral_field([fa, fb], sampler, r), 40_000, seed=24
        )
        est = np.cov(x[:, 0], x[:, 1])[0, 1]
        prod = (x[:, 0] - x[:, 0].mean()) * (x[:, 1] - x[:, 1].mean())
        se = prod.std() / math.sqrt(len(x))
        assert abs(est - 0.3) < 4 * se
