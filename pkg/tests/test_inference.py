"""Tests for fitting, information matrices, and relative efficiency."""

import numpy as np
import pytest

from covest.covariance import CovarianceSpec, TaperSpec
from covest.errors import NotPositiveDefiniteError
from covest.geometry import LocationSet, pairs_within, perturbed_grid_design
from covest.inference import (are, are_sweep, fisher_info, fit, godambe_cl,
                              godambe_taper, sparsity_to_distance)
from covest.objectives import ObjectiveSpec, loglik
from covest.simulate import simulate_batch, simulate_grf

FREE = ("sigma2", "phi")


class TestFit:
    def test_iid_variance_mle_closed_form(self):
        # two effectively independent sites: sigma2_hat = (z1^2 + z2^2)/2
        locs = LocationSet(np.array([[0.0, 0.0], [100.0, 0.0]]))
        z = np.array([1.3, -0.4])
        start = CovarianceSpec("spherical", 1.0, 0.01)
        res = fit(ObjectiveSpec("ml"), start, locs, z, free=("sigma2",),
                  compute_info=False)
        assert res.converged
        np.testing.assert_allclose(res.params()["sigma2"], np.mean(z ** 2), rtol=1e-5)

    def test_start_outside_bounds_rejected(self):
        locs = LocationSet(np.array([[0.0, 0.0], [1.0, 0.0]]))
        start = CovarianceSpec("exponential", 1.0, 0.4)
        with pytest.raises(ValueError, match="outside bounds"):
            fit(ObjectiveSpec("ml"), start, locs, np.array([0.1, 0.2]),
                bounds={"sigma2": (2.0, 3.0)}, compute_info=False)

    def test_recovers_truth_on_simulated_data(self):
        # the mean estimate over replicates should bracket the truth; a
        # single strongly-correlated realization cannot pin sigma2 tightly
        locs = perturbed_grid_design(0, seed=3, n_points=200)
        truth = CovarianceSpec("exponential", 1.0, 0.4)
        reps = 30
        start = CovarianceSpec("exponential", 0.7, 0.25)
        ests = []
        for real in simulate_batch(truth, locs, reps, seed=17):
            res = fit(ObjectiveSpec("ml"), start, locs, real.values, free=FREE,
                      phi_starts=[0.25], compute_info=False)
            assert res.converged
            ests.append(res.theta)
        ests = np.asarray(ests)
        mc_se = ests.std(axis=0, ddof=1) / np.sqrt(reps)
        assert np.all(np.abs(ests.mean(axis=0) - [1.0, 0.4]) <= 3.5 * mc_se)

    def test_deterministic(self):
        locs = perturbed_grid_design(0, seed=3, n_points=60)
        truth = CovarianceSpec("exponential", 1.0, 0.4)
        z = simulate_grf(truth, locs, 17).values
        start = CovarianceSpec("exponential", 0.5, 0.2)
        a = fit(ObjectiveSpec("pl_marginal", cutoff=0.4), start, locs, z, compute_info=False)
        b = fit(ObjectiveSpec("pl_marginal", cutoff=0.4), start, locs, z, compute_info=False)
        assert np.array_equal(a.theta, b.theta)

    def test_taper1_reports_no_standard_errors(self):
        locs = perturbed_grid_design(0, seed=3, n_points=50)
        z = simulate_grf(CovarianceSpec("exponential", 1.0, 0.4), locs, 5).values
        res = fit(ObjectiveSpec("taper1", taper=TaperSpec("wendland", 0.4)),
                  CovarianceSpec("exponential", 0.8, 0.3), locs, z,
                  phi_starts=[0.3])
        assert res.std_errors is None and res.info is None

    def test_single_phi_start_honored(self):
        locs = perturbed_grid_design(0, seed=3, n_points=40)
        z = simulate_grf(CovarianceSpec("exponential", 1.0, 0.4), locs, 5).values
        res = fit(ObjectiveSpec("ml"), CovarianceSpec("exponential", 0.8, 0.3),
                  locs, z, phi_starts=[0.3], compute_info=False)
        assert res.n_starts == 1


class TestFisherInfo:
    def test_single_site_sigma2(self):
        locs = LocationSet(np.array([[0.0, 0.0]]))
        for sigma2 in (0.5, 1.0, 2.5):
            spec = CovarianceSpec("exponential", sigma2, 0.4)
            got = fisher_info(spec, locs, free=("sigma2",))
            np.testing.assert_allclose(got, [[1.0 / (2.0 * sigma2 ** 2)]], rtol=1e-12)

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(0)
        pts = rng.random((20, 2))
        spec = CovarianceSpec("cauchy", 1.2, 0.5, nugget=0.1)
        a = fisher_info(spec, LocationSet(pts), free=("sigma2", "phi", "nugget"))
        perm = rng.permutation(20)
        b = fisher_info(spec, LocationSet(pts[perm]), free=("sigma2", "phi", "nugget"))
        np.testing.assert_allclose(a, b, rtol=1e-10)

    def test_matches_monte_carlo_score_covariance(self):
        locs = perturbed_grid_design(0, seed=1, n_points=30)
        spec = CovarianceSpec("exponential", 1.0, 0.4)
        fisher = fisher_info(spec, locs, free=FREE)
        reps = 3000
        scores = np.array([loglik(spec, locs, r.values, free=FREE).grad
                           for r in simulate_batch(spec, locs, reps, seed=55)])
        emp = np.cov(scores.T)
        se = np.sqrt((np.outer(np.diagonal(fisher), np.diagonal(fisher)) + fisher ** 2) / reps)
        assert np.all(np.abs(emp - fisher) <= 4.0 * se)

    def test_symmetric(self):
        locs = perturbed_grid_design(0, seed=2, n_points=40)
        spec = CovarianceSpec("wave", 1.0, 0.4)
        fisher = fisher_info(spec, locs, free=FREE)
        np.testing.assert_allclose(fisher, fisher.T, atol=1e-10)


class TestGodambeTaper:
    def test_unit_taper_override_equals_fisher(self):
        locs = perturbed_grid_design(0, seed=4, n_points=40)
        spec = CovarianceSpec("exponential", 1.0, 0.4, nugget=0.15)
        free = ("sigma2", "phi", "nugget")
        fisher = fisher_info(spec, locs, free=free)
        info = godambe_taper(spec, TaperSpec("none"), locs, free=free)
        np.testing.assert_allclose(info.H, fisher, rtol=1e-10)
        np.testing.assert_allclose(info.J, fisher, rtol=1e-10)
        np.testing.assert_allclose(info.G, fisher, rtol=1e-10)

    def test_h_symmetric(self):
        locs = perturbed_grid_design(0, seed=5, n_points=50)
        spec = CovarianceSpec("cauchy", 1.0, 0.4)
        info = godambe_taper(spec, TaperSpec("wendland", 0.3), locs,
                             pairs_within(locs, 0.3), free=FREE)
        np.testing.assert_allclose(info.H, info.H.T, atol=1e-10)
        np.testing.assert_allclose(info.J, info.J.T, atol=1e-10)

    def test_taper_pairs_contract_checked_elsewhere(self):
        # pairs are optional for the dense fallback; passing them must not change values
        locs = perturbed_grid_design(0, seed=5, n_points=30)
        spec = CovarianceSpec("exponential", 1.0, 0.4)
        t = TaperSpec("wendland", 0.3)
        a = godambe_taper(spec, t, locs, free=FREE)
        b = godambe_taper(spec, t, locs, pairs_within(locs, 0.3), free=FREE)
        np.testing.assert_allclose(a.G, b.G, rtol=1e-12)


class TestGodambeCl:
    def test_single_isolated_pair_information_identity(self):
        # one pair, sigma2 known: the score is exactly one unbiased term,
        # so J = H and the sandwich collapses to H
        locs = LocationSet(np.array([[0.0, 0.0], [0.25, 0.0]]))
        spec = CovarianceSpec("exponential", 1.0, 0.4)
        prs = pairs_within(locs, None)
        info = godambe_cl("marginal", spec, locs, prs, free=("phi",))
        np.testing.assert_allclose(info.J, info.H, rtol=1e-10)
        np.testing.assert_allclose(info.G, info.H, rtol=1e-10)
        # and it matches the bivariate Fisher information in phi
        fisher = fisher_info(spec, locs, free=("phi",))
        np.testing.assert_allclose(info.H, fisher, rtol=1e-10)

    def test_conditional_matches_marginal_in_phi_block(self):
        locs = perturbed_grid_design(0, seed=6, n_points=60)
        spec = CovarianceSpec("exponential", 1.0, 0.4)
        prs = pairs_within(locs, 0.4)
        m = godambe_cl("marginal", spec, locs, prs, free=("phi",))
        c = godambe_cl("conditional", spec, locs, prs, free=("phi",))
        np.testing.assert_allclose(c.G, m.G, rtol=1e-10)

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(7)
        pts = rng.random((30, 2))
        spec = CovarianceSpec("exponential", 1.0, 0.4)
        a = godambe_cl("marginal", spec, LocationSet(pts), pairs_within(LocationSet(pts), 0.4))
        perm = rng.permutation(30)
        locs_p = LocationSet(pts[perm])
        b = godambe_cl("marginal", spec, locs_p, pairs_within(locs_p, 0.4))
        np.testing.assert_allclose(a.G, b.G, rtol=1e-9)

    @pytest.mark.parametrize("kind", ["marginal", "conditional", "difference"])
    def test_sandwich_dominated_by_fisher(self, kind):
        locs = perturbed_grid_design(0, seed=8, n_points=60)
        spec = CovarianceSpec("exponential", 1.0, 0.4)
        info = godambe_cl(kind, spec, locs, pairs_within(locs, 0.4), free=FREE)
        fisher = fisher_info(spec, locs, free=FREE)
        # G^{-1} - I^{-1} is PSD, i.e. the CL variance dominates ML variance
        diff = np.linalg.inv(info.G) - np.linalg.inv(fisher)
        assert np.linalg.eigvalsh(diff).min() >= -1e-8


class TestAre:
    def test_equal_matrices(self):
        assert are(np.eye(3), np.eye(3)) == 1.0

    def test_scaled_identity(self):
        np.testing.assert_allclose(are(0.5 * np.eye(2), np.eye(2), p=2), 0.5, rtol=1e-12)

    def test_reparametrization_invariance(self):
        rng = np.random.default_rng(9)
        g = np.array([[2.0, 0.3], [0.3, 1.0]])
        fisher = np.array([[3.0, 0.1], [0.1, 2.0]])
        base = are(g, fisher)
        for _ in range(10):
            a = rng.standard_normal((2, 2))
            while abs(np.linalg.det(a)) < 0.1:
                a = rng.standard_normal((2, 2))
            np.testing.assert_allclose(are(a.T @ g @ a, a.T @ fisher @ a), base, rtol=1e-9)

    def test_negative_determinant_rejected(self):
        with pytest.raises(NotPositiveDefiniteError):
            are(np.diag([1.0, -1.0]), np.eye(2))


class TestAreSweep:
    def test_small_sweep_properties(self):
        locs = perturbed_grid_design(0, seed=10, n_points=120)
        spec = CovarianceSpec("exponential", 1.0, 0.4)
        percents = [0.02, 0.05, 0.1, 0.2]
        reports = are_sweep(["taper", "marginal"], spec, locs, percents, free=FREE)
        assert len(reports) == len(percents) * 2
        taper_curve = [r.are for r in reports if r.method == "taper"]
        assert all(np.isfinite(v) for v in taper_curve)
        assert all(b >= a - 1e-8 for a, b in zip(taper_curve, taper_curve[1:]))
        assert all(r.are <= 1.0 + 1e-8 for r in reports if np.isfinite(r.are))

    def test_sparsity_inversion_counts(self):
        locs = perturbed_grid_design(0, seed=11, n_points=100)
        targets = sparsity_to_distance(locs, [0.05, 0.1])
        n = locs.n
        for pct, pct_actual, d in targets:
            count = pairs_within(locs, d).size
            assert abs((n + 2 * count) / n ** 2 - pct_actual) < 1e-12
            assert pct_actual >= pct - 2.0 / n  # at least the target, up to ties
