"""Tests for covariance families, gradients, the taper, and matrix assembly."""

import numpy as np
import pytest
import scipy.sparse as sp

from covest.covariance import (FAMILIES, CovarianceSpec, TaperSpec,
                               assemble_sigma, assemble_sigma_grad,
                               assemble_tapered_sigma, correlation, cov,
                               cov_grad, taper)
from covest.geometry import LocationSet, distance_matrix, pairs_within


def random_spec(rng, family=None, nugget=False):
    return CovarianceSpec(
        family or rng.choice(FAMILIES),
        sigma2=rng.uniform(0.2, 3.0),
        phi=rng.uniform(0.1, 1.5),
        nugget=rng.uniform(0.05, 0.8) if nugget else 0.0,
    )


class TestCov:
    def test_exponential_practical_range(self):
        spec = CovarianceSpec("exponential", 1.0, 0.4)
        np.testing.assert_allclose(cov(spec, 0.4), np.exp(-3.0), rtol=1e-12)

    def test_spherical_vanishes_at_range(self):
        spec = CovarianceSpec("spherical", 1.0, 0.7)
        assert cov(spec, 0.7) == 0.0

    def test_cauchy_practical_range(self):
        spec = CovarianceSpec("cauchy", 1.0, 0.4)
        np.testing.assert_allclose(cov(spec, 0.4), 0.05, rtol=1e-12)

    def test_wave_sinc_limit(self):
        spec = CovarianceSpec("wave", 2.5, 0.4)
        assert cov(spec, 0.0) == 2.5

    @pytest.mark.parametrize("family", FAMILIES)
    def test_practical_range_bound(self, family):
        spec = CovarianceSpec(family, 1.0, 0.63)
        rho = correlation(spec, spec.phi)
        if family == "spherical":
            assert rho == 0.0
        else:
            assert abs(rho) <= 0.05 + 1e-12

    def test_natural_convention_is_unit_rate(self):
        spec = CovarianceSpec("exponential", 1.0, 0.4, range_convention="natural")
        np.testing.assert_allclose(cov(spec, 0.4), np.exp(-1.0), rtol=1e-12)

    def test_nugget_only_at_lag_zero(self):
        spec = CovarianceSpec("exponential", 1.0, 0.4, nugget=0.5)
        assert cov(spec, 0.0) == 1.5
        np.testing.assert_allclose(cov(spec, 1e-12), np.exp(-3e-12 / 0.4), rtol=1e-12)

    def test_invalid_parameters_rejected(self):
        with pytest.raises(ValueError):
            CovarianceSpec("exponential", -1.0, 0.4)
        with pytest.raises(ValueError):
            CovarianceSpec("exponential", 1.0, 0.0)
        with pytest.raises(ValueError):
            CovarianceSpec("exponential", 1.0, 0.4, nugget=-0.1)

    def test_negative_distance_rejected(self):
        with pytest.raises(ValueError):
            cov(CovarianceSpec("exponential", 1.0, 0.4), -0.1)


class TestCovGrad:
    def test_sigma2_partial_is_correlation(self):
        rng = np.random.default_rng(0)
        for family in FAMILIES:
            spec = random_spec(rng, family)
            h = rng.uniform(0, 2, 20)
            np.testing.assert_allclose(
                cov_grad(spec, h, ("sigma2",))[..., 0], correlation(spec, h), rtol=1e-14)

    def test_exponential_phi_partial_example(self):
        spec = CovarianceSpec("exponential", 1.0, 0.4)
        np.testing.assert_allclose(
            cov_grad(spec, 0.4, ("phi",))[0], 7.5 * np.exp(-3.0), rtol=1e-12)

    def test_nugget_partial_vanishes_off_origin(self):
        spec = CovarianceSpec("exponential", 1.0, 0.4, nugget=0.2)
        assert cov_grad(spec, 0.3, ("nugget",))[0] == 0.0
        assert cov_grad(spec, 0.0, ("nugget",))[0] == 1.0

    @pytest.mark.parametrize("family", FAMILIES)
    def test_matches_central_differences(self, family):
        rng = np.random.default_rng(1)
        for _ in range(25):
            spec = random_spec(rng, family, nugget=True)
            h = rng.uniform(0.01, 2.0, 15)
            if family == "spherical":
                # stay off the kink where central differences straddle the join
                h = h[np.abs(h - spec.phi) > 1e-3]
            grad = cov_grad(spec, h, ("sigma2", "phi", "nugget"))
            for k, name in enumerate(("sigma2", "phi", "nugget")):
                t0 = getattr(spec, name)
                step = max(abs(t0), 1e-3) * 1e-5
                up = cov(spec.replace(**{name: t0 + step}), h)
                dn = cov(spec.replace(**{name: t0 - step}), h)
                fd = (up - dn) / (2 * step)
                np.testing.assert_allclose(grad[..., k], fd, rtol=1e-6, atol=1e-9)

    def test_spherical_phi_partial_at_kink(self):
        # left and right phi-derivatives coincide at h = phi; the value is 0
        spec = CovarianceSpec("spherical", 1.0, 0.5)
        assert cov_grad(spec, 0.5, ("phi",))[0] == 0.0


class TestTaper:
    def test_unit_at_origin(self):
        assert taper(TaperSpec("wendland", 0.4), 0.0) == 1.0

    def test_compact_support(self):
        t = TaperSpec("wendland", 0.4)
        assert taper(t, 0.4) == 0.0
        assert taper(t, 1.7) == 0.0

    def test_hand_value(self):
        np.testing.assert_allclose(taper(TaperSpec("wendland", 0.4), 0.2), 0.1875, rtol=1e-15)

    def test_none_kind_is_one(self):
        assert taper(TaperSpec("none"), 3.0) == 1.0

    def test_invalid_range(self):
        with pytest.raises(ValueError):
            TaperSpec("wendland", -1.0)
        with pytest.raises(ValueError):
            TaperSpec("none", 0.4)


class TestAssembleSigma:
    def test_single_point(self):
        locs = LocationSet(np.array([[0.0, 0.0]]))
        spec = CovarianceSpec("exponential", 1.2, 0.4, nugget=0.3)
        np.testing.assert_allclose(assemble_sigma(spec, locs), [[1.5]])

    def test_two_point_offdiagonal(self):
        locs = LocationSet(np.array([[0.0, 0.0], [0.4, 0.0]]))
        spec = CovarianceSpec("exponential", 1.0, 0.4)
        s = assemble_sigma(spec, locs)
        np.testing.assert_allclose(s[0, 1], np.exp(-3.0), rtol=1e-12)
        np.testing.assert_allclose(s, s.T)

    def test_spherical_beyond_range_is_diagonal(self):
        locs = LocationSet(np.array([[0.0, 0.0], [5.0, 0.0], [10.0, 0.0]]))
        spec = CovarianceSpec("spherical", 2.0, 0.4)
        np.testing.assert_array_equal(assemble_sigma(spec, locs), 2.0 * np.eye(3))


class TestAssembleTaperedSigma:
    def test_below_min_distance_is_diagonal(self):
        locs = LocationSet(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]))
        spec = CovarianceSpec("exponential", 1.0, 0.4, nugget=0.1)
        t = TaperSpec("wendland", 0.5)
        m = assemble_tapered_sigma(spec, t, locs, pairs_within(locs, 0.5))
        assert m.nnz == 3
        np.testing.assert_allclose(m.toarray(), 1.1 * np.eye(3))

    def test_two_point_hand_value(self):
        locs = LocationSet(np.array([[0.0, 0.0], [0.2, 0.0]]))
        spec = CovarianceSpec("exponential", 1.0, 0.4)
        t = TaperSpec("wendland", 0.4)
        m = assemble_tapered_sigma(spec, t, locs, pairs_within(locs, 0.4))
        np.testing.assert_allclose(m.toarray()[0, 1], np.exp(-1.5) * 0.1875, rtol=1e-12)

    def test_none_taper_equals_dense(self):
        rng = np.random.default_rng(2)
        locs = LocationSet(rng.random((25, 2)))
        spec = CovarianceSpec("cauchy", 1.4, 0.5, nugget=0.2)
        m = assemble_tapered_sigma(spec, TaperSpec("none"), locs, pairs_within(locs, None))
        np.testing.assert_allclose(m.toarray(), assemble_sigma(spec, locs), atol=1e-15)

    def test_cutoff_mismatch_rejected(self):
        locs = LocationSet(np.random.default_rng(3).random((10, 2)))
        spec = CovarianceSpec("exponential", 1.0, 0.4)
        with pytest.raises(ValueError, match="does not match"):
            assemble_tapered_sigma(spec, TaperSpec("wendland", 0.4), locs,
                                   pairs_within(locs, 0.3))

    def test_schur_product_identity(self):
        # every stored nonzero equals the dense covariance times the taper
        rng = np.random.default_rng(4)
        locs = LocationSet(rng.random((40, 2)))
        spec = random_spec(rng, nugget=True)
        t = TaperSpec("wendland", 0.35)
        m = assemble_tapered_sigma(spec, t, locs, pairs_within(locs, 0.35)).tocoo()
        dm = distance_matrix(locs)
        for i, j, v in zip(m.row, m.col, m.data):
            expect = cov(spec, dm[i, j]) * taper(t, dm[i, j])
            assert abs(v - expect) <= 1e-15 * max(1.0, abs(expect))

    @pytest.mark.parametrize("seed", range(4))
    def test_tapered_matrix_stays_psd(self, seed):
        rng = np.random.default_rng(seed)
        locs = LocationSet(rng.random((60, 2)))
        spec = random_spec(rng, family="exponential")
        d = rng.uniform(0.1, 0.6)
        m = assemble_tapered_sigma(spec, TaperSpec("wendland", d), locs, pairs_within(locs, d))
        eigs = np.linalg.eigvalsh(m.toarray())
        assert eigs.min() >= -1e-10

    def test_sparse_storage_contract(self):
        locs = LocationSet(np.random.default_rng(6).random((30, 2)))
        spec = CovarianceSpec("exponential", 1.0, 0.4)
        m = assemble_tapered_sigma(spec, TaperSpec("wendland", 0.3), locs,
                                   pairs_within(locs, 0.3))
        assert sp.issparse(m) and m.has_sorted_indices
        assert np.array_equal(m.toarray(), m.toarray().T)


class TestAssembleSigmaGrad:
    def test_matches_elementwise_cov_grad(self):
        rng = np.random.default_rng(7)
        locs = LocationSet(rng.random((15, 2)))
        spec = random_spec(rng, nugget=True)
        dm = distance_matrix(locs)
        grads = assemble_sigma_grad(spec, locs, ("sigma2", "phi", "nugget"))
        stacked = cov_grad(spec, dm, ("sigma2", "phi", "nugget"))
        for k in range(3):
            np.testing.assert_array_equal(grads[k], stacked[..., k])
