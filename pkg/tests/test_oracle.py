"""Exactness of the independent heavy-tailed reference model."""

import math

import numpy as np
import pytest

from superdiff import oracle as orc


@pytest.fixture(scope="module")
def draws():
    cfg = orc.ParetoSymConfig(scale=1.0, seed=5)
    return orc.sample_pareto_sym(cfg, 10 ** 7)


class TestSampling:
    def test_support_edge(self, draws):
        assert np.abs(draws).min() >= 1.0

    def test_median_of_magnitude(self, draws):
        assert np.median(np.abs(draws)) == pytest.approx(math.sqrt(2.0), rel=2e-3)

    def test_survival_exact_scaling(self, draws):
        n = len(draws)
        for t in (4.0, 8.0, 16.0, 32.0, 64.0):
            emp = np.mean(np.abs(draws) > t)
            tol = 3.5 / math.sqrt(n / t ** 2)   # 3.5 binomial sigmas
            assert t ** 2 * emp == pytest.approx(1.0, rel=tol)

    def test_sign_symmetry(self, draws):
        assert np.mean(draws > 0) == pytest.approx(0.5, abs=0.001)
        for k in (1, 3, 5):
            m = np.mean(np.clip(draws, -100, 100) ** k)
            s = np.std(np.clip(draws, -100, 100) ** k) / math.sqrt(len(draws))
            if k > 0 and k % 2 == 1:
                assert abs(m) <= 3.0 * s + 1e-12

    def test_scale_covariance_exact(self):
        c1 = orc.ParetoSymConfig(scale=1.0, seed=42)
        c3 = orc.ParetoSymConfig(scale=3.0, seed=42)
        a = orc.sample_pareto_sym(c1, 1000)
        b = orc.sample_pareto_sym(c3, 1000)
        assert np.array_equal(b, 3.0 * a)

    def test_counter_addressing(self):
        cfg = orc.ParetoSymConfig(scale=1.0, seed=9)
        whole = orc.sample_pareto_sym(cfg, 3 * orc.BLOCK, start=0)
        part = orc.sample_pareto_sym(cfg, 1000, start=orc.BLOCK - 500)
        assert np.array_equal(part, whole[orc.BLOCK - 500: orc.BLOCK + 500])

    def test_two_dim_components_independent(self):
        cfg = orc.ParetoSymConfig(scale=1.0, seed=3, d=2)
        x = orc.sample_pareto_sym(cfg, 10 ** 5)
        assert x.shape == (10 ** 5, 2)
        xc = np.clip(x, -50, 50)
        r = np.corrcoef(xc[:, 0], xc[:, 1])[0, 1]
        assert abs(r) < 0.01


class TestTruncatedMoments:
    def test_closed_forms(self):
        cfg = orc.ParetoSymConfig(scale=1.0, seed=0)
        first, second, fourth = orc.oracle_truncated_moments(cfg, math.e)
        assert first == 0.0
        assert second == pytest.approx(2.0, rel=1e-14)
        first, second, fourth = orc.oracle_truncated_moments(cfg, 3.0)
        assert fourth == pytest.approx(8.0, rel=1e-14)

    def test_scaled_forms(self):
        cfg = orc.ParetoSymConfig(scale=2.0, seed=0)
        _, second, fourth = orc.oracle_truncated_moments(cfg, 2.0 * math.e)
        assert second == pytest.approx(8.0, rel=1e-14)          # 2 s^2 ln(R/s)
        assert fourth == pytest.approx(16.0 * (math.e ** 2 - 1), rel=1e-14)

    def test_below_support_rejected(self):
        cfg = orc.ParetoSymConfig(scale=2.0, seed=0)
        with pytest.raises(ValueError):
            orc.oracle_truncated_moments(cfg, 1.0)

    def test_empirical_match(self, draws):
        w = np.where(np.abs(draws) <= 10.0, draws, 0.0)
        assert np.mean(w ** 2) == pytest.approx(2.0 * math.log(10.0), rel=0.01)
        assert np.mean(w ** 4) == pytest.approx(99.0, rel=0.05)


class TestGaussianControl:
    def test_standard_normal_law(self):
        cfg = orc.ParetoSymConfig(scale=1.0, seed=8)
        z = orc.sample_gaussian_control(cfg, 10 ** 6)
        assert np.mean(z) == pytest.approx(0.0, abs=0.005)
        assert np.std(z) == pytest.approx(1.0, abs=0.005)

    def test_coupled_to_heavy_twin(self):
        # same seed, same index: the control draw is a monotone transform of
        # the heavy draw's magnitude uniform
        cfg = orc.ParetoSymConfig(scale=1.0, seed=8)
        y = orc.sample_pareto_sym(cfg, 1000)
        z = orc.sample_gaussian_control(cfg, 1000)
        # |y| = 1/sqrt(1-u), z = ndtri(u): u recovered from either agrees
        u_from_y = 1.0 - 1.0 / np.abs(y) ** 2
        from scipy.special import ndtr
        assert np.allclose(ndtr(z), u_from_y, atol=1e-9)


def test_tail_constant_fit_transform():
    from superdiff import corridors as cor
    c1 = orc.ParetoSymConfig(scale=1.0, seed=17)
    c2 = orc.ParetoSymConfig(scale=2.0, seed=17)
    f1 = cor.tail_fit(orc.sample_pareto_sym(c1, 10 ** 6)).C_hat
    f2 = cor.tail_fit(orc.sample_pareto_sym(c2, 10 ** 6)).C_hat
    assert f2 == pytest.approx(4.0 * f1, rel=0.02)
