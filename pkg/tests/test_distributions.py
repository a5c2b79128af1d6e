import math

import numpy as np
import pytest

from steinbounds.distributions import (Beta, DistributionError, Exponential,
                                       Gamma, Gaussian, GeometricCount,
                                       InvalidParameter, InverseGamma, Pareto,
                                       Uniform, centered, make, parse_dist,
                                       permutation_statistic, point_mass,
                                       random_sum, standardized_bernoulli,
                                       sum_of_independents, two_point)
from steinbounds.numerics import rng_stream


def test_closed_form_moments():
    assert Gaussian(2.0, 9.0).mean() == 2.0
    assert Gaussian(2.0, 9.0).var() == 9.0
    assert Beta(4.0, 8.0).mean() == pytest.approx(4.0 / 12.0)
    assert Beta(4.0, 8.0).var() == pytest.approx(32.0 / (144.0 * 13.0))
    assert Gamma(2.0, 3.0).mean() == pytest.approx(2.0 / 3.0)
    assert InverseGamma(5.0, 3.0).mean() == pytest.approx(3.0 / 4.0)
    assert Pareto(3.0, 1.0).mean() == pytest.approx(1.5)
    assert Exponential(2.0).var() == pytest.approx(0.25)
    assert Uniform(0.0, 2.0).var() == pytest.approx(4.0 / 12.0)


def test_cdf_quantile_roundtrip():
    for d in (Gaussian(0.0, 1.0), Gamma(2.0, 1.0), Uniform(-1.0, 3.0)):
        for p in (0.05, 0.4, 0.95):
            assert d.cdf(d.quantile(p)) == pytest.approx(p, abs=1e-10)


def test_expect_matches_moments():
    for d in (Gaussian(1.0, 4.0), Beta(4.0, 8.0), Exponential(1.0),
              two_point(1.0, 2.0), GeometricCount(0.5)):
        assert d.expect(lambda x: x) == pytest.approx(d.mean(), rel=1e-8)
        m = d.mean()
        assert d.expect(lambda x: (x - m) ** 2) == pytest.approx(
            d.var(), rel=1e-8)


def test_two_point():
    d = two_point(1.0, 2.0)
    vals, probs = d.atoms()
    assert sorted(vals) == [-1.0, 2.0]
    assert d.mean() == pytest.approx(0.0, abs=1e-15)
    assert d.var() == pytest.approx(2.0)
    assert probs.sum() == pytest.approx(1.0)


def test_invalid_parameters():
    with pytest.raises(InvalidParameter):
        Gaussian(0.0, -1.0)
    with pytest.raises(InvalidParameter):
        Beta(-1.0, 2.0)
    with pytest.raises(InvalidParameter):
        two_point(-1.0, 2.0)
    with pytest.raises(InvalidParameter):
        Uniform(2.0, 1.0)


def test_standardized_bernoulli_sum():
    parts = [standardized_bernoulli(0.3, 30)] * 30
    s = sum_of_independents(parts)
    assert s.mean() == pytest.approx(0.0, abs=1e-12)
    assert s.var() == pytest.approx(1.0, rel=1e-12)


def test_geometric_count():
    # P(N = k) = (1 - rho) rho^k on k = 0, 1, 2, ...
    d = GeometricCount(0.5)
    assert d.mean() == pytest.approx(1.0)
    assert d.var() == pytest.approx(2.0)
    assert d.cdf(-0.5) == pytest.approx(0.0, abs=1e-15)
    assert d.cdf(0.5) == pytest.approx(0.5, abs=1e-15)
    vals, probs = d.atoms()
    assert probs.sum() == pytest.approx(1.0, abs=1e-11)


def test_random_sum_moments():
    w = random_sum(GeometricCount(0.5), Exponential(1.0))
    # Wald: E[W] = E[N] E[X]; Var = E[N] Var[X] + Var[N] E[X]^2
    assert w.mean() == pytest.approx(1.0, rel=1e-8)
    assert w.var() == pytest.approx(3.0, rel=1e-8)


def test_permutation_statistic():
    rng = rng_stream(0, 0)
    a = rng.integers(0, 10, size=(6, 6)).astype(float)
    stat = permutation_statistic(a)
    a_hat = (a - a.mean(axis=1, keepdims=True)
             - a.mean(axis=0, keepdims=True) + a.mean())
    assert stat.var() == pytest.approx(float((a_hat ** 2).sum()) / 5.0,
                                       rel=1e-12)


def test_centered():
    c = centered(Exponential(1.0))
    assert c.mean() == pytest.approx(0.0, abs=1e-12)
    assert c.var() == pytest.approx(1.0, rel=1e-12)
    g = Gaussian(0.0, 1.0)
    assert centered(g) is g  # already centered


def test_sampling_deterministic():
    d = Gamma(2.0, 1.0)
    x1 = d.sample(rng_stream(5, 1), 100)
    x2 = d.sample(rng_stream(5, 1), 100)
    assert np.array_equal(x1, x2)
    assert x1.shape == (100,)


def test_sample_moments_close():
    d = Beta(4.0, 8.0)
    x = d.sample(rng_stream(1, 0), 200000)
    assert x.mean() == pytest.approx(d.mean(), abs=0.005)
    assert x.var() == pytest.approx(d.var(), rel=0.05)


def test_parse_dist():
    d = parse_dist("beta:4,8")
    assert isinstance(d, Beta)
    assert parse_dist("exp:1").var() == pytest.approx(1.0)
    assert isinstance(parse_dist("normal:0,1"), Gaussian)
    assert isinstance(parse_dist("geometric:0.5"), GeometricCount)
    with pytest.raises(InvalidParameter):
        parse_dist("nonesuch:1,2")
    with pytest.raises(InvalidParameter):
        parse_dist("beta:4")


def test_point_mass():
    d = point_mass(3.0)
    assert d.mean() == 3.0
    assert d.var() == 0.0


def test_make_dispatch():
    assert isinstance(make("inverse-gamma", (5.0, 3.0)), InverseGamma)
    assert isinstance(make("invgamma", (5.0, 3.0)), InverseGamma)


def test_expect_requires_density_or_atoms():
    class Opaque(Exponential):
        has_density = False

        def atoms(self):
            return np.array([]), np.array([])

    with pytest.raises(DistributionError):
        Opaque(1.0).expect(lambda x: x)
