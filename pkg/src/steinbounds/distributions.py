"""Catalog of univariate laws: density/cdf/sampler/moments plus support.

A Distribution may have a continuous part (density), a discrete part
(atoms), or only a sampler.  Capability flags say which queries are
answerable; expectation routines pick the exact route when one exists.

The string syntax "family:p1,p2,..." (shared with the CLI) is parsed by
parse_dist.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import stats as _stats

from .numerics import (Interval, REAL_LINE, integrate, inverse_cdf,
                       rng_stream)

TAIL_MASS = 1e-9  # default quantile range for effective intervals


class DistributionError(Exception):
    pass


class InvalidParameter(DistributionError):
    pass


class Distribution:
    """Base univariate law.

    Subclasses populate family, params, support, and the capability set.
    Samplers are stateless: they consume a caller-provided numpy Generator.
    """

    family = "abstract"
    params = ()

    # capabilities
    has_density = False
    has_cdf = False
    has_sampler = False
    has_closed_moments = False

    support = REAL_LINE

    def density(self, x):
        raise DistributionError(f"{self.family}: no density")

    def cdf(self, x):
        raise DistributionError(f"{self.family}: no cdf")

    def survival(self, x):
        return 1.0 - self.cdf(x)

    def mean(self) -> float:
        raise DistributionError(f"{self.family}: no closed mean")

    def var(self) -> float:
        raise DistributionError(f"{self.family}: no closed variance")

    def sample(self, rng, size):
        raise DistributionError(f"{self.family}: no sampler")

    def atoms(self):
        """Discrete part as (values, probabilities) arrays; empty if none."""
        return np.empty(0), np.empty(0)

    @property
    def continuous_weight(self) -> float:
        """Probability mass carried by the continuous part."""
        return 1.0 - float(np.sum(self.atoms()[1]))

    def quantile(self, p: float) -> float:
        if not self.has_cdf:
            raise DistributionError(f"{self.family}: no cdf to invert")
        return inverse_cdf(lambda x: float(self.cdf(x)), p, self.support)

    def effective_interval(self, tail_mass: float = TAIL_MASS) -> Interval:
        """Quantile range [q(tail_mass), q(1-tail_mass)], clipped to support."""
        lo, hi = self.support.lo, self.support.hi
        if not self.support.lo_finite:
            lo = self.quantile(tail_mass)
        if not self.support.hi_finite:
            hi = self.quantile(1.0 - tail_mass)
        return Interval(lo, hi)

    def expect(self, f, rel_tol: float = 1e-9, points=None,
               interval: Interval | None = None) -> float:
        """E[f(X)] by exact summation and/or quadrature.

        interval optionally restricts the quadrature range (the caller is
        responsible for the omitted tail mass being negligible)."""
        vals, probs = self.atoms()
        total = float(np.sum(probs * f(vals))) if len(vals) else 0.0
        w = self.continuous_weight
        if w > 1e-12:
            if not self.has_density:
                raise DistributionError(
                    f"{self.family}: expectation needs density or atoms")
            res = integrate(lambda x: f(x) * self.density(x),
                            interval or self.support, rel_tol=rel_tol,
                            points=points)
            total += res.value
        return total

    def mc_expect(self, f, rng, n: int):
        """MC estimate of E[f(X)]: (estimate, standard error)."""
        x = self.sample(rng, n)
        y = np.asarray(f(x), dtype=float)
        if not np.all(np.isfinite(y)):
            raise DistributionError("non-finite sample encountered")
        return float(np.mean(y)), float(np.std(y, ddof=1) / math.sqrt(n))

    def describe(self):
        return {"family": self.family, "params": [float(p) for p in self.params]}

    def __repr__(self):
        ps = ",".join(f"{float(p):g}" for p in self.params)
        return f"{self.family}:{ps}" if ps else self.family


# ------------------------------------------------------- continuous families

class _ScipyDistribution(Distribution):
    has_density = True
    has_cdf = True
    has_sampler = True
    has_closed_moments = True

    def __init__(self, frozen, support):
        self._frozen = frozen
        self.support = support

    def density(self, x):
        return self._frozen.pdf(x)

    def cdf(self, x):
        return self._frozen.cdf(x)

    def survival(self, x):
        return self._frozen.sf(x)

    def mean(self):
        return float(self._frozen.mean())

    def var(self):
        return float(self._frozen.var())

    def quantile(self, p):
        return float(self._frozen.ppf(p))

    def sample(self, rng, size):
        return self._frozen.rvs(size=size, random_state=rng)


class Gaussian(_ScipyDistribution):
    """Normal law parameterized by (mean, variance)."""

    family = "gaussian"

    def __init__(self, mu, var):
        if var <= 0:
            raise InvalidParameter(f"gaussian variance must be > 0, got {var}")
        self.params = (mu, var)
        super().__init__(_stats.norm(mu, math.sqrt(var)), REAL_LINE)

    def sample(self, rng, size):
        mu, var = self.params
        return rng.normal(mu, math.sqrt(var), size=size)


class Beta(_ScipyDistribution):
    family = "beta"

    def __init__(self, a, b):
        if a <= 0 or b <= 0:
            raise InvalidParameter("beta requires alpha, beta > 0")
        self.params = (a, b)
        super().__init__(_stats.beta(a, b), Interval(0.0, 1.0))


class Gamma(_ScipyDistribution):
    """Gamma with shape k and rate b (density b^k x^{k-1} e^{-bx}/Gamma(k))."""

    family = "gamma"

    def __init__(self, shape, rate):
        if shape <= 0 or rate <= 0:
            raise InvalidParameter("gamma requires shape, rate > 0")
        self.params = (shape, rate)
        super().__init__(_stats.gamma(shape, scale=1.0 / rate),
                         Interval(0.0, math.inf))


class InverseGamma(_ScipyDistribution):
    family = "inverse-gamma"

    def __init__(self, a, b):
        if a <= 0 or b <= 0:
            raise InvalidParameter("inverse-gamma requires a, b > 0")
        self.params = (a, b)
        super().__init__(_stats.invgamma(a, scale=b), Interval(0.0, math.inf))


class Pareto(_ScipyDistribution):
    """Pareto with density a m^a x^{-a-1} on x >= m."""

    family = "pareto"

    def __init__(self, shape, scale):
        if shape <= 0 or scale <= 0:
            raise InvalidParameter("pareto requires shape, scale > 0")
        self.params = (shape, scale)
        super().__init__(_stats.pareto(shape, scale=scale),
                         Interval(scale, math.inf))

    def mean(self):
        a, m = self.params
        if a <= 1:
            raise InvalidParameter(f"pareto mean undefined for shape {a} <= 1")
        return a * m / (a - 1)

    def var(self):
        a, m = self.params
        if a <= 2:
            raise InvalidParameter(f"pareto variance undefined for shape {a} <= 2")
        return a * m * m / ((a - 1) ** 2 * (a - 2))


class Exponential(_ScipyDistribution):
    """Exponential with rate lam (mean 1/lam)."""

    family = "exponential"

    def __init__(self, rate):
        if rate <= 0:
            raise InvalidParameter("exponential requires rate > 0")
        self.params = (rate,)
        super().__init__(_stats.expon(scale=1.0 / rate), Interval(0.0, math.inf))

    def survival(self, x):
        return np.exp(-self.params[0] * np.maximum(np.asarray(x, float), 0.0))


class Uniform(_ScipyDistribution):
    family = "uniform"

    def __init__(self, lo, hi):
        if not lo < hi:
            raise InvalidParameter(f"uniform requires lo < hi, got [{lo}, {hi}]")
        self.params = (lo, hi)
        super().__init__(_stats.uniform(lo, hi - lo), Interval(lo, hi))


# --------------------------------------------------------- discrete families

class DiscreteDistribution(Distribution):
    """Finite support: atoms (values, probs)."""

    family = "discrete-empirical"
    has_cdf = True
    has_sampler = True
    has_closed_moments = True

    def __init__(self, values, probs, family=None, params=()):
        values = np.asarray(values, dtype=float)
        probs = np.asarray(probs, dtype=float)
        if len(values) != len(probs) or len(values) == 0:
            raise InvalidParameter("atoms and probabilities must align and be nonempty")
        if np.any(probs < -1e-15) or abs(probs.sum() - 1.0) > 1e-9:
            raise InvalidParameter("probabilities must be nonnegative and sum to 1")
        order = np.argsort(values)
        self._values = values[order]
        self._probs = np.maximum(probs[order], 0.0)
        self._probs /= self._probs.sum()
        self._cum = np.cumsum(self._probs)
        if family:
            self.family = family
        self.params = params
        self.support = Interval(self._values[0] - 0.0, self._values[-1]) \
            if len(self._values) > 1 else Interval(self._values[0] - 0.5,
                                                   self._values[0] + 0.5)

    def atoms(self):
        return self._values, self._probs

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self._values, x, side="right")
        cum = np.concatenate([[0.0], self._cum])
        return cum[idx]

    def mean(self):
        return float(np.dot(self._values, self._probs))

    def var(self):
        m = self.mean()
        return float(np.dot((self._values - m) ** 2, self._probs))

    def sample(self, rng, size):
        return rng.choice(self._values, size=size, p=self._probs)

    def quantile(self, p):
        idx = int(np.searchsorted(self._cum, p, side="left"))
        idx = min(idx, len(self._values) - 1)
        return float(self._values[idx])

    def effective_interval(self, tail_mass=TAIL_MASS):
        return Interval(float(self._values[0]), float(self._values[-1])) \
            if len(self._values) > 1 else self.support


def two_point(a, b):
    """Support {-a, b} with P(-a) = b/(a+b) so the mean is zero."""
    if a <= 0 or b <= 0:
        raise InvalidParameter("two-point requires a, b > 0")
    p_neg = b / (a + b)
    return DiscreteDistribution([-a, b], [p_neg, 1.0 - p_neg],
                                family="two-point", params=(a, b))


def standardized_bernoulli(p, n):
    """Law of (xi - p)/sqrt(npq) for xi ~ Bernoulli(p); n of these sum to
    a variance-one total."""
    if not 0 < p < 1:
        raise InvalidParameter("standardized-bernoulli requires p in (0,1)")
    if n < 1:
        raise InvalidParameter("standardized-bernoulli requires n >= 1")
    q = 1.0 - p
    s = math.sqrt(n * p * q)
    return DiscreteDistribution([-p / s, q / s], [q, p],
                                family="standardized-bernoulli", params=(p, n))


def point_mass(c):
    return DiscreteDistribution([c], [1.0], family="point-mass", params=(c,))


class GeometricCount(Distribution):
    """P(N = k) = (1 - rho) rho^k on k = 0, 1, 2, ..."""

    family = "geometric-count"
    has_cdf = True
    has_sampler = True
    has_closed_moments = True

    def __init__(self, rho):
        if not 0 <= rho < 1:
            raise InvalidParameter("geometric-count requires rho in [0,1)")
        self.params = (rho,)
        self.rho = rho
        self.support = Interval(0.0, math.inf) if rho > 0 else Interval(-0.5, 0.5)

    def pmf(self, k):
        k = np.asarray(k)
        return (1.0 - self.rho) * self.rho ** k

    def atoms(self):
        # truncated at declared tail mass 1e-12
        if self.rho == 0:
            return np.array([0.0]), np.array([1.0])
        kmax = int(math.ceil(math.log(1e-12) / math.log(self.rho))) + 1
        k = np.arange(kmax + 1)
        p = self.pmf(k).astype(float)
        return k.astype(float), p

    @property
    def continuous_weight(self):
        return 0.0

    def cdf(self, x):
        x = np.floor(np.asarray(x, dtype=float))
        out = np.where(x < 0, 0.0, 1.0 - self.rho ** (x + 1))
        return out

    def survival(self, x):
        # P(N > x) = rho^(floor(x)+1) for x >= 0
        x = np.floor(np.asarray(x, dtype=float))
        return np.where(x < 0, 1.0, self.rho ** (x + 1))

    def mean(self):
        return self.rho / (1.0 - self.rho)

    def var(self):
        return self.rho / (1.0 - self.rho) ** 2

    def sample(self, rng, size):
        if self.rho == 0:
            return np.zeros(size)
        return rng.geometric(1.0 - self.rho, size=size) - 1.0


# ------------------------------------------------------------ compound laws

class SamplerSum(Distribution):
    """Sum of independent parts; sampler always, exact atoms when all parts
    are finitely discrete."""

    family = "convolution"
    has_sampler = True
    has_closed_moments = True

    def __init__(self, parts):
        if not parts:
            raise InvalidParameter("need at least one part")
        self.parts = list(parts)
        self._mean = sum(p.mean() for p in parts)
        self._var = sum(p.var() for p in parts)
        lo = sum(p.support.lo for p in parts)
        hi = sum(p.support.hi for p in parts)
        self.support = Interval(lo, hi)
        self._atoms = self._convolve_atoms()
        if self._atoms is not None:
            self.has_cdf = True

    def _convolve_atoms(self):
        if not all(isinstance(p, DiscreteDistribution) for p in self.parts):
            return None
        vals = np.array([0.0])
        probs = np.array([1.0])
        for part in self.parts:
            pv, pp = part.atoms()
            grid = (vals[:, None] + pv[None, :]).ravel()
            w = (probs[:, None] * pp[None, :]).ravel()
            # merge numerically equal atoms (lattice sums stay small)
            key = np.round(grid, 10)
            uniq, inv = np.unique(key, return_inverse=True)
            merged = np.zeros(len(uniq))
            np.add.at(merged, inv, w)
            vals, probs = uniq, merged
            if len(vals) > 200_000:
                return None
        return vals, probs

    def atoms(self):
        if self._atoms is None:
            return np.empty(0), np.empty(0)
        return self._atoms

    def cdf(self, x):
        if self._atoms is None:
            raise DistributionError("convolution: no cdf without finite atoms")
        vals, probs = self._atoms
        cum = np.concatenate([[0.0], np.cumsum(probs)])
        idx = np.searchsorted(vals, np.asarray(x, dtype=float), side="right")
        return cum[idx]

    def quantile(self, p):
        vals, probs = self.atoms()
        if len(vals):
            cum = np.cumsum(probs)
            idx = min(int(np.searchsorted(cum, p, side="left")), len(vals) - 1)
            return float(vals[idx])
        return super().quantile(p)

    def mean(self):
        return self._mean

    def var(self):
        return self._var

    def sample(self, rng, size):
        total = np.zeros(size)
        for p in self.parts:
            total = total + p.sample(rng, size)
        return total

    def pairwise_density(self, x, rel_tol=1e-8):
        """Numeric density by sequential convolution; all parts need densities."""
        if not all(p.has_density for p in self.parts):
            raise DistributionError("convolution density needs densities for all parts")
        if len(self.parts) == 1:
            return self.parts[0].density(x)
        if len(self.parts) != 2:
            raise DistributionError("numeric convolution density limited to 2 parts")
        a, b = self.parts

        def one(t):
            iv = a.support
            return integrate(lambda y: a.density(y) * b.density(t - y), iv,
                             rel_tol=rel_tol).value
        return np.vectorize(one)(x)


def sum_of_independents(parts):
    return SamplerSum(parts)


class RandomSum(Distribution):
    """W = sum_{i=1}^N X_i with N a count variable independent of the X_i."""

    family = "random-sum"
    has_sampler = True
    has_closed_moments = True

    def __init__(self, count_dist, summand):
        kv, kp = count_dist.atoms()
        if len(kv) == 0 or np.any(kv < -1e-12) or np.any(np.abs(kv - np.round(kv)) > 1e-9):
            raise InvalidParameter("count distribution must sit on nonnegative integers")
        if not (summand.has_sampler and summand.has_closed_moments):
            raise InvalidParameter("summand needs sampler and closed moments")
        self.count_dist = count_dist
        self.summand = summand
        self.params = tuple(count_dist.params) + tuple(summand.params)
        en, vn = count_dist.mean(), count_dist.var()
        ex, vx = summand.mean(), summand.var()
        self._mean = en * ex
        self._var = ex * ex * vn + en * vx
        lo = min(0.0, summand.support.lo)
        self.support = Interval(lo, math.inf) if en > 0 else Interval(-0.5, 0.5)
        # Geometric count + exponential summand has a closed compound form:
        # an atom at 0 of mass 1-rho plus Exp(rate*(1-rho)) with mass rho.
        self._geo_exp = None
        if isinstance(count_dist, GeometricCount) and isinstance(summand, Exponential):
            rho = count_dist.rho
            if rho > 0:
                self._geo_exp = (rho, summand.params[0] * (1.0 - rho))
                self.has_cdf = True
                self.has_density = True

    def mean(self):
        return self._mean

    def var(self):
        return self._var

    def atoms(self):
        if self._geo_exp is not None:
            rho, _ = self._geo_exp
            return np.array([0.0]), np.array([1.0 - rho])
        if self._mean == 0:
            return np.array([0.0]), np.array([1.0])
        return np.empty(0), np.empty(0)

    def density(self, x):
        if self._geo_exp is None:
            raise DistributionError("random-sum: no closed density for this pair")
        rho, rate = self._geo_exp
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, rho * rate * np.exp(-rate * np.maximum(x, 0.0)), 0.0)

    def survival(self, x):
        if self._geo_exp is None:
            raise DistributionError("random-sum: no closed survival for this pair")
        rho, rate = self._geo_exp
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 1.0, rho * np.exp(-rate * np.maximum(x, 0.0)))

    def cdf(self, x):
        return 1.0 - self.survival(x)

    def quantile(self, p):
        if self._geo_exp is None:
            return super().quantile(p)
        rho, rate = self._geo_exp
        if p <= 1.0 - rho:
            return 0.0
        return float(-math.log((1.0 - p) / rho) / rate)

    def sample(self, rng, size):
        counts = self.count_dist.sample(rng, size).astype(int)
        total = np.zeros(size)
        kmax = counts.max() if size else 0
        # draw column-by-column; cheap because counts are small in practice
        for k in range(kmax):
            active = counts > k
            n_active = int(active.sum())
            if n_active == 0:
                break
            total[active] += self.summand.sample(rng, n_active)
        return total


def random_sum(count_dist, summand):
    return RandomSum(count_dist, summand)


# --------------------------------------------------- permutation statistics

class PermutationStatistic(Distribution):
    """W = sum_i a[i, pi(i)] for a uniformly random permutation pi."""

    family = "permutation-statistic"
    has_sampler = True
    has_closed_moments = True

    def __init__(self, a):
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 2:
            raise InvalidParameter("need a square array with n >= 2")
        self.a = a
        n = a.shape[0]
        self.n = n
        row = a.mean(axis=1, keepdims=True)
        col = a.mean(axis=0, keepdims=True)
        grand = a.mean()
        self.hat = a - row - col + grand
        self._mean = n * grand
        self._var = float(np.sum(self.hat ** 2) / (n - 1))
        self.C = float(np.max(np.abs(self.hat)))
        self.degenerate = self._var <= 1e-14
        self.support = Interval(float(a.min() * n) - 1e-9, float(a.max() * n) + 1e-9)

    def mean(self):
        return self._mean

    def var(self):
        return self._var

    def sample(self, rng, size):
        rows = np.arange(self.n)
        out = np.empty(size)
        for i in range(size):
            out[i] = self.a[rows, rng.permutation(self.n)].sum()
        return out

    def enumerate_values(self):
        """All n! values of W; feasible for n <= 9."""
        from itertools import permutations
        if self.n > 9:
            raise DistributionError("enumeration limited to n <= 9")
        rows = np.arange(self.n)
        vals = [self.a[rows, list(p)].sum() for p in permutations(range(self.n))]
        return np.asarray(vals)

    def standardized(self):
        """Z = (W - E[W]) / sigma as an affine image of this law."""
        if self.degenerate:
            raise DistributionError("degenerate permutation statistic (sigma = 0)")
        return Affine(self, shift=-self._mean, scale=1.0 / math.sqrt(self._var))


def permutation_statistic(a):
    return PermutationStatistic(a)


# ------------------------------------------------------------- affine images

class Affine(Distribution):
    """Law of scale * (X + shift); used for centering and standardizing."""

    family = "affine"

    def __init__(self, base, shift=0.0, scale=1.0):
        if scale <= 0:
            raise InvalidParameter("affine scale must be > 0")
        self.base = base
        self.shift = shift
        self.scale = scale
        self.params = tuple(base.params) + (shift, scale)
        self.has_density = base.has_density
        self.has_cdf = base.has_cdf
        self.has_sampler = base.has_sampler
        self.has_closed_moments = base.has_closed_moments
        lo = scale * (base.support.lo + shift)
        hi = scale * (base.support.hi + shift)
        self.support = Interval(lo, hi)
        self.family = f"centered-{base.family}" if scale == 1.0 else f"affine-{base.family}"

    def _pull(self, x):
        return np.asarray(x, dtype=float) / self.scale - self.shift

    def density(self, x):
        return self.base.density(self._pull(x)) / self.scale

    def cdf(self, x):
        return self.base.cdf(self._pull(x))

    def survival(self, x):
        return self.base.survival(self._pull(x))

    def mean(self):
        return self.scale * (self.base.mean() + self.shift)

    def var(self):
        return self.scale ** 2 * self.base.var()

    def quantile(self, p):
        return self.scale * (self.base.quantile(p) + self.shift)

    def sample(self, rng, size):
        return self.scale * (self.base.sample(rng, size) + self.shift)

    def atoms(self):
        v, p = self.base.atoms()
        return self.scale * (v + self.shift), p

    @property
    def continuous_weight(self):
        return self.base.continuous_weight


def centered(d):
    """Shift a law to mean zero (identity if already centered)."""
    mu = d.mean()
    if abs(mu) <= 1e-12:
        return d
    return Affine(d, shift=-mu, scale=1.0)


# -------------------------------------------------------------- construction

_FAMILY_ALIASES = {
    "exp": "exponential",
    "normal": "gaussian",
    "invgamma": "inverse-gamma",
    "geometric": "geometric-count",
}

_MAKERS = {
    "gaussian": lambda p: Gaussian(*_need(p, 2, "gaussian")),
    "beta": lambda p: Beta(*_need(p, 2, "beta")),
    "gamma": lambda p: Gamma(*_need(p, 2, "gamma")),
    "inverse-gamma": lambda p: InverseGamma(*_need(p, 2, "inverse-gamma")),
    "pareto": lambda p: Pareto(*_need(p, 2, "pareto")),
    "exponential": lambda p: Exponential(*_need(p, 1, "exponential")),
    "uniform": lambda p: Uniform(*_need(p, 2, "uniform")),
    "two-point": lambda p: two_point(*_need(p, 2, "two-point")),
    "standardized-bernoulli": lambda p: standardized_bernoulli(p[0], int(p[1])),
    "geometric-count": lambda p: GeometricCount(*_need(p, 1, "geometric-count")),
    "point-mass": lambda p: point_mass(*_need(p, 1, "point-mass")),
    "discrete-empirical": lambda p: DiscreteDistribution(p[::2], p[1::2]),
}


def _need(params, n, family):
    if len(params) != n:
        raise InvalidParameter(f"{family} expects {n} parameters, got {len(params)}")
    return params


def make(family, params):
    family = _FAMILY_ALIASES.get(family, family)
    try:
        maker = _MAKERS[family]
    except KeyError:
        raise InvalidParameter(f"unknown family {family!r}") from None
    return maker(list(params))


def parse_dist(text: str):
    """Parse the "family:p1,p2,..." string syntax."""
    if ":" in text:
        family, _, tail = text.partition(":")
        params = [float(t) for t in tail.split(",") if t.strip()]
    else:
        family, params = text, []
    return make(family.strip(), params)
