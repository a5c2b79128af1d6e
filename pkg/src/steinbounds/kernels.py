"""Stein kernels: the function tau with Cov[W, phi(W)] = E[tau(W) phi'(W)].

Three construction routes:

* pearson_kernel  - closed quadratic forms for the classical families;
* integral_kernel - tau(x) = (1/p(x)) * integral_x^inf (y - mu) p(y) dy
                    by adaptive quadrature, optionally cached on a
                    Chebyshev grid;
* smoothed_kernel - the kernel of Y + Z for Gaussian noise Z, usable when
                    Y itself has no density.

The Pareto kernel is implemented in its nonnegative form
theta*(theta - m)/(a - 1); see the README note on the sign convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BarycentricInterpolator
from scipy.stats import norm as _norm

from .distributions import (Distribution, DiscreteDistribution, Gaussian,
                            DistributionError)
from .numerics import Interval, chebyshev_grid, integrate

DENSITY_FLOOR = 1e-300


class KernelError(Exception):
    pass


class UnsupportedFamily(KernelError):
    pass


class DensityUnderflow(KernelError):
    pass


@dataclass
class SteinKernel:
    """Evaluable Stein kernel with provenance."""

    eval: object
    provenance: str  # pearson | integral | smoothed
    base: Distribution
    pearson_coeffs: tuple | None = None  # (delta1, delta2, delta3, mu)

    def __call__(self, x):
        return self.eval(x)

    def expected_value(self, rel_tol: float = 1e-9) -> float:
        """E[tau(W)]; equals Var[W] when the kernel is exact."""
        return self.base.expect(lambda x: self.eval(x), rel_tol=rel_tol)


# ------------------------------------------------------------- Pearson route

def _quadratic_coeffs(d: Distribution):
    """(A, B, C) with tau(x) = A x^2 + B x + C for the supported families."""
    fam = d.family
    if fam == "gaussian":
        return 0.0, 0.0, float(d.params[1])
    if fam == "beta":
        a, b = d.params
        return -1.0 / (a + b), 1.0 / (a + b), 0.0
    if fam == "gamma":
        _, rate = d.params
        return 0.0, 1.0 / rate, 0.0
    if fam == "exponential":
        rate = d.params[0]
        return 0.0, 1.0 / rate, 0.0
    if fam == "inverse-gamma":
        a, _ = d.params
        if a <= 1:
            raise UnsupportedFamily(f"inverse-gamma kernel needs shape > 1, got {a}")
        return 1.0 / (a - 1.0), 0.0, 0.0
    if fam == "pareto":
        a, m = d.params
        if a <= 1:
            raise UnsupportedFamily(f"pareto kernel needs shape > 1, got {a}")
        return 1.0 / (a - 1.0), -m / (a - 1.0), 0.0
    if fam == "uniform":
        c, dd = d.params
        return -0.5, 0.5 * (c + dd), -0.5 * c * dd
    raise UnsupportedFamily(f"no closed Pearson kernel for family {fam!r}")


def pearson_kernel(d: Distribution) -> SteinKernel:
    """Closed-form quadratic Stein kernel for a Pearson-family law."""
    A, B, C = _quadratic_coeffs(d)
    mu = d.mean()
    delta1 = A
    delta2 = 2.0 * A * mu + B
    delta3 = A * mu * mu + B * mu + C

    def tau(x):
        x = np.asarray(x, dtype=float)
        return A * x * x + B * x + C

    return SteinKernel(eval=tau, provenance="pearson", base=d,
                       pearson_coeffs=(delta1, delta2, delta3, mu))


# ------------------------------------------------------------ integral route

def _tail_moment(d: Distribution, x: float, mu: float, rel_tol: float):
    """integral_x^hi (y - mu) p(y) dy, via whichever side is shorter."""
    sup = d.support
    use_lower = d.has_cdf and float(d.cdf(x)) < 0.5
    if use_lower:
        res = integrate(lambda y: (y - mu) * d.density(y),
                        Interval(sup.lo, x), rel_tol=rel_tol, abs_tol=1e-14)
        return -res.value
    res = integrate(lambda y: (y - mu) * d.density(y),
                    Interval(x, sup.hi), rel_tol=rel_tol, abs_tol=1e-14)
    return res.value


def integral_kernel(d: Distribution, grid_points: int = 512,
                    rel_tol: float = 1e-9) -> SteinKernel:
    """Stein kernel by quadrature of the tail integral divided by p(x).

    With grid_points > 0 the kernel is precomputed at Chebyshev-spaced
    points over the central quantile range and evaluated by barycentric
    interpolation (spectrally accurate for smooth kernels, exact for the
    quadratic Pearson ones); values are clamped at the grid edges.
    Pass grid_points=0 for direct per-point quadrature.
    """
    if not d.has_density:
        raise KernelError(f"{d.family}: integral kernel needs a density")
    mu = d.mean()

    def tau_exact_scalar(x):
        p = float(d.density(x))
        if p < DENSITY_FLOOR:
            raise DensityUnderflow(f"density underflow at x={x}")
        return _tail_moment(d, float(x), mu, rel_tol) / p

    if grid_points <= 0:
        return SteinKernel(eval=np.vectorize(tau_exact_scalar, otypes=[float]),
                           provenance="integral", base=d)

    # Grid over the central quantile range on both sides: kernels are used
    # inside density-weighted expectations, where the clipped tails carry
    # negligible mass, and densities may underflow at finite support edges.
    lo = d.quantile(1e-9)
    hi = d.quantile(1.0 - 1e-9)
    nodes = chebyshev_grid(lo, hi, grid_points)
    values = np.array([tau_exact_scalar(x) for x in nodes])
    interp = BarycentricInterpolator(nodes, values)

    def tau_outside(x):
        # Exact evaluation beyond the cached range; clamp to the nearest
        # cached value only when the density has underflowed there.
        try:
            return tau_exact_scalar(x)
        except DensityUnderflow:
            return values[0] if x < nodes[0] else values[-1]

    def tau(x):
        scalar = np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        inside = (x >= nodes[0]) & (x <= nodes[-1])
        out = np.empty_like(x)
        if inside.any():
            out[inside] = np.maximum(interp(x[inside]), 0.0)
        for i in np.nonzero(~inside)[0]:
            out[i] = max(tau_outside(float(x[i])), 0.0)
        return float(out[0]) if scalar else out

    return SteinKernel(eval=tau, provenance="integral", base=d)


# ------------------------------------------------------------ smoothed route

class SmoothedDistribution(Distribution):
    """Law of Y + Z with Z ~ N(0, eps^2) independent of Y."""

    family = "smoothed"
    has_density = True
    has_cdf = True
    has_closed_moments = True

    def __init__(self, base: Distribution, epsilon: float):
        if epsilon <= 0:
            raise KernelError("epsilon must be > 0")
        self.base = base
        self.epsilon = epsilon
        self.params = tuple(base.params) + (epsilon,)
        self.support = Interval(-math.inf, math.inf)
        self.has_sampler = base.has_sampler
        self._mu = base.mean()

    def _mix(self, x, f):
        """E[f(x - Y)] over the law of Y (exact for finite atoms); x is 1-d."""
        x = np.asarray(x, dtype=float)
        vals, probs = self.base.atoms()
        out = np.zeros_like(x, dtype=float)
        if len(vals):
            out += np.sum(probs[:, None] * f(x[None, :] - vals[:, None]), axis=0)
        if self.base.continuous_weight > 1e-12:
            if not self.base.has_density:
                raise KernelError("smoothing needs atoms or a density for Y")
            def one(t):
                return integrate(lambda y: self.base.density(y) * float(f(t - y)),
                                 self.base.support, rel_tol=1e-10).value
            out = out + np.vectorize(one)(x)
        return out

    def density(self, x):
        x1 = np.atleast_1d(np.asarray(x, dtype=float))
        out = self._mix(x1, lambda t: _norm.pdf(t, scale=self.epsilon))
        return out if np.ndim(x) else float(out[0])

    def cdf(self, x):
        x1 = np.atleast_1d(np.asarray(x, dtype=float))
        out = self._mix(x1, lambda t: _norm.cdf(t, scale=self.epsilon))
        return out if np.ndim(x) else float(out[0])

    def mean(self):
        return self._mu

    def var(self):
        return self.base.var() + self.epsilon ** 2

    def sample(self, rng, size):
        return self.base.sample(rng, size) + rng.normal(0.0, self.epsilon, size=size)

    def expect(self, f, rel_tol=1e-9, points=None):
        # Integrate over the effective range: the Gaussian factor makes the
        # omitted tail mass < 1e-13, and the kernel/density evaluations
        # underflow far outside it.
        eff = self.effective_interval(1e-13)
        return super().expect(f, rel_tol=rel_tol, points=points, interval=eff)


@dataclass
class SmoothedSpec:
    """Y together with its Gaussian-smoothed companion Y + Z."""

    base: Distribution
    epsilon: float
    convolved: SmoothedDistribution = field(init=False)

    def __post_init__(self):
        self.convolved = SmoothedDistribution(self.base, self.epsilon)


def smooth(base: Distribution, epsilon: float) -> SmoothedSpec:
    return SmoothedSpec(base=base, epsilon=epsilon)


def smoothed_kernel(s: SmoothedSpec) -> SteinKernel:
    """Kernel tau_eps(x) = eps^2 + E[(Y'-mu) SF_eps(x-Y')] / E[pdf_eps(x-Y')]."""
    conv = s.convolved
    eps = s.epsilon
    mu = conv.mean()
    base = s.base

    def tau(x):
        x1 = np.atleast_1d(np.asarray(x, dtype=float))
        den = conv._mix(x1, lambda t: _norm.pdf(t, scale=eps))
        vals, probs = base.atoms()
        num = np.zeros_like(x1)
        if len(vals):
            sf = _norm.sf(x1[None, :] - vals[:, None], scale=eps)
            num += np.sum((probs * (vals - mu))[:, None] * sf, axis=0)
        if base.continuous_weight > 1e-12:
            def one(t):
                return integrate(
                    lambda y: (y - mu) * base.density(y)
                    * float(_norm.sf(t - y, scale=eps)),
                    base.support, rel_tol=1e-10).value
            num = num + np.vectorize(one)(x1)
        if np.any(den < DENSITY_FLOOR):
            raise DensityUnderflow("smoothed denominator underflow in the tails")
        out = eps * eps + num / den
        return out if np.ndim(x) else float(out[0])

    kernel = SteinKernel(eval=tau, provenance="smoothed", base=conv)
    return kernel


# ------------------------------------------------------------- diagnostics

def kernel_identity_residual(kernel: SteinKernel, phi, dphi,
                             rel_tol: float = 1e-8, points=None) -> float:
    """Cov[W, phi(W)] - E[tau(W) phi'(W)] by exact expectation."""
    d = kernel.base
    mu = d.mean()
    cov = d.expect(lambda x: (x - mu) * phi(x), rel_tol=rel_tol, points=points)
    rhs = d.expect(lambda x: kernel(x) * dphi(x), rel_tol=rel_tol, points=points)
    return cov - rhs


def pearson_ode_residual(kernel: SteinKernel, x, d: Distribution,
                         h: float = 1e-6):
    """p'(x)/p(x) + ((2 d1 + 1)(x - mu) + d2) / tau(x); zero for Pearson laws."""
    if kernel.pearson_coeffs is None:
        raise KernelError("kernel has no Pearson coefficients")
    d1, d2, _, mu = kernel.pearson_coeffs
    x = np.asarray(x, dtype=float)
    logp = (np.log(d.density(x + h)) - np.log(d.density(x - h))) / (2 * h)
    return logp + ((2 * d1 + 1) * (x - mu) + d2) / kernel(x)
