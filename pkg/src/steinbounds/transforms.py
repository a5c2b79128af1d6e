"""Zero-bias and equilibrium transforms.

zero_bias(d) builds the law W* with E[W phi(W)] = sigma^2 E[phi'(W*)];
its density is sigma^-2 E[W 1(W > w)] on the convex hull of the support.
equilibrium(d) builds W^e with E[phi(W)] - phi(0) = (1/lambda) E[phi'(W^e)],
whose survival is lambda * E[(W - x)_+].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .distributions import (Affine, DiscreteDistribution, Distribution,
                            DistributionError, Exponential, RandomSum,
                            Uniform)
from .numerics import (Interval, IntegrationError, QuadResult, integrate,
                       integrate_soft, linear_grid)


class TransformError(Exception):
    pass


class NotCentered(TransformError):
    """Zero-bias input must have mean zero (within 1e-9)."""


# ------------------------------------------------------------------ helpers

def stop_loss(d: Distribution, t, rel_tol: float = 1e-10):
    """E[(W - t)_+], with closed forms where cheap and exact routes otherwise."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if isinstance(d, Exponential):
        lam = d.params[0]
        out = np.where(t_arr >= 0, np.exp(-lam * np.maximum(t_arr, 0.0)) / lam,
                       1.0 / lam - t_arr)
        return out if np.ndim(t) else float(out[0])
    if isinstance(d, RandomSum) and d._geo_exp is not None:
        rho, rate = d._geo_exp
        out = np.where(t_arr >= 0,
                       rho * np.exp(-rate * np.maximum(t_arr, 0.0)) / rate,
                       d.mean() - t_arr)
        return out if np.ndim(t) else float(out[0])
    if isinstance(d, Uniform):
        lo, hi = d.params
        tc = np.clip(t_arr, lo, hi)
        out = (hi - tc) ** 2 / (2.0 * (hi - lo)) + np.maximum(lo - t_arr, 0.0)
        return out if np.ndim(t) else float(out[0])
    if isinstance(d, ZeroBiasDistribution):
        out = d._stop_loss(t_arr)
        return out if np.ndim(t) else float(out[0])
    vals, probs = d.atoms()
    if len(vals) and d.continuous_weight <= 1e-12:
        out = np.sum(probs[None, :] * np.maximum(vals[None, :] - t_arr[:, None], 0.0),
                     axis=1)
        return out if np.ndim(t) else float(out[0])
    if d.has_density:
        def one(tt):
            if tt >= d.support.hi:
                return 0.0
            lo = max(tt, d.support.lo)
            base = integrate(lambda y: (y - tt) * d.density(y),
                             Interval(lo, d.support.hi), rel_tol=rel_tol,
                             abs_tol=1e-14).value
            return base + sum(p * max(v - tt, 0.0) for v, p in zip(vals, probs))
        out = np.array([one(tt) for tt in t_arr])
        return out if np.ndim(t) else float(out[0])
    raise DistributionError(f"{d.family}: stop-loss needs atoms or a density")


class _GridInverseSampler:
    """Inverse-cdf sampler from a cached (x, cdf) table."""

    def __init__(self, xs, cdf):
        cdf = np.clip(cdf, 0.0, 1.0)
        keep = np.concatenate([[True], np.diff(cdf) > 1e-15])
        self.xs = xs[keep]
        self.cdf = cdf[keep]
        self.cdf[0], self.cdf[-1] = 0.0, 1.0

    def __call__(self, rng, size):
        return self.from_uniform(rng.uniform(size=size))

    def from_uniform(self, u):
        return np.interp(u, self.cdf, self.xs)


# ----------------------------------------------------------------- zero-bias

class ZeroBiasDistribution(Distribution):
    """The W-zero-biased law; always continuous."""

    family = "zero-bias"
    has_density = True
    has_cdf = True
    has_sampler = True
    has_closed_moments = False

    def __init__(self, base: Distribution, cdf_grid: int = 2048):
        mu = base.mean()
        if abs(mu) > 1e-9:
            raise NotCentered(f"zero-bias needs mean 0, got {mu:.3g}")
        var = base.var()
        if var <= 0:
            raise TransformError("zero-bias needs variance > 0")
        self.base = base
        self.sigma2 = var
        self.params = tuple(base.params)
        vals, probs = base.atoms()
        self._discrete = len(vals) > 0 and base.continuous_weight <= 1e-12
        if self._discrete:
            self._init_discrete(vals, probs)
        else:
            self._init_continuous(cdf_grid)

    # discrete base: density is a step function between consecutive atoms
    def _init_discrete(self, vals, probs):
        if len(vals) < 2:
            raise TransformError("degenerate discrete base")
        self.support = Interval(float(vals[0]), float(vals[-1]))
        # T(w) = sum_{v > w} v p_v, constant on [v_k, v_{k+1})
        tail = np.cumsum((vals * probs)[::-1])[::-1]  # tail[k] = sum_{i>=k} v p
        self._knots = vals
        self._levels = np.maximum(tail[1:], 0.0) / self.sigma2  # on [v_k, v_{k+1})
        seg = self._levels * np.diff(vals)
        self._seg_cum = np.concatenate([[0.0], np.cumsum(seg)])
        # guard against rounding: total mass must be 1
        if abs(self._seg_cum[-1] - 1.0) > 1e-9:
            raise TransformError(
                f"zero-bias mass {self._seg_cum[-1]:.12g} != 1 (base not centered?)")
        self._seg_cum /= self._seg_cum[-1]

    def _init_continuous(self, cdf_grid):
        base = self.base
        self.support = Interval(base.support.lo, base.support.hi)
        g_lo, g_hi = self._sampler_range()
        xs = self._composite_grid(g_lo, g_hi, cdf_grid)
        # Cumulative per-segment Gauss-Legendre for M = int y p and
        # S = int y^2 p, then the exact cdf identity
        #   F*(w) = (w T(w) + E[W^2 1(W <= w)]) / sigma^2.
        mids = 0.5 * (xs[1:] + xs[:-1])
        half = 0.5 * np.diff(xs)
        gl_x, gl_w = np.polynomial.legendre.leggauss(16)
        y = mids[:, None] + half[:, None] * gl_x[None, :]
        py = base.density(y)
        seg_m = half * np.sum(gl_w[None, :] * y * py, axis=1)
        seg_s = half * np.sum(gl_w[None, :] * y * y * py, axis=1)
        tail_m = self._upper_tail(g_hi, 1)
        tail_s = self._upper_tail(g_hi, 2)
        t_vals = tail_m + np.concatenate([np.cumsum(seg_m[::-1])[::-1], [0.0]])
        v2_upper = tail_s + np.concatenate([np.cumsum(seg_s[::-1])[::-1], [0.0]])
        cdf = (xs * t_vals + (self.sigma2 - v2_upper)) / self.sigma2
        cdf = np.maximum.accumulate(np.clip(cdf, 0.0, 1.0))
        self._cdf_xs = xs
        self._cdf_vals = cdf
        self._sampler = _GridInverseSampler(xs, cdf)
        # Fast density for inner-loop expectations: interpolated tail moment
        # (density() itself stays exact via per-point quadrature).
        self._t_interp = PchipInterpolator(xs, np.maximum(t_vals, 0.0),
                                           extrapolate=False)

    def _density_fast(self, x):
        vals = self._t_interp(np.asarray(x, dtype=float))
        return np.maximum(np.nan_to_num(vals, nan=0.0), 0.0) / self.sigma2

    def _sampler_range(self):
        """Range covering all but ~1e-9 of the zero-bias mass."""
        base = self.base
        eff = base.effective_interval(1e-9)
        g_lo, g_hi = eff.lo, eff.hi
        span = max(g_hi - g_lo, 1.0)
        if not base.support.hi_finite:
            while 1.0 - self._cdf_scalar(g_hi) > 1e-9 and g_hi < eff.hi + 1e12 * span:
                g_hi = eff.hi + 2.0 * (g_hi - eff.hi) if g_hi > eff.hi else eff.hi + span
        if not base.support.lo_finite:
            while self._cdf_scalar(g_lo) > 1e-9 and g_lo > eff.lo - 1e12 * span:
                g_lo = eff.lo + 2.0 * (g_lo - eff.lo) if g_lo < eff.lo else eff.lo - span
        return g_lo, g_hi

    def _composite_grid(self, g_lo, g_hi, n):
        """Quantile-graded bulk (dense where the base carries mass, with
        refinement toward the endpoints), geometrically stretched sections
        out to the (possibly far) sampler endpoints."""
        base = self.base
        eff = base.effective_interval(1e-6)
        lo_c = max(min(eff.lo, g_hi), g_lo)
        hi_c = min(max(eff.hi, g_lo), g_hi)
        if not lo_c < hi_c:
            lo_c, hi_c = g_lo, g_hi
        n_bulk = max(n // 2, 64)
        qs = np.linspace(1e-7, 1.0 - 1e-7, n_bulk)
        try:
            bulkq = np.array([base.quantile(q) for q in qs])
        except DistributionError:
            bulkq = np.empty(0)
        pieces = [np.linspace(lo_c, hi_c, max(n // 8, 64)),
                  bulkq[(bulkq >= lo_c) & (bulkq <= hi_c)]]
        span = hi_c - lo_c
        # refinement toward finite support edges, where the density of the
        # transformed law can rise steeply from zero
        for edge, sgn in ((g_lo, 1.0), (g_hi, -1.0)):
            if math.isfinite(edge) and abs(edge - (lo_c if sgn > 0 else hi_c)) < span:
                pieces.append(edge + sgn * span * np.geomspace(1e-9, 0.05, 48))
        step = span / n_bulk
        n_tail = max(n // 4, 64)
        if g_hi > hi_c + step:
            pieces.append(hi_c + step * np.geomspace(1.0, (g_hi - hi_c) / step,
                                                     n_tail))
        if g_lo < lo_c - step:
            pieces.append(lo_c - step * np.geomspace(1.0, (lo_c - g_lo) / step,
                                                     n_tail))
        grid = np.unique(np.concatenate(pieces))
        return np.clip(grid, g_lo, g_hi)

    def _upper_tail(self, w, power, abs_tol=1e-13):
        """integral_w^hi y^power p(y) dy.

        For an infinite upper limit the tail is computed under the
        substitution y = c/t, which keeps the quadrature accurate far out
        in the tail where the default infinite-interval transformation
        loses all significant mass."""
        base = self.base
        if w >= base.support.hi:
            return 0.0
        if base.support.hi_finite:
            return integrate(lambda y: y ** power * base.density(y),
                             Interval(w, base.support.hi), rel_tol=1e-9,
                             abs_tol=abs_tol).value
        c = max(w, 1.0)
        total = 0.0
        if w < c:
            total += integrate(lambda y: y ** power * base.density(y),
                               Interval(w, c), rel_tol=1e-9,
                               abs_tol=abs_tol).value

        def sub(t):
            y = c / t
            p = base.density(y)
            return 0.0 if p == 0.0 else y ** power * p * c / (t * t)

        total += integrate(sub, Interval(0.0, 1.0), rel_tol=1e-9,
                           abs_tol=abs_tol).value
        return total

    def _lower_int(self, w, power):
        """integral_lo^w y^power p(y) dy."""
        base = self.base
        if w <= base.support.lo:
            return 0.0
        return integrate(lambda y: y ** power * base.density(y),
                         Interval(base.support.lo, w), rel_tol=1e-9,
                         abs_tol=1e-13).value

    def _prefer_lower(self, w):
        """Integrate over the side of w carrying less probability mass:
        the moment integrals concentrate where the density does, and the
        short side is the one adaptive quadrature resolves reliably."""
        base = self.base
        if base.has_cdf:
            return float(base.cdf(w)) < 0.5
        return base.support.lo_finite and not base.support.hi_finite

    def _tail_moment(self, w):
        """integral_w^hi y p(y) dy for the (centered) base.

        Because the base is centered this integral equals the negative of
        the lower-side integral; the side is chosen by probability mass:
        on the longer side the signed integrand nearly cancels and the
        quadrature cannot resolve the tiny residual."""
        base = self.base
        if w <= base.support.lo or w >= base.support.hi:
            return 0.0
        if self._prefer_lower(w):
            return max(-self._lower_int(w, 1), 0.0)
        return max(self._upper_tail(w, 1), 0.0)

    def _cdf_scalar(self, w):
        """F*(w) = (w T(w) + E[W^2 1(W <= w)]) / sigma^2 (exact identity)."""
        base = self.base
        if w <= base.support.lo:
            return 0.0
        if w >= base.support.hi:
            return 1.0
        t = self._tail_moment(w)
        if self._prefer_lower(w):
            v2 = self._lower_int(w, 2)
        else:
            # absolute accuracy suffices: the tail is subtracted from sigma^2
            v2 = self.sigma2 - self._upper_tail(w, 2, abs_tol=1e-12 * self.sigma2)
        return min(max((w * t + v2) / self.sigma2, 0.0), 1.0)

    def density(self, x):
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        if self._discrete:
            idx = np.searchsorted(self._knots, x_arr, side="right") - 1
            inside = (idx >= 0) & (idx < len(self._levels))
            out = np.where(inside, self._levels[np.clip(idx, 0, len(self._levels) - 1)],
                           0.0)
        else:
            out = np.array([self._tail_moment(w) / self.sigma2 for w in x_arr])
        return out if np.ndim(x) else float(out[0])

    def cdf(self, x):
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        if self._discrete:
            idx = np.clip(np.searchsorted(self._knots, x_arr, side="right") - 1,
                          0, len(self._levels) - 1)
            base = self._seg_cum[idx]
            frac = self._levels[idx] * (np.clip(x_arr, self._knots[0],
                                                self._knots[-1]) - self._knots[idx])
            out = np.clip(base + frac, 0.0, 1.0)
            out = np.where(x_arr < self._knots[0], 0.0, out)
            out = np.where(x_arr >= self._knots[-1], 1.0, out)
        else:
            out = np.array([self._cdf_scalar(w) for w in x_arr])
        return out if np.ndim(x) else float(out[0])

    def mean(self):
        # E[W phi(W)] = sigma^2 E[phi'(W*)] with phi = x^2/2
        return self.base.expect(lambda x: x**3) / (2.0 * self.sigma2)

    def var(self):
        # second moment from phi = x^3/3
        m2 = self.base.expect(lambda x: x**4) / (3.0 * self.sigma2)
        return m2 - self.mean() ** 2

    def _stop_loss(self, t):
        """E[(W* - t)_+]; exact for a discrete base (step density), table
        accuracy (~1e-8 in the bulk) for a continuous one.

        Continuous path: E[(X - t)_+] = integral_t^hi (1 - F(y)) dy
        accumulated by the trapezoid rule on the cdf grid."""
        if self._discrete:
            t = np.asarray(t, dtype=float)
            out = np.zeros_like(t)
            for k in range(len(self._levels)):
                a, b = self._knots[k], self._knots[k + 1]
                seg = np.where(t >= b, 0.0,
                               np.where(t <= a,
                                        0.5 * (b * b - a * a) - t * (b - a),
                                        0.5 * (b - t) ** 2))
                out += self._levels[k] * seg
            return out
        if not hasattr(self, "_sl_table"):
            surv = 1.0 - self._cdf_vals
            steps = 0.5 * (surv[1:] + surv[:-1]) * np.diff(self._cdf_xs)
            tail = np.concatenate([np.cumsum(steps[::-1])[::-1], [0.0]])
            self._sl_table = tail
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self._cdf_xs, self._sl_table)
        below = t < self._cdf_xs[0]
        if np.any(below):
            mean = self._sl_table[0] + self._cdf_xs[0]  # E[W*] given P(W*>=lo)=1
            out = np.where(below, mean - t, out)
        return out

    def sample(self, rng, size):
        return self.from_uniform(rng.uniform(size=size))

    def from_uniform(self, u):
        """Inverse-cdf map of uniforms (shared for comonotone couplings)."""
        u = np.asarray(u, dtype=float)
        if self._discrete:
            idx = np.clip(np.searchsorted(self._seg_cum, u, side="right") - 1,
                          0, len(self._levels) - 1)
            offset = (u - self._seg_cum[idx]) / np.maximum(self._levels[idx], 1e-300)
            return self._knots[idx] + offset
        return self._sampler.from_uniform(u)

    def expect(self, f, rel_tol=1e-9, points=None):
        if self._discrete:
            # exact piecewise integration over the uniform segments
            total = 0.0
            for k in range(len(self._levels)):
                if self._levels[k] <= 0:
                    continue
                seg = Interval(self._knots[k], self._knots[k + 1])
                total += self._levels[k] * integrate(f, seg, rel_tol=rel_tol).value
            return total
        # Piecewise over quantile-spaced segments: the support can stretch
        # many decades into a heavy tail, where a single adaptive pass
        # cannot track an oscillatory integrand.  Per-segment error
        # estimates are accumulated against an overall budget; a segment
        # that misses its own tolerance is bisected geometrically first.
        qs = np.linspace(0.0, 1.0, 65)
        cuts = np.unique(np.interp(qs, self._cdf_vals, self._cdf_xs))
        if points is not None:
            extra = np.asarray(points, dtype=float)
            cuts = np.unique(np.concatenate(
                [cuts, extra[(extra > cuts[0]) & (extra < cuts[-1])]]))
        integrand = lambda x: f(x) * float(self._density_fast(x))
        total, err_total = 0.0, 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            wide = (b > 4 * a > 0) or (a < 4 * b < 0)
            if wide:
                # Segments spanning decades defeat a single adaptive pass
                # (the nodes never land on the near end, so mass is silently
                # lost and the error estimate is untrustworthy); integrate
                # on a geometric subgrid instead.
                lo_m, hi_m = sorted((abs(a), abs(b)))
                sgn = 1.0 if a > 0 else -1.0
                sub = np.sort(sgn * np.geomspace(lo_m, hi_m, 257))
                v, e = 0.0, 0.0
                for aa, bb in zip(sub[:-1], sub[1:]):
                    r = integrate_soft(integrand, Interval(float(aa), float(bb)),
                                       rel_tol=rel_tol, abs_tol=1e-10)
                    v += r.value
                    e += r.abs_error_estimate
                res = QuadResult(v, e, 0)
            else:
                res = integrate_soft(integrand, Interval(float(a), float(b)),
                                     rel_tol=rel_tol, abs_tol=1e-12)
            total += res.value
            err_total += res.abs_error_estimate
        if err_total > rel_tol * abs(total) + 1e-6:
            raise IntegrationError(
                f"zero-bias expectation error {err_total:.3g} above budget "
                f"for value {total:.6g}")
        return total


@dataclass
class ZeroBiasSpec:
    base: Distribution
    star: ZeroBiasDistribution

    @property
    def sigma2(self):
        return self.star.sigma2


def zero_bias(d: Distribution) -> ZeroBiasSpec:
    return ZeroBiasSpec(base=d, star=ZeroBiasDistribution(d))


def _inverse_transform(dist, u, rng):
    """F^{-1}(u) for one distribution, vectorized over the uniforms u.

    Falls back to an independent draw when no inverse-cdf route exists."""
    if hasattr(dist, "from_uniform"):
        return dist.from_uniform(u)
    vals, probs = dist.atoms()
    if len(vals) and dist.continuous_weight <= 1e-12:
        cum = np.cumsum(probs)
        idx = np.clip(np.searchsorted(cum, u, side="left"), 0, len(vals) - 1)
        return vals[idx]
    if dist.has_cdf:
        return np.array([dist.quantile(float(p)) for p in u])
    return dist.sample(rng, len(u))


class SumZeroBiasCoupling:
    """Joint coupling (W, W*) for a sum of independent mean-zero parts.

    W* is obtained by replacing the part X_I, with P(I = i) proportional
    to the part variance, by an independent draw from its zero-bias law.
    """

    def __init__(self, parts):
        if not parts:
            raise TransformError("need at least one part")
        self.parts = list(parts)
        self.part_specs = [zero_bias(p) for p in parts]
        variances = np.array([p.var() for p in parts])
        self.sigma2 = float(variances.sum())
        self.weights = variances / self.sigma2
        self.sum = None  # filled lazily via summed()

    def joint_sample(self, rng, size):
        """Draw (W, W_star, |W_star - W|) triples.

        The replaced part and its zero-biased replacement are coupled
        comonotonically (same uniform through both inverse cdfs), which
        minimises E|W_star - W| and matches the closed-form replacement
        cost for standardized Bernoulli parts."""
        n = len(self.parts)
        u = rng.uniform(size=(n, size))
        draws = np.stack([_inverse_transform(p, u[i], rng)
                          for i, p in enumerate(self.parts)])
        w = draws.sum(axis=0)
        idx = rng.choice(n, size=size, p=self.weights)
        stars = np.stack([_inverse_transform(s.star, u[i], rng)
                          for i, s in enumerate(self.part_specs)])
        cols = np.arange(size)
        w_star = w - draws[idx, cols] + stars[idx, cols]
        return w, w_star, np.abs(w_star - w)

    def mean_abs_gap(self, rng, n: int):
        """MC estimate of E|W* - W| with its standard error."""
        _, _, gap = self.joint_sample(rng, n)
        return float(gap.mean()), float(gap.std(ddof=1) / math.sqrt(n))


def zero_bias_sum(parts) -> SumZeroBiasCoupling:
    return SumZeroBiasCoupling(parts)


# --------------------------------------------------------------- equilibrium

class EquilibriumDistribution(Distribution):
    """The equilibrium law W^e of a nonnegative W with mean 1/lambda."""

    family = "equilibrium"
    has_density = True
    has_cdf = True
    has_sampler = True
    has_closed_moments = False

    def __init__(self, base: Distribution, cdf_grid: int = 2048):
        if base.support.lo < -1e-12:
            raise TransformError("equilibrium transform needs nonnegative support")
        mean = base.mean()
        if mean <= 0:
            raise TransformError("equilibrium transform needs mean > 0")
        self.base = base
        self.lam = 1.0 / mean
        self.params = tuple(base.params)
        hi = base.support.hi
        if not base.support.hi_finite:
            vals, probs = base.atoms()
            if len(vals) and base.continuous_weight <= 1e-12:
                hi = float(vals[-1])
            else:
                hi = base.effective_interval(1e-12).hi
        self.support = Interval(0.0, hi)
        xs = linear_grid(0.0, hi, cdf_grid)
        self._cdf_xs = xs
        self._cdf_vals = np.clip(self.cdf(xs), 0.0, 1.0)
        self._sampler = _GridInverseSampler(xs, self._cdf_vals)

    def survival(self, x):
        # lambda * integral_x^inf P(W > y) dy = lambda * E[(W - x)_+]
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        out = self.lam * np.asarray(stop_loss(self.base, np.maximum(x_arr, 0.0)))
        out = np.where(x_arr < 0, 1.0, np.clip(out, 0.0, 1.0))
        return out if np.ndim(x) else float(out[0])

    def cdf(self, x):
        return 1.0 - self.survival(x)

    def density(self, x):
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        out = self.lam * np.asarray(self.base.survival(x_arr))
        out = np.where((x_arr < 0) | (x_arr > self.support.hi), 0.0, out)
        return out if np.ndim(x) else float(out[0])

    def sample(self, rng, size):
        return self._sampler(rng, size)


@dataclass
class EquilibriumSpec:
    base: Distribution
    eq: EquilibriumDistribution

    @property
    def lam(self):
        return self.eq.lam


def equilibrium(d: Distribution) -> EquilibriumSpec:
    return EquilibriumSpec(base=d, eq=EquilibriumDistribution(d))


def equilibrium_identity_check(d: Distribution, battery, rel_tol=1e-9,
                               rng=None, n_mc: int = 10**6):
    """Residual E[phi(W)] - phi(0) - (1/lambda) E[phi'(W^e)] per battery member.

    battery: iterable of (name, phi, dphi).  Returns {name: residual}.
    """
    spec = equilibrium(d)
    out = {}
    for name, phi, dphi in battery:
        if d.has_density or len(d.atoms()[0]):
            lhs = d.expect(phi, rel_tol=rel_tol) - float(phi(np.array(0.0)))
        else:
            if rng is None:
                raise TransformError("sampler-only law needs an rng")
            lhs = d.mc_expect(phi, rng, n_mc)[0] - float(phi(np.array(0.0)))
        rhs = spec.eq.expect(dphi, rel_tol=rel_tol) / spec.lam
        out[name] = lhs - rhs
    return out
