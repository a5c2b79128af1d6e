import numpy as np
import pytest

from steinbounds.bayes import (PAIRS, BayesError, InvalidSummary,
                               UnknownPair, flat_prior_model,
                               posterior_bounds, summarize, update)
from steinbounds.exprfn import make_test_function
from steinbounds.numerics import Interval


def test_pairs_catalog():
    assert len(PAIRS) == 9
    assert "binomial-beta" in PAIRS and "uniform-pareto" in PAIRS


def test_unknown_pair():
    with pytest.raises(UnknownPair):
        update("nonesuch", {}, {})


def test_invalid_summaries():
    with pytest.raises(InvalidSummary):
        update("binomial-beta", {"alpha": 1.0, "beta": 1.0},
               {"n": 5, "x": 7})  # successes exceed trials
    with pytest.raises(InvalidSummary):
        update("binomial-beta", {"alpha": 1.0, "beta": 1.0}, {"n": 5})
    with pytest.raises(InvalidSummary):
        update("poisson-gamma", {"alpha": -1.0, "beta": 1.0},
               {"n": 3, "sum": 4.0})


def test_binomial_beta_display_case():
    m = update("binomial-beta", {"alpha": 1.0, "beta": 1.0},
               {"n": 10, "x": 3})
    assert m.posterior.family == "beta"
    assert m.posterior.params == (4.0, 8.0)
    g = make_test_function("x", Interval(0.0, 1.0))
    rep = posterior_bounds(m, g, n_mc=10**4, seed=0)
    # linear g makes the sandwich collapse to the posterior variance
    var = m.posterior.var()
    assert rep.lower == pytest.approx(var, rel=1e-12)
    assert rep.upper == pytest.approx(var, rel=1e-12)


def test_sequential_equals_pooled():
    first = update("binomial-beta", {"alpha": 1.0, "beta": 1.0},
                   {"n": 4, "x": 2})
    second = update("binomial-beta",
                    dict(zip(("alpha", "beta"), first.posterior.params)),
                    {"n": 6, "x": 1})
    pooled = update("binomial-beta", {"alpha": 1.0, "beta": 1.0},
                    {"n": 10, "x": 3})
    assert second.posterior.params == pooled.posterior.params


def test_summarize_matches_manual():
    data = [1.0, 2.0, 3.0]
    s = summarize("poisson-gamma", data)
    assert s == {"n": 3, "sum": 6.0}
    s = summarize("uniform-pareto", data)
    assert s == {"n": 3, "max": 3.0}
    s = summarize("gaussian-mean", data)
    assert s["n"] == 3 and s["mean"] == pytest.approx(2.0)


def test_flat_prior_scope():
    m = flat_prior_model("binomial-beta", {"n": 10, "x": 3})
    assert m.posterior.params == (4.0, 8.0)
    with pytest.raises(BayesError):
        flat_prior_model("poisson-gamma", {"n": 3, "sum": 4.0})
    with pytest.raises(UnknownPair):
        flat_prior_model("nonesuch", {})


def test_pareto_sign_note_attached():
    m = update("uniform-pareto", {"alpha": 3.0, "beta": 1.0},
               {"n": 5, "max": 2.0})
    assert "nonnegative form" in m.note


def test_lower_withheld_when_variance_undefined():
    # posterior Pareto shape n + alpha = 2 has no finite variance
    m = update("uniform-pareto", {"alpha": 1.0, "beta": 1.0},
               {"n": 1, "max": 2.0})
    # g with a decaying derivative keeps the upper integrable even though
    # the posterior has no finite variance
    g = make_test_function("x/(1+x^2)", m.posterior.effective_interval(1e-6))
    rep = posterior_bounds(m, g, n_mc=10**4, seed=0)
    assert rep.lower is None
    assert rep.upper is not None
    assert "lower_note" in rep.meta


def test_cross_check_diagnostics():
    m = update("poisson-gamma", {"alpha": 2.0, "beta": 1.0},
               {"n": 5, "sum": 11.0})
    g = make_test_function("x + x^2/8",
                           m.posterior.effective_interval(1e-9))
    rep = posterior_bounds(m, g, n_mc=10**4, seed=0)
    assert rep.diagnostics["cacoullos_upper"] == pytest.approx(rep.upper,
                                                               rel=1e-9)
    assert rep.diagnostics["cacoullos_lower"] == pytest.approx(rep.lower,
                                                               rel=1e-9)


def test_kernel_mean_is_posterior_variance():
    for pair, prior, summary in (
            ("gaussian-mean", {"mu": 0.0, "delta": 1.0, "sigma": 1.0},
             {"n": 4, "mean": 1.0}),
            ("gamma-gamma", {"alpha": 2.0, "beta": 1.0, "k": 1.5},
             {"n": 4, "sum": 7.0}),
            ("weibull-inverse-gamma", {"alpha": 3.0, "beta": 2.0, "k": 1.5},
             {"n": 5, "sum_pow": 6.0})):
        m = update(pair, prior, summary)
        e_tau = m.posterior.expect(lambda t: m.kernel(t), rel_tol=1e-9)
        assert e_tau == pytest.approx(m.posterior.var(), rel=1e-8)
