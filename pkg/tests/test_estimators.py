import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from temperedpareto.core import Pareto, Sample, TemperedParams, TemperedSampleSpec, sample_tempered
from temperedpareto.errors import DegenerateFitError, DomainError, NumericError
from temperedpareto.estimators import (
    FitResult,
    _wls_grid,
    default_tau_grid,
    extreme_quantile,
    fit_k,
    fit_mle_fixed_tau,
    fit_trace,
    fit_wls_fixed_tau,
    fit_wls_pareto,
    hill,
    kkt_residual,
    log_likelihood,
    pot_excesses,
    qq_delta,
    qq_scores,
    score,
    solve_truncated_alpha,
    ss_k,
    tail_prob,
    truncated_alpha,
    truncated_quantile,
    weissman_quantile,
    wls_objective,
    wls_lambda,
    wls_weights,
)


def pareto_sample(alpha, n, seed):
    return sample_tempered(TemperedSampleSpec(Pareto(alpha), 1.0, 1e-12, n, seed=seed))


def pw_sample(n=500, seed=0, index=None):
    return sample_tempered(TemperedSampleSpec(Pareto(1.0), 2.0, 0.2, n, seed=seed), index)


@pytest.fixture(scope="module")
def pw():
    return pw_sample(500, seed=3)


# --- POT view and Hill --------------------------------------------------------


def test_pot_excesses_example():
    p = pot_excesses(Sample([1, 2, 4, 8]), 2)
    assert p.threshold == 2.0
    assert p.v.tolist() == [4.0, 2.0]
    assert pot_excesses(Sample([1, 2, 4, 8]), 3).threshold == 1.0


def test_pot_excesses_scale_free():
    s = Sample([1.5, 2.0, 7.0, 9.5, 30.0])
    np.testing.assert_array_equal(pot_excesses(s, 3).v, pot_excesses(s.scaled(1024.0), 3).v)
    np.testing.assert_allclose(pot_excesses(s, 3).v, pot_excesses(s.scaled(1000.0), 3).v, rtol=1e-15)


@pytest.mark.parametrize("k", [0, 4, 2.0])
def test_pot_excesses_bad_rank(k):
    with pytest.raises(DomainError):
        pot_excesses(Sample([1, 2, 4, 8]), k)


def test_hill_examples():
    s = Sample(np.exp([0.0, 1.0, 2.0, 3.0]))
    assert hill(s, 2) == pytest.approx(1.5, rel=1e-15)
    assert hill(Sample([1.0, 2.0, 2.0, 2.0]), 2) == 0.0
    assert hill(s.scaled(7.0), 2) == pytest.approx(1.5, rel=1e-14)


# --- WLS ----------------------------------------------------------------------


def test_qq_scores_and_weights():
    q = qq_scores(4)
    np.testing.assert_allclose(q, np.log(5.0 / np.array([4, 3, 2, 1])))
    np.testing.assert_allclose(wls_weights(4), 1.0 / q)
    np.testing.assert_array_equal(wls_weights(4, "uniform"), np.ones(4))
    with pytest.raises(DomainError):
        wls_weights(4, "nope")


def perfect_view(alpha, k):
    # log V of the j-th smallest excess equals q_j / alpha
    lv = qq_scores(k)[::-1] / alpha
    return pot_excesses(Sample(np.exp(np.append(lv, 0.0))), k)


def test_wls_objective_perfect_data_is_zero():
    p = perfect_view(1.7, 25)
    assert wls_objective(p, 1.7, 0.0, 1.3) == pytest.approx(0.0, abs=1e-25)


def test_wls_objective_single_term():
    p = pot_excesses(Sample([1.0, 3.0]), 1)
    q = math.log(2.0)
    expected = (1 / q) * (q / 2.0 - math.log(3.0) - 0.5 * (3.0**1.5 - 1) / 1.5) ** 2
    assert wls_objective(p, 2.0, 0.5, 1.5) == pytest.approx(expected, rel=1e-14)


def test_wls_objective_domain():
    p = perfect_view(1.0, 5)
    with pytest.raises(DomainError):
        wls_objective(p, 0.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        wls_objective(p, 1.0, -1.0, 1.0)


def test_wls_pareto_minimiser_closed_form():
    s = pareto_sample(2.0, 400, 1)
    for k in (20, 100, 399):
        p = pot_excesses(s, k)
        a = fit_wls_pareto(p)
        res = optimize.minimize_scalar(lambda g: wls_objective(p, 1 / g, 0.0, 1.0), bounds=(1e-3, 10), method="bounded",
                                       options={"xatol": 1e-12})
        assert a == pytest.approx(1 / res.x, rel=1e-8)
        q = qq_scores(k)
        assert a * hill(s, k) == pytest.approx(q.sum() / k, rel=1e-12)


def test_wls_pareto_tends_to_hill():
    # the Hill-weighted delta=0 fit and 1/H differ by sum(q)/k = 1 + O(log k / k)
    s = pareto_sample(1.5, 20001, 2)
    k = 20000
    p = pot_excesses(s, k)
    assert fit_wls_pareto(p) * hill(s, k) == pytest.approx(1.0, abs=5e-4)


def test_wls_strict_pareto_recovery():
    s = pareto_sample(2.0, 10**4, 4)
    p = pot_excesses(s, 5000)
    a, d, _ = fit_wls_fixed_tau(p, 1.0)
    assert a == pytest.approx(2.0, abs=0.1)
    assert d == pytest.approx(0.0, abs=0.1)


def test_wls_grid_noise_free_linear_model():
    rng = np.random.default_rng(0)
    lv = np.sort(rng.uniform(0.01, 2.0, 40))
    a0, d0, tau = 0.6, 0.8, 1.4
    q = (lv + d0 * np.expm1(tau * lv) / tau) / a0
    a, d, obj, ok = _wls_grid(lv, np.array([tau]), 1.0 / q, q)
    assert ok[0]
    assert a[0] == pytest.approx(a0, rel=1e-9)
    assert d[0] == pytest.approx(d0, rel=1e-9)
    assert obj[0] == pytest.approx(0.0, abs=1e-18)


def test_wls_minimal_k():
    p = pot_excesses(Sample([1.0, 1.3, 2.2, 5.0]), 3)
    a, d, obj = fit_wls_fixed_tau(p, 1.0)
    assert all(math.isfinite(v) for v in (a, d, obj))
    assert a > 0 and d >= 0


def test_wls_degenerate():
    p = pot_excesses(Sample([1.0, 2.0, 2.0, 2.0, 2.0]), 3)
    with pytest.raises(DegenerateFitError):
        fit_wls_fixed_tau(p, 1.0)


def test_wls_constrained_minimum_beats_grid(pw):
    p = pot_excesses(pw, 200)
    a, d, obj = fit_wls_fixed_tau(p, 0.8)
    assert obj == pytest.approx(wls_objective(p, a, d, 0.8), rel=1e-10)
    for da in (0.98, 1.02):
        for dd in (0.0, 0.5 * d, 1.5 * d + 1e-3):
            assert wls_objective(p, a * da, dd, 0.8) >= obj


# --- likelihood ----------------------------------------------------------------


def test_loglik_pareto_reduction(pw):
    p = pot_excesses(pw, 100)
    lv = np.log(p.v)
    assert log_likelihood(p, 1.3, 0.0, 2.0) == pytest.approx(100 * math.log(1.3) - 2.3 * lv.sum(), rel=1e-13)


def test_loglik_unit_excesses():
    p = pot_excesses(Sample([2.0, 2.0, 2.0, 2.0]), 3)
    assert log_likelihood(p, 1.5, 0.7, 2.0) == pytest.approx(3 * math.log(1.5 + 1.4), rel=1e-14)


def test_loglik_domain(pw):
    p = pot_excesses(pw, 50)
    with pytest.raises(DomainError):
        log_likelihood(p, math.nan, 0.1, 1.0)
    with pytest.raises(DomainError):
        log_likelihood(p, 1.0, -0.1, 1.0)


def test_score_matches_finite_differences(pw):
    p = pot_excesses(pw, 150)
    a, lam, tau = 1.1, 0.4, 1.7
    k = p.k
    h = 1e-6
    g = [
        (log_likelihood(p, a + h, lam, tau) - log_likelihood(p, a - h, lam, tau)) / (2 * h),
        (log_likelihood(p, a, lam + h, tau) - log_likelihood(p, a, lam - h, tau)) / (2 * h),
        (log_likelihood(p, a, lam, tau + h) - log_likelihood(p, a, lam, tau - h)) / (2 * h),
    ]
    sc = score(p, a, lam, tau) * k
    # score rows are dlogL/dalpha, dlogL/dlam / tau, dlogL/dtau / lam
    assert sc[0] == pytest.approx(g[0], rel=1e-5)
    assert sc[1] * tau == pytest.approx(g[1], rel=1e-5)
    assert sc[2] * lam == pytest.approx(g[2], rel=1e-5)


def test_mle_fixed_tau_satisfies_score(pw):
    p = pot_excesses(pw, 300)
    for tau in (0.5, 1.0, 2.0, 4.0):
        a0, d0, _ = fit_wls_fixed_tau(p, tau)
        a, lam, ll, conv = fit_mle_fixed_tau(p, tau, (a0, wls_lambda(a0, d0, tau)))
        assert conv
        assert np.all(kkt_residual(p, a, lam, tau) < 1e-5)
        assert ll == pytest.approx(log_likelihood(p, a, lam, tau), rel=1e-12)


def test_mle_strict_pareto_hits_lambda_zero():
    s = pareto_sample(2.0, 5000, 9)
    p = pot_excesses(s, 2000)
    a, lam, _, conv = fit_mle_fixed_tau(p, 1.5, (2.0, 0.1))
    assert conv
    if lam == 0.0:
        assert a == pytest.approx(1.0 / hill(s, 2000), rel=1e-12)
    else:
        assert lam < 0.05
        assert a == pytest.approx(1.0 / hill(s, 2000), rel=0.05)


def test_mle_idempotent(pw):
    p = pot_excesses(pw, 250)
    a, lam, ll, _ = fit_mle_fixed_tau(p, 1.2, (1.0, 1.0))
    a2, lam2, ll2, _ = fit_mle_fixed_tau(p, 1.2, (a, lam))
    assert a2 == pytest.approx(a, rel=1e-8, abs=1e-12)
    assert lam2 == pytest.approx(lam, rel=1e-8, abs=1e-12)
    assert ll2 == pytest.approx(ll, rel=1e-14)


def test_mle_simplex_agrees_with_newton(pw):
    p = pot_excesses(pw, 200)
    for tau in (0.7, 1.5, 3.0):
        a0, d0, _ = fit_wls_fixed_tau(p, tau)
        newton = fit_mle_fixed_tau(p, tau, (a0, wls_lambda(a0, d0, tau)))
        simplex = fit_mle_fixed_tau(p, tau, (a0, wls_lambda(a0, d0, tau)), optimizer="simplex")
        # newton stops at the alpha floor 1e-8, the simplex may go below it
        assert simplex[2] == pytest.approx(newton[2], abs=1e-6)


def test_mle_bad_optimizer(pw):
    with pytest.raises(DomainError):
        fit_mle_fixed_tau(pot_excesses(pw, 50), 1.0, (1.0, 1.0), optimizer="bfgs")


# --- fit_k and SS_k -----------------------------------------------------------


def test_fit_k_singleton_grid(pw):
    p = pot_excesses(pw, 120)
    wls, mle = fit_k(p, [1.3])
    a, d, obj = fit_wls_fixed_tau(p, 1.3)
    assert wls.alpha == pytest.approx(a, rel=1e-14) and wls.objective == pytest.approx(obj, rel=1e-14)
    assert wls.lam == pytest.approx(a * d / 1.3, rel=1e-14)
    am, lm, ll, _ = fit_mle_fixed_tau(p, 1.3, (a, wls_lambda(a, d, 1.3)))
    assert mle.alpha == pytest.approx(am, rel=1e-14) and mle.objective == pytest.approx(ll, rel=1e-14)
    assert wls.tau == mle.tau == 1.3


def test_fit_k_argmin_argmax(pw):
    p = pot_excesses(pw, 300)
    grid = default_tau_grid()
    wls, mle = fit_k(p, grid)
    for tau in grid:
        a, d, obj = fit_wls_fixed_tau(p, tau)
        assert wls.objective <= obj * (1 + 1e-12)
        am, lm, ll, _ = fit_mle_fixed_tau(p, tau, (a, wls_lambda(a, d, tau)))
        assert mle.objective >= ll - 1e-9 * abs(ll)
    assert mle.objective >= log_likelihood(p, wls.alpha, wls.lam, wls.tau)
    assert wls.params.beta_inf == pytest.approx(wls.lam ** (1 / wls.tau) if wls.lam else 0.0)


def test_fit_k_bad_grid(pw):
    with pytest.raises(DomainError):
        fit_k(pot_excesses(pw, 50), [])
    with pytest.raises(DomainError):
        fit_k(pot_excesses(pw, 50), [1.0, -1.0])


def test_ss_k_identity(pw):
    p = pot_excesses(pw, 80)
    wls, _ = fit_k(p)
    assert ss_k(p, wls) == pytest.approx(wls_objective(p, wls.alpha, qq_delta(wls.params), wls.tau), rel=1e-13)
    assert ss_k(p, wls) >= 0
    with pytest.raises(DomainError):
        ss_k(pot_excesses(pw, 81), wls)


def test_ss_k_perfect_data_zero():
    p = perfect_view(2.0, 30)
    fit = FitResult(TemperedParams(2.0, 0.0, 1.0), "WLS", 30, 0.0, 0)
    assert ss_k(p, fit) == pytest.approx(0.0, abs=1e-25)


def test_fit_k_pareto_weibull_average():
    spec = TemperedSampleSpec(Pareto(1.0), 2.0, 0.2, 500, seed=77)
    est = [fit_k(pot_excesses(sample_tempered(spec, r), 300))[1].alpha for r in range(200)]
    assert 0.7 <= np.mean(est) <= 1.3


# --- trace ----------------------------------------------------------------------


@pytest.fixture(scope="module")
def trace(pw):
    return fit_trace(pw, k_min=10, k_max=499)


def test_trace_k_hat_is_argmin(trace):
    assert trace.ss[trace.k_hat - trace.k[0]] == trace.ss.min()
    first = int(trace.k[np.flatnonzero(trace.ss == trace.ss.min())[0]])
    assert trace.k_hat == first
    assert np.all(np.diff(trace.k) == 1)


def test_trace_records_consistent(trace, pw):
    rec = trace.record(200)
    p = pot_excesses(pw, 200)
    wls, mle = fit_k(p)
    for got, ref in ((rec.wls, wls), (rec.mle, mle)):
        np.testing.assert_allclose(got.params.as_array(), ref.params.as_array(), rtol=1e-10, atol=1e-14)
        assert got.objective == pytest.approx(ref.objective, rel=1e-10)
        assert got.tau_grid_index == ref.tau_grid_index
    assert rec.hill == pytest.approx(hill(pw, 200), rel=1e-12)
    assert rec.ss_k == pytest.approx(ss_k(p, wls), rel=1e-12)
    assert len(list(trace)) == len(trace) == 490


def test_trace_likelihood_dominance(trace, pw):
    for k in (20, 150, 400):
        p = pot_excesses(pw, k)
        w = trace.wls_fit(k)
        assert trace.mle_fit(k).objective >= log_likelihood(p, w.alpha, w.lam, w.tau)


def test_trace_scale_and_permutation(pw):
    base = fit_trace(pw, k_min=10, k_max=120)
    rng = np.random.default_rng(5)
    shuffled = Sample(rng.permutation(pw.values) * 1e6)
    other = fit_trace(shuffled, k_min=10, k_max=120)
    for col in base.PARAM_COLUMNS:
        np.testing.assert_allclose(getattr(other, col), getattr(base, col), rtol=1e-8, equal_nan=True)
    assert other.k_hat == base.k_hat


def test_trace_range_errors(pw):
    with pytest.raises(DomainError):
        fit_trace(pw, k_min=2)
    with pytest.raises(DomainError):
        fit_trace(pw, k_min=50, k_max=40)
    with pytest.raises(DomainError):
        fit_trace(pw, k_max=500)


def test_trace_uniform_weights(pw):
    tr = fit_trace(pw, k_min=10, k_max=60, weights="uniform")
    p = pot_excesses(pw, 30)
    w = tr.wls_fit(30)
    assert tr.ss[20] == pytest.approx(wls_objective(p, w.alpha, qq_delta(w.params), w.tau, "hill"), rel=1e-10)


# --- tail probability and quantiles ----------------------------------------------


def test_tail_prob_boundary_and_reduction(trace, pw):
    k = 100
    fit = trace.mle_fit(k)
    t = pw.descending()[k]
    assert tail_prob(fit, pw, k, t) == pytest.approx(101 / 501, rel=1e-15)
    par = FitResult(TemperedParams(1.4, 0.0, 2.0), "MLE", k, 0.0, 0)
    assert tail_prob(par, pw, k, 3 * t) == pytest.approx(101 / 501 * 3 ** -1.4, rel=1e-14)
    with pytest.raises(DomainError):
        tail_prob(fit, pw, k, 0.5 * t)


def test_quantile_boundary_and_weissman_reduction(pw):
    k = 100
    t = pw.descending()[k]
    fit = FitResult(TemperedParams(1.4, 0.3, 2.0), "MLE", k, 0.0, 0)
    assert extreme_quantile(fit, pw, k, 101 / 501) == pytest.approx(t, rel=1e-15)
    par = FitResult(TemperedParams(1.4, 0.0, 2.0), "MLE", k, 0.0, 0)
    p = 1e-4
    assert extreme_quantile(par, pw, k, p) == pytest.approx(t * (101 / (501 * p)) ** (1 / 1.4), rel=1e-12)
    with pytest.raises(DomainError):
        extreme_quantile(fit, pw, k, 0.5)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.0, 5.0), st.floats(0.1, 5.0), st.floats(-12, -0.8), st.integers(10, 499))
def test_quantile_roundtrip(a, lam, tau, logp, k):
    s = _fixture_sample()
    fit = FitResult(TemperedParams(a, lam, tau), "MLE", k, 0.0, 0)
    p = min(10**logp, (k + 1) / (s.n + 1))
    z = extreme_quantile(fit, s, k, p)
    assert tail_prob(fit, s, k, z) == pytest.approx(p, rel=1e-8)


_CACHE = {}


def _fixture_sample():
    if "s" not in _CACHE:
        _CACHE["s"] = pw_sample(500, seed=3)
    return _CACHE["s"]


def test_quantile_monotone(trace, pw):
    fit = trace.mle_fit(200)
    ps = np.geomspace(1e-6, 0.3, 40)
    z = [extreme_quantile(fit, pw, 200, p) for p in ps]
    assert np.all(np.diff(z) < 0)
    zs = np.linspace(pw.descending()[200], 50, 40)
    tp = [tail_prob(fit, pw, 200, x) for x in zs]
    assert np.all(np.diff(tp) < 0)


def test_weissman_examples():
    s = Sample(np.arange(1.0, 101.0))
    k = 20
    t = s.descending()[k]
    assert weissman_quantile(s, k, k / s.n) == pytest.approx(t, rel=1e-15)
    # choose data with H = 1: top values t*e^(j-ish); build directly
    lv = np.full(4, 1.0)
    s2 = Sample(np.append(np.exp(lv), [1.0, 0.5]))
    assert hill(s2, 4) == pytest.approx(1.0)
    assert weissman_quantile(s2, 4, 4 / (6 * 4)) == pytest.approx(4.0 * s2.descending()[4], rel=1e-12)
    with pytest.raises(DegenerateFitError):
        weissman_quantile(Sample([1.0, 2.0, 2.0, 2.0]), 2, 0.1)


def test_weissman_vs_pareto_fit(pw):
    # identical except for the k/n vs (k+1)/(n+1) convention
    k, p = 150, 1e-3
    h = hill(pw, k)
    par = FitResult(TemperedParams(1 / h, 0.0, 1.0), "MLE", k, 0.0, 0)
    ratio = extreme_quantile(par, pw, k, p) / weissman_quantile(pw, k, p)
    assert ratio == pytest.approx(((k + 1) * pw.n / ((pw.n + 1) * k)) ** h, rel=1e-12)


# --- truncated Pareto ---------------------------------------------------------------


def _rhs(a, R):
    return 1 / a + R**a * math.log(R) / (1 - R**a)


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-6, 0.999), st.floats(0.01, 0.99))
def test_truncated_alpha_residual(R, frac):
    H = frac * (-math.log(R) / 2)
    a = solve_truncated_alpha(H, R)
    assert abs(_rhs(a, R) - H) < 1e-10


def test_truncated_alpha_limits_and_oracle():
    H = 0.7
    assert solve_truncated_alpha(H, 1e-300) == pytest.approx(1 / H, abs=1e-6)
    # (H, R) = (0.5, 0.5) has no positive root since H > -log(0.5)/2
    with pytest.raises(NumericError):
        solve_truncated_alpha(0.5, 0.5)
    a = solve_truncated_alpha(0.3, 0.5)
    lo, hi = 1e-6, 100.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _rhs(mid, 0.5) > 0.3:
            lo = mid
        else:
            hi = mid
    assert a == pytest.approx(0.5 * (lo + hi), rel=1e-12)


def test_truncated_alpha_errors():
    with pytest.raises(DegenerateFitError):
        solve_truncated_alpha(0.5, 1.0)
    with pytest.raises(NumericError):
        solve_truncated_alpha(0.5, 0.9)  # H above -log(R)/2
    with pytest.raises(DegenerateFitError):
        truncated_alpha(Sample([1.0, 2.0, 3.0, 3.0, 3.0]), 2)


def test_truncated_quantile_bounded_by_max(pw):
    k = 200
    z = truncated_quantile(pw, k, 1e-6)
    assert z <= pw.values[-1] * (1 + 1e-12)
    a = truncated_alpha(pw, k)
    assert truncated_quantile(pw, k, k / pw.n, a) == pytest.approx(pw.descending()[k], rel=1e-12)
