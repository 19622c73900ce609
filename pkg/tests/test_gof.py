import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from jmppc.gof import (Curve, GofError, LoessConfig, LongSample, concordance_at, concordance_over_time, concordance_series,
                       ecdf, ecdf_at, ipcw_weights, kaplan_meier, last_values, loess_fit,
                       longitudinal_ecdf_check, mean_function_check, mise, pit_check, pit_values,
                       semivariogram_check, semivariogram_pairs, standardized_abs_residuals,
                       survival_ecdf_check, uniform_grid, variance_function_check)


def direct_wls(x, y, x0, q, degree):
    """Independent local regression at one point: weighted least squares in numpy."""
    d = np.abs(x - x0)
    h = np.sort(d)[q - 1]
    w = np.clip(1 - (d / h) ** 3, 0, None) ** 3
    w = np.where(d < h, w, 0.0)
    X = np.vander(x - x0, degree + 1, increasing=True)
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    return coef[0]


# ------------------------------------------------------------------ eCDF and MISE

def test_ecdf_counting():
    assert ecdf([1, 2, 3])(2.0) == pytest.approx(2 / 3)
    c = ecdf([4.0, 4.0])
    assert c(3.999) == 0.0 and c(4.0) == 1.0
    with pytest.raises(GofError):
        ecdf([])


def test_ecdf_uniform_sample():
    u = np.random.default_rng(0).uniform(size=10_000)
    g = np.linspace(0, 1, 501)
    assert np.max(np.abs(ecdf_at(u, g) - g)) < 0.03


def test_mise_closed_forms():
    g = uniform_grid(0.0, 4.0)
    obs = Curve(g, np.sin(g), "x")
    same = Curve(g, np.sin(g), "x")
    shifted = Curve(g, np.sin(g) + 0.5, "x")
    assert mise(obs, [same], (0.0, 4.0)) == 0.0
    assert mise(obs, [shifted], (0.0, 4.0)) == pytest.approx(0.25 * 4.0, abs=1e-12)
    assert mise(obs, [shifted, same], (0.0, 4.0)) == pytest.approx(0.25 * 4.0 / 2, abs=1e-12)
    with pytest.raises(GofError):
        mise(obs, [], (0.0, 4.0))


@given(st.floats(-3, 3), st.floats(0.5, 10))
def test_mise_constant_offset_property(d, L):
    g = uniform_grid(0.0, L)
    base = Curve(g, np.cos(g), "x")
    off = Curve(g, np.cos(g) + d, "x")
    assert mise(base, [off], (0.0, L)) == pytest.approx(d * d * L, rel=1e-10, abs=1e-12)


# ------------------------------------------------------------------ loess

@pytest.mark.parametrize("degree", [1, 2])
def test_loess_matches_direct_wls_on_five_points(degree):
    x = np.array([0.0, 0.7, 1.1, 2.5, 4.0])
    y = np.array([1.0, -0.3, 2.2, 0.4, 1.7])
    fit = loess_fit(x, y, LoessConfig(span=1.0, degree=degree))
    targets = np.array([0.0, 0.35, 1.1, 2.0, 3.3, 4.0])
    ours = fit.predict(targets)
    ref = [direct_wls(x, y, t, 5, degree) for t in targets]
    assert np.max(np.abs(ours - ref)) < 1e-9


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=8, max_size=40, unique=True),
       st.floats(0.3, 1.0), st.floats(-5, 5), st.floats(-2, 2))
def test_loess_reproduces_lines(xs, span, a, b):
    x = np.array(xs)
    y = a + b * x
    fit = loess_fit(x, y, LoessConfig(span=span, degree=1))
    assert np.max(np.abs(fit.fitted - y)) < 1e-8 * (1 + abs(a) + 10 * abs(b))


def test_loess_constant_and_df():
    x = np.linspace(0, 1, 30)
    fit = loess_fit(x, np.full(30, 2.5))
    assert np.allclose(fit.fitted, 2.5)
    assert fit.df >= 1
    # df of the smoother equals the trace of the explicit smoother matrix
    L = np.column_stack([loess_fit(x, np.eye(30)[j]).fitted for j in range(30)])
    assert fit.df == pytest.approx(np.trace(L), rel=1e-10)


def test_loess_validation():
    with pytest.raises(GofError):
        LoessConfig(span=0.0)
    with pytest.raises(GofError):
        loess_fit([1.0, 1.0, 1.0, 1.0], [1, 2, 3, 4])
    with pytest.raises(GofError):
        loess_fit([0.0, 1.0], [1.0, 2.0])


def test_fallback_kernel_agrees_with_compiled():
    from jmppc import _fallback, kernels
    rng = np.random.default_rng(5)
    x = np.sort(rng.uniform(0, 10, 300))
    y = np.sin(x) + rng.normal(0, 0.2, 300)
    rw = np.ones(300)
    xe = np.linspace(-1, 11, 57)
    for degree in (1, 2):
        f1, h1 = kernels.loess_kernel(x, y, rw, x, 200, degree, True)
        f2, h2 = _fallback.loess_kernel(x, y, rw, x, 200, degree, True)
        assert np.allclose(f1, f2, atol=1e-10) and np.allclose(h1, h2, atol=1e-10)
        g1, _ = kernels.loess_kernel(x, y, rw, xe, 120, degree, False)
        g2, _ = _fallback.loess_kernel(x, y, rw, xe, 120, degree, False)
        assert np.allclose(g1, g2, atol=1e-10)
    m = rng.normal(size=80)
    t = rng.exponential(size=80)
    s = rng.integers(0, 2, 80)
    w = rng.uniform(0.5, 2, 80)
    a = kernels.concordance_kernel(m, t, s.astype(np.int64), w, 1.5)
    b = _fallback.concordance_kernel(m, t, s, w, 1.5)
    assert np.allclose(a, b, rtol=1e-12)


# ------------------------------------------------------------------ longitudinal checks

def sample_from(rng, n=60, k=6, sd=lambda t: 1.0, mean=lambda t: 0.0):
    subj = np.repeat(np.arange(n), k)
    t = np.tile(np.linspace(0, 20, k), n) + rng.uniform(0, 1, n * k)
    y = mean(t) + rng.normal(size=t.size) * sd(t)
    return LongSample(subj, t, y)


def test_mean_check_identical_replicates_zero():
    s = sample_from(np.random.default_rng(1))
    r = mean_function_check(s, [s, s])
    assert r.mise == 0.0
    assert longitudinal_ecdf_check(s, [s]).mise == 0.0
    assert variance_function_check(s, [s]).mise == 0.0


def test_mean_check_subject_scope_validation():
    s = LongSample([0, 0, 0, 1, 1, 1, 1], [0, 1, 2, 0, 1, 2, 3], [1, 2, 3, 1, 2, 3, 4.0])
    with pytest.raises(GofError):
        mean_function_check(s, [s], scope=0)
    assert mean_function_check(s, [s], LoessConfig(span=1.0), scope=1).mise == 0.0


def test_mean_check_flags_wrong_trend():
    rng = np.random.default_rng(2)
    obs = sample_from(rng, mean=lambda t: 0.02 * (t - 10) ** 2)
    good = [sample_from(rng, mean=lambda t: 0.02 * (t - 10) ** 2) for _ in range(5)]
    bad = [sample_from(rng, mean=lambda t: 0.5 + 0.0 * t) for _ in range(5)]
    assert mean_function_check(obs, bad).mise > 10 * mean_function_check(obs, good).mise


def test_standardized_residual_level():
    s = sample_from(np.random.default_rng(3), n=400, k=8)
    rb, _, sigma = standardized_abs_residuals(s, LoessConfig())
    level, _ = integrate.quad(lambda z: math.sqrt(abs(z)) * math.exp(-z * z / 2) / math.sqrt(2 * math.pi),
                              -np.inf, np.inf)
    assert level == pytest.approx(0.8222, abs=1e-3)
    curve = loess_fit(s.times, rb).predict(np.linspace(1, 19, 10))
    assert np.max(np.abs(curve - level)) < 0.05
    assert sigma == pytest.approx(1.0, abs=0.05)


def test_variance_check_detects_heteroscedasticity():
    rng = np.random.default_rng(4)
    sd = lambda t: np.where(t > 12, 2.0, 1.0)
    obs = sample_from(rng, n=200, sd=sd)
    flat = [sample_from(rng, n=200) for _ in range(4)]
    same = [sample_from(rng, n=200, sd=sd) for _ in range(4)]
    r_flat = variance_function_check(obs, flat)
    r_same = variance_function_check(obs, same)
    g = np.linspace(14, 20, 5)
    assert np.all(r_flat.observed_curve(g) > r_flat.observed_curve(np.array([3.0])))
    assert r_flat.mise > 3 * r_same.mise


def test_semivariogram_hand_arithmetic():
    u, d = semivariogram_pairs([7, 7, 7], [0.0, 1.0, 3.0], [0.5, -0.5, 1.5])
    got = sorted(zip(u.tolist(), d.tolist()))
    assert got == [(1.0, 0.5), (2.0, 2.0), (3.0, 0.5)]


def test_semivariogram_groups_subjects_of_different_sizes():
    subj = [0, 0, 1, 1, 1, 2]
    t = [0.0, 2.0, 0.0, 1.0, 4.0, 9.0]
    r = [1.0, 3.0, 0.0, 1.0, 1.0, 5.0]
    u, d = semivariogram_pairs(subj, t, r)
    assert sorted(zip(u.tolist(), d.tolist())) == [(1.0, 0.5), (2.0, 2.0), (3.0, 0.0), (4.0, 0.5)]
    with pytest.raises(GofError):
        semivariogram_pairs([0, 1, 2], [0.0, 1.0, 2.0], [1.0, 2.0, 3.0])


def test_semivariogram_flat_for_independent_residuals():
    s = sample_from(np.random.default_rng(6), n=300, k=6, sd=lambda t: 0.5)
    r = semivariogram_check(s, [s])
    g = uniform_grid(*r.range)[20:-20]
    assert np.max(np.abs(r.observed_curve(g) - 0.25)) < 0.04
    assert r.mise == 0.0


# ------------------------------------------------------------------ survival

def test_kaplan_meier_hand_cases():
    km = kaplan_meier([1, 2, 3, 4], [1, 1, 1, 1])
    assert km.cdf_curve()(2.5) == pytest.approx(0.5)
    km = kaplan_meier([1.0, 2.0, 3.0], [1, 0, 1])
    assert km.S(1.5) == pytest.approx(2 / 3)
    assert km.S(3.0) == 0.0
    assert km.n_risk.tolist() == [3.0, 1.0]
    none = kaplan_meier([1.0, 2.0], [0, 0])
    assert none.S(np.array([0.5, 5.0])).tolist() == [1.0, 1.0]


def test_kaplan_meier_greenwood():
    t = np.array([1, 2, 2, 3, 4, 5, 6, 7.0])
    d = np.array([1, 1, 0, 1, 0, 1, 1, 0])
    km = kaplan_meier(t, d)
    # risk sets: 8 at t=1, 7 at 2, 5 at 3, 3 at 5, 2 at 6
    gw = np.cumsum([1 / (8 * 7), 1 / (7 * 6), 1 / (5 * 4), 1 / (3 * 2), 1 / (2 * 1)])
    assert np.allclose(km.greenwood, gw)
    surv = np.cumprod([7 / 8, 6 / 7, 4 / 5, 2 / 3, 1 / 2])
    assert np.allclose(km.survival, surv)
    assert np.allclose(km.lower, surv * np.exp(-1.959963984540054 * np.sqrt(gw)))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.1, 50), min_size=2, max_size=40))
def test_uncensored_km_is_ecdf(ts):
    t = np.array(ts)
    km = kaplan_meier(t, np.ones(t.size))
    g = np.linspace(0, 51, 101)
    assert np.allclose(km.cdf_curve()(g), ecdf_at(t, g), atol=1e-12)


def test_survival_check_resampling_oracle():
    rng = np.random.default_rng(7)
    T = rng.weibull(2.0, 300) * 10
    C = rng.uniform(0, 20, 300)
    obs_t, obs_d = np.minimum(T, C), (T <= C).astype(int)
    km = kaplan_meier(obs_t, obs_d)
    # sample from the KM-implied distribution (mass beyond the last event placed past the range)
    jumps = -np.diff(np.concatenate([[1.0], km.survival]))
    support = np.append(km.times, np.inf)
    probs = np.append(jumps, km.survival[-1])
    reps = [rng.choice(support, size=300, p=probs) for _ in range(50)]
    r = survival_ecdf_check(obs_t, obs_d, reps)
    assert r.extra["band_coverage"] >= 0.9
    assert r.extra["coverage_from"] == pytest.approx(km.times[0])


def test_pit_saturation_and_self_consistency():
    rep = np.array([[1.0, 2.0], [5.0, 6.0]])
    assert pit_values([3.0, 4.0], rep).tolist() == [1.0, 0.0]
    with pytest.raises(GofError):
        pit_check([1.0, 2.0], [1, 1], rep)
    rng = np.random.default_rng(8)
    obs = rng.exponential(size=300)
    r = pit_check(obs, np.ones(300), rng.exponential(size=(300, 100)))
    assert r.extra["sup_deviation"] < 0.08


# ------------------------------------------------------------------ concordance

def test_concordance_perfect_and_reversed():
    t = np.array([1.0, 2.0, 3.0])
    s = np.ones(3, dtype=np.int64)
    w = np.ones(3)
    assert concordance_at(np.array([3.0, 2.0, 1.0]), t, s, w, 0.0, 10.0)[0] == 1.0
    assert concordance_at(np.array([1.0, 2.0, 3.0]), t, s, w, 0.0, 10.0)[0] == 0.0
    assert concordance_at(np.array([1.0, 1.0, 2.0]), t, s, w, 0.0, 10.0)[0] == pytest.approx(1 / 6)
    assert math.isnan(concordance_at(np.array([2.0, 2.0, 2.0]), t, s, w, 0.0, 10.0)[0])


def test_last_values_and_window():
    s = LongSample([0, 0, 1], [0.0, 2.0, 1.0], [10.0, 20.0, 30.0])
    v = last_values(s, 2, [0.0, 1.5, 3.0])
    assert np.array_equal(v[0], [10.0, 10.0, 20.0])
    assert np.isnan(v[1, 0]) and v[1, 1] == 30.0
    w = last_values(s, 2, [3.0], kappa=0.5)
    assert np.isnan(w).all()


def test_concordance_kappa_exhaustion_is_recorded():
    rng = np.random.default_rng(9)
    n = 40
    subj = np.repeat(np.arange(n), 3)
    times = np.tile([0.0, 1.0, 2.0], n)
    T = 3 + rng.exponential(5, n)
    obs = LongSample(subj, times, rng.normal(size=3 * n))
    d = np.ones(n, dtype=int)
    grid = np.concatenate([[0.0], np.sort(T)])
    C, reasons = concordance_series(obs, T, d, grid, np.inf, kappa=0.01)
    assert not math.isnan(C[0])
    assert np.isnan(C[1:]).all() and len(reasons) == n
    with pytest.raises(GofError):
        concordance_over_time(obs, T, d, [(obs, T, d)], kappa=0.01)
    r = concordance_over_time(obs, T, d, [(obs, T, d)])
    assert r.mise == 0.0


def test_ipcw_weights():
    w = ipcw_weights([1.0, 2.0, 3.0, 4.0], [1, 0, 1, 1])
    # censoring KM: one censoring at 2 among 3 at risk
    assert np.allclose(w, [1.0, 1.0, 1 / (2 / 3) ** 2, 1 / (2 / 3) ** 2])
