import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gammainc

from jmppc.model import Draw, FunctionalForm, ModelSpec, TimeBasis, weibull_baseline
from jmppc.survival import (SubjectBatch, SubjectState, conditional_event_cdf, cumulative_hazard,
                            form_design, gauss_legendre, hazard, simulate_event_time)

PHI, C0 = 6.325, -12.0


def weibull_spec(form="value", n_random=2):
    basis, coef = weibull_baseline(PHI, C0, upper=100.0)
    spec = ModelSpec(time_basis=TimeBasis("linear"), functional_form=FunctionalForm(form),
                     baseline=basis, survival_covariates=("w",), n_random=n_random)
    return spec, coef


def state(alpha, b, w=0.4, form="value", beta=(0.5, -0.1)):
    spec, coef = weibull_spec(form)
    draw = Draw(beta=np.array(beta), sigma=0.1, gamma=np.array([0.7]), alpha=alpha, gamma_h0=coef,
                D=np.eye(2))
    return SubjectState(spec, draw, np.asarray(b, float), {"w": w})


def test_gauss_legendre_exact_for_polynomials():
    rule = gauss_legendre(15)
    assert rule.order == 15
    # integrates x^28 on [-1, 1] exactly
    assert abs(np.sum(rule.weights * rule.nodes ** 28) - 2 / 29) < 1e-14


@pytest.mark.parametrize("phi,t1", [(6.325, 1.0), (1.0, 25.0)])
def test_unit_weibull_reference_values(phi, t1):
    basis, coef = weibull_baseline(phi, 0.0)
    spec = ModelSpec(time_basis=TimeBasis("linear"), baseline=basis)
    draw = Draw(beta=np.zeros(2), sigma=1.0, gamma=np.zeros(0), alpha=0.0, gamma_h0=coef, D=np.eye(2))
    s = SubjectState(spec, draw, np.zeros(2))
    assert abs(cumulative_hazard(s, 0.0, t1) - t1 ** phi) < 1e-8


@pytest.mark.parametrize("t0,t1", [(0.0, 3.0), (0.0, 4.5), (1.5, 4.25), (4.0, 4.0)])
def test_cumulative_hazard_weibull_closed_form(t0, t1):
    s = state(0.0, [0.3, 0.05])
    rate = np.exp(C0 + 0.7 * 0.4)
    exact = rate * (t1 ** PHI - t0 ** PHI)
    assert abs(cumulative_hazard(s, t0, t1) - exact) <= 1e-8 * max(1.0, exact)


def test_cumulative_hazard_value_form_closed_form():
    # linear trajectory: h(t) = e^{c} phi t^{phi-1} e^{alpha (m0 + m1 t)}, an incomplete gamma integral
    alpha, b = 0.8, np.array([0.2, -0.4])
    s = state(alpha, b)
    m0, m1 = 0.5 + b[0], -0.1 + b[1]
    k = -alpha * m1
    t1 = 4.5
    c = np.exp(C0 + 0.7 * 0.4 + alpha * m0)
    from scipy.special import gamma as G
    exact = c * PHI * G(PHI) * gammainc(PHI, k * t1) / k ** PHI
    assert abs(cumulative_hazard(s, 0.0, t1) - exact) < 1e-8 * max(1.0, exact)


def test_slope_form_is_constant_shift():
    s = state(0.5, [0.1, 0.2], form="slope")
    rate = np.exp(C0 + 0.7 * 0.4 + 0.5 * (-0.1 + 0.2))
    assert abs(cumulative_hazard(s, 0.0, 4.0) - rate * 4.0 ** PHI) < 1e-8 * max(1.0, rate * 4.0 ** PHI)
    assert hazard(s, 2.0) == pytest.approx(rate * PHI * 2.0 ** (PHI - 1), rel=1e-12)


def test_form_design_windowed_and_integral():
    basis, coef = weibull_baseline(PHI, C0)
    spec = ModelSpec(time_basis=TimeBasis("linear"), baseline=basis,
                     functional_form=FunctionalForm("windowed_average", 2.0))
    F = form_design(spec, np.array([0.0, 1.0, 5.0]))
    # average of (1, t) over (max(0, t - 2), t)
    assert np.allclose(F, [[1, 0], [1, 0.5], [1, 4.0]])
    spec2 = ModelSpec(time_basis=TimeBasis("linear"), baseline=basis,
                      functional_form=FunctionalForm("integral_average"))
    assert np.allclose(form_design(spec2, np.array([6.0])), [[1, 3.0]])


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(-0.3, 0.3), st.floats(0.0, 4.0), st.integers(0, 10 ** 6))
def test_event_time_root_residual(b0, b1, t_L, seed):
    s = state(0.6, [b0, b1])
    rng = np.random.default_rng(seed)
    ev = simulate_event_time(s, t_L, 12.0, rng)
    assert ev.time > t_L
    if not ev.censored_at_horizon:
        assert abs(cumulative_hazard(s, t_L, ev.time) - ev.exp_draw) <= 1e-6
    else:
        assert cumulative_hazard(s, t_L, 12.0) < ev.exp_draw


def test_conditional_cdf_and_validation():
    s = state(0.3, [0.0, 0.0])
    assert conditional_event_cdf(s, 2.0, 2.0) == 0.0
    assert 0 < conditional_event_cdf(s, 2.0, 4.0) < 1
    with pytest.raises(ValueError):
        conditional_event_cdf(s, 3.0, 2.0)
    with pytest.raises(ValueError):
        hazard(s, -1.0)
    with pytest.raises(ValueError):
        SubjectState(s.spec, s.draw, np.zeros(3))


def test_batch_matches_single_subject():
    spec, coef = weibull_spec()
    draw = Draw(beta=np.array([0.5, -0.1]), sigma=0.1, gamma=np.array([0.7]), alpha=0.6,
                gamma_h0=coef, D=np.eye(2))
    b = np.array([[0.1, 0.0], [-0.5, 0.2], [0.3, -0.1]])
    W = np.array([[0.0], [1.0], [0.5]])
    batch = SubjectBatch(spec, draw, W=W, b=b)
    H = batch.cumulative_hazard(0.0, np.array([3.0, 5.0, 7.0]))
    for i, t in enumerate([3.0, 5.0, 7.0]):
        s = SubjectState(spec, draw, b[i], {"w": W[i, 0]})
        assert H[i] == pytest.approx(cumulative_hazard(s, 0.0, t), rel=1e-13)


def test_doubling_quadrature_order_on_study_configuration(monkeypatch):
    import jmppc.survival as surv
    from jmppc.scenario import true_draw, true_spec
    spec, draw = true_spec(), true_draw()
    rng = np.random.default_rng(3)
    b = rng.multivariate_normal(np.zeros(4), draw.D, size=20)
    W = rng.integers(0, 2, size=(20, 1)).astype(float)
    t1 = np.linspace(2.0, 25.0, 20)
    H15 = SubjectBatch(spec, draw, W=W, b=b).cumulative_hazard(0.0, t1)
    monkeypatch.setattr(surv, "_GL", gauss_legendre(30))
    H30 = SubjectBatch(spec, draw, W=W, b=b).cumulative_hazard(0.0, t1)
    assert np.max(np.abs(H15 - H30) / np.maximum(H30, 1e-300)) < 1e-7
