import numpy as np
import pytest

from jmppc.model import SpecError
from jmppc.scenario import (ANALYSIS_MODELS, ScenarioConfig, ScenarioError, analysis_model_spec,
                            generate_scenario_dataset, true_draw, true_spec)
from jmppc.survival import SubjectBatch, SubjectState, hazard


def test_defaults_are_the_reference_design():
    c = ScenarioConfig()
    assert c.beta == (1.75, 0.033, -5.84, -0.182)
    assert (c.sigma, c.phi, c.gamma0, c.gamma1, c.alpha) == (0.126, 6.325, -20.0, -0.85, 0.145)
    assert c.n_subjects == 300 and c.censor_time == 25.0
    D = c.D_matrix
    assert np.allclose(D, D.T) and np.all(np.linalg.eigvalsh(D) > 0)


def test_weibull_hazard_reference_value():
    spec = true_spec()
    d = true_draw().with_(alpha=0.0, gamma=np.zeros(1), gamma_h0=true_draw().gamma_h0 + 20.0)
    s = SubjectState(spec, d, np.zeros(4), {"treat": 0.0})
    assert hazard(s, 1.0) == pytest.approx(6.325, rel=1e-12)


def test_true_hazard_direct_formula():
    spec, draw = true_spec(), true_draw()
    s = SubjectState(spec, draw, np.zeros(4), {"treat": 0.0})
    eta = float(spec.time_basis.evaluate([10.0])[0] @ draw.beta)
    direct = 6.325 * 10.0 ** 5.325 * np.exp(-20.0 + 0.145 * eta)
    assert hazard(s, 10.0) == pytest.approx(direct, rel=1e-10)


def test_dataset_shape_and_censoring():
    data = generate_scenario_dataset(seed=1)
    assert data.n == 300 and data.ids[0] == "1"
    assert np.all(data.event_times <= 25.0)
    assert np.all(data.event_times[data.event_indicators == 0] == 25.0)
    assert np.all(data.n_obs >= 1) and np.all(data.n_obs <= 15)
    assert set(np.unique(data.covariate_matrix(["treat"]))) <= {0.0, 1.0}
    assert all(s.times[0] == 0.0 for s in data.subjects)


def test_no_event_limit():
    data = generate_scenario_dataset(ScenarioConfig(n_subjects=50, gamma0=-200.0), seed=2)
    assert np.all(data.event_indicators == 0)
    assert np.all(data.n_obs == 15)


def test_generation_is_deterministic():
    a = generate_scenario_dataset(ScenarioConfig(n_subjects=20), seed=3)
    b = generate_scenario_dataset(ScenarioConfig(n_subjects=20), seed=3)
    assert np.array_equal(a.long_values, b.long_values) and np.array_equal(a.event_times, b.event_times)


def test_analysis_models():
    assert ANALYSIS_MODELS == ("true_model", "linear_trend", "exp_outcome", "slope_form")
    assert analysis_model_spec("linear_trend").n_random == 2
    assert analysis_model_spec("true_model").n_random == 4
    assert analysis_model_spec("slope_form").functional_form.kind == "slope"
    exp = analysis_model_spec("exp_outcome")
    y = np.sort(generate_scenario_dataset(seed=1).long_values)
    z = exp.transform_outcome(y)
    assert np.all(np.diff(z) >= 0) and np.allclose(np.log(z), y)
    with pytest.raises(SpecError):
        analysis_model_spec("quadratic")


def test_config_validation():
    with pytest.raises(ScenarioError):
        ScenarioConfig(sigma=-1.0)
    with pytest.raises(ScenarioError, match="unknown scenario field"):
        ScenarioConfig.from_dict({"n": 3})
    c = ScenarioConfig.from_dict(ScenarioConfig(n_subjects=12).to_dict())
    assert c == ScenarioConfig(n_subjects=12)
