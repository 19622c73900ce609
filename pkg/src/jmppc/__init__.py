"""Posterior predictive goodness-of-fit checks for joint longitudinal-survival models."""

from .checks import STATISTICS, run_check, run_checks
from .data import JointDataset, SubjectRecord, load_joint_dataset, split_folds, write_joint_dataset
from .fitter import McmcConfig, PosteriorDraws, PriorConfig, fit_joint_model, load_posterior_draws
from .gof import CheckReport, LoessConfig, LongSample, kaplan_meier, mise
from .kernels import BACKEND
from .model import Draw, FunctionalForm, ModelSpec, TimeBasis
from .ranef import MHConfig, mh_sample_conditional
from .replicate import (ReplicatedData, replicate_cross_validated, replicate_dynamic,
                        replicate_posterior_posterior, replicate_posterior_prior)
from .scenario import ScenarioConfig, analysis_model_spec, generate_scenario_dataset, true_draw, true_spec

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CheckReport", "Draw", "FunctionalForm", "JointDataset", "LoessConfig", "LongSample",
    "MHConfig", "McmcConfig", "ModelSpec", "PosteriorDraws", "PriorConfig", "ReplicatedData",
    "STATISTICS", "ScenarioConfig", "SubjectRecord", "TimeBasis", "analysis_model_spec",
    "fit_joint_model", "generate_scenario_dataset", "kaplan_meier", "load_joint_dataset",
    "load_posterior_draws", "mh_sample_conditional", "mise", "replicate_cross_validated",
    "replicate_dynamic", "replicate_posterior_posterior", "replicate_posterior_prior", "run_check",
    "run_checks", "split_folds", "true_draw", "true_spec", "write_joint_dataset",
]
