"""Run named goodness-of-fit statistics on observed data against a set of replicates."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .data import JointDataset
from .gof import (CheckReport, GofError, LoessConfig, LongSample, concordance_over_time,
                  longitudinal_ecdf_check, mean_function_check, pit_check, semivariogram_check,
                  survival_ecdf_check, variance_function_check)
from .model import ModelSpec
from .replicate import ReplicatedData, observed_view

STATISTICS = ("ecdf-long", "mean", "variance", "semivariogram", "ecdf-surv", "pit", "concordance")


def parse_statistics(text: str) -> list:
    if text.strip() == "all":
        return list(STATISTICS)
    out = [s.strip() for s in text.split(",") if s.strip()]
    for s in out:
        if s not in STATISTICS:
            raise GofError(f"unknown statistic {s!r}; choose from {', '.join(STATISTICS)} or 'all'")
    return out


def run_check(statistic: str, data: JointDataset, spec: ModelSpec, rep: ReplicatedData,
              loess: LoessConfig = LoessConfig(), kappa: Optional[float] = None) -> CheckReport:
    """Compute one statistic; longitudinal values are compared on the model's outcome scale."""
    obs_long, T, delta = observed_view(data, spec, rep)
    reps = rep.replicates
    regime = {"regime": rep.regime, "t_L": rep.t_L, "M": rep.M}
    if statistic == "ecdf-long":
        rpt = longitudinal_ecdf_check(obs_long, [r.long for r in reps])
    elif statistic == "mean":
        rpt = mean_function_check(obs_long, [r.long for r in reps], loess)
    elif statistic == "variance":
        rpt = variance_function_check(obs_long, [r.long for r in reps], loess)
    elif statistic == "semivariogram":
        rpt = semivariogram_check(obs_long, [r.long for r in reps], loess)
    elif statistic == "ecdf-surv":
        rpt = survival_ecdf_check(T, delta, [r.event_times for r in reps],
                                  start=rep.t_L if rep.t_L is not None else 0.0)
    elif statistic == "pit":
        rpt = pit_check(T, delta, rep.rep_matrix())
    elif statistic == "concordance":
        rpt = concordance_over_time(obs_long, T, delta,
                                    [(r.long, r.event_times, r.status) for r in reps], kappa=kappa,
                                    config=loess)
    else:
        raise GofError(f"unknown statistic {statistic!r}")
    rpt.regime.update(regime)
    return rpt


def run_checks(statistics, data, spec, rep, loess: LoessConfig = LoessConfig(), kappa=None) -> dict:
    return {s: run_check(s, data, spec, rep, loess, kappa) for s in statistics}


def observed_long(data: JointDataset, spec: ModelSpec) -> LongSample:
    return LongSample(np.asarray(data.long_subject), np.asarray(data.long_times),
                      spec.transform_outcome(data.long_values))
