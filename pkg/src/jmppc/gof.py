"""Goodness-of-fit statistics comparing observed and replicated joint data.

Longitudinal: eCDF, loess mean function, variance function of standardized
loess residuals, semi-variogram. Survival: Kaplan-Meier eCDF and the
probability integral transform. Association: time-indexed concordance with
inverse-probability-of-censoring weights. Every check ends in a MISE.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import norm

from .kernels import concordance_kernel, loess_kernel

GRID_INTERVALS = 200
Z95 = float(norm.ppf(0.975))


class GofError(ValueError):
    pass


# ------------------------------------------------------------------ curves


@dataclass
class Curve:
    """A curve on an increasing grid; step curves are right-continuous."""

    grid: np.ndarray
    values: np.ndarray
    kind: str
    step: bool = False
    left_value: float = 0.0
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, float)
        self.values = np.asarray(self.values, float)
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape:
            raise GofError("curve grid and values must be 1-d of equal length")
        if self.grid.size > 1 and np.any(np.diff(self.grid) <= 0):
            raise GofError("curve grid must be strictly increasing")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        if self.step:
            i = np.searchsorted(self.grid, x, side="right") - 1
            out = np.where(i >= 0, self.values[np.clip(i, 0, None)], self.left_value)
            return out
        return np.interp(x, self.grid, self.values)

    def band(self, x):
        if self.lower is None:
            raise GofError("curve carries no confidence band")
        lo = Curve(self.grid, self.lower, self.kind, self.step, self.left_value)
        hi = Curve(self.grid, self.upper, self.kind, self.step, self.left_value)
        return lo(x), hi(x)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "grid": self.grid.tolist(), "values": self.values.tolist()}
        if self.lower is not None:
            d["lower"] = self.lower.tolist()
            d["upper"] = self.upper.tolist()
        return d


def uniform_grid(a: float, b: float, intervals: int = GRID_INTERVALS) -> np.ndarray:
    if not a < b:
        raise GofError(f"grid range needs a < b, got ({a}, {b})")
    return np.linspace(a, b, intervals + 1)


def ecdf(values) -> Curve:
    """Right-continuous empirical CDF."""
    v = np.asarray(values, float).ravel()
    v = v[~np.isnan(v)]
    if v.size == 0:
        raise GofError("ecdf of an empty sample")
    u, counts = np.unique(v, return_counts=True)
    return Curve(u, np.cumsum(counts) / v.size, "ecdf", step=True, left_value=0.0)


def ecdf_at(values, grid) -> np.ndarray:
    v = np.sort(np.asarray(values, float).ravel())
    return np.searchsorted(v, grid, side="right") / v.size


def mise(observed, replicates: Sequence, range_: tuple) -> float:
    """Mean over replicates of the trapezoidal integral of squared differences on 200 sub-intervals."""
    a, b = range_
    grid = uniform_grid(a, b)
    f = observed(grid)
    if len(replicates) == 0:
        raise GofError("no replicate curves")
    total = 0.0
    for rep in replicates:
        total += trapezoid((rep(grid) - f) ** 2, grid)
    return float(total / len(replicates))


# ------------------------------------------------------------------ loess


@dataclass(frozen=True)
class LoessConfig:
    span: float = 0.75
    degree: int = 2
    iterations: int = 0

    def __post_init__(self):
        if not 0 < self.span <= 1:
            raise GofError("loess span must be in (0, 1]")
        if self.degree not in (1, 2):
            raise GofError("loess degree must be 1 or 2")


class LoessFit:
    """Tricube-weighted local polynomial regression of ``y`` on ``x``."""

    def __init__(self, x, y, config: LoessConfig = LoessConfig()):
        x = np.asarray(x, float).ravel()
        y = np.asarray(y, float).ravel()
        if x.shape != y.shape:
            raise GofError("x and y must have equal length")
        ok = np.isfinite(x) & np.isfinite(y)
        x, y = x[ok], y[ok]
        N = x.size
        if N == 0 or config.span * N < config.degree + 1:
            raise GofError(f"loess needs span*N >= degree+1 (N={N}, span={config.span})")
        if np.ptp(x) == 0:
            raise GofError("degenerate loess input: all x equal")
        order = np.argsort(x, kind="stable")
        self._order = order
        self.x = np.ascontiguousarray(x[order])
        self.y = np.ascontiguousarray(y[order])
        self.config = config
        self.q = max(int(math.floor(config.span * N)), config.degree + 1)
        self.robustness = np.ones(N)
        for _ in range(config.iterations):
            fitted, _ = loess_kernel(self.x, self.y, self.robustness, self.x, self.q, config.degree, False)
            r = self.y - fitted
            s = np.median(np.abs(r))
            if s == 0:
                break
            self.robustness = np.ascontiguousarray((1 - np.minimum(np.abs(r) / (6 * s), 1) ** 2) ** 2)

    @property
    def n(self) -> int:
        return self.x.size

    def predict(self, x_new) -> np.ndarray:
        x_new = np.ascontiguousarray(np.asarray(x_new, float).ravel())
        fit, _ = loess_kernel(self.x, self.y, self.robustness, x_new, self.q, self.config.degree, False)
        return fit

    @cached_property
    def _training(self):
        return loess_kernel(self.x, self.y, self.robustness, self.x, self.q, self.config.degree, True)

    @property
    def fitted(self) -> np.ndarray:
        """Fitted values in the caller's original order."""
        out = np.empty(self.n)
        out[self._order] = self._training[0]
        return out

    @property
    def df(self) -> float:
        """Trace of the smoother matrix."""
        return float(np.sum(self._training[1] * self.robustness))

    def curve(self, grid, kind: str = "loess_mean") -> Curve:
        return Curve(grid, self.predict(grid), kind)


def loess_fit(x, y, config: LoessConfig = LoessConfig()) -> LoessFit:
    return LoessFit(x, y, config)


# ------------------------------------------------------------------ samples


@dataclass
class LongSample:
    """Pooled longitudinal rows, each a (subject index, time, value) record."""

    subject: np.ndarray
    times: np.ndarray
    values: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.subject = np.asarray(self.subject, dtype=np.int64)
        self.times = np.asarray(self.times, float)
        self.values = np.asarray(self.values, float)

    def __len__(self):
        return self.times.size

    def subset_subject(self, i: int) -> "LongSample":
        m = self.subject == i
        return LongSample(self.subject[m], self.times[m], self.values[m])

    def sorted(self) -> "LongSample":
        o = np.lexsort((self.times, self.subject))
        return LongSample(self.subject[o], self.times[o], self.values[o])


@dataclass
class CheckReport:
    statistic: str
    observed_curve: Curve
    replicate_curves: list
    mise: float
    range: tuple
    regime: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "mise": self.mise,
            "range": list(self.range),
            "regime": self.regime,
            "extra": self.extra,
            "observed": self.observed_curve.to_dict(),
            "replicates": [c.to_dict() for c in self.replicate_curves],
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(_jsonable(self.to_dict()), fh, indent=1, sort_keys=True)

    def to_long_csv(self, path) -> None:
        """Curve points in long format: (curve, index, x, y, lower, upper)."""
        grid = uniform_grid(*self.range)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["curve", "x", "y", "lower", "upper"])
            obs = self.observed_curve(grid)
            if self.observed_curve.lower is not None:
                lo, hi = self.observed_curve.band(grid)
            else:
                lo = hi = [None] * grid.size
            for x, y, l, u in zip(grid, obs, lo, hi):
                w.writerow(["observed", _f(x), _f(y), _f(l), _f(u)])
            for m, c in enumerate(self.replicate_curves):
                for x, y in zip(grid, c(grid)):
                    w.writerow([f"rep{m}", _f(x), _f(y), "", ""])


def _f(x):
    if x is None:
        return ""
    return format(float(x), ".17g")


def _jsonable(o):
    if isinstance(o, dict):
        return {k: _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.floating, float)):
        v = float(o)
        return v if math.isfinite(v) else None
    if isinstance(o, np.integer):
        return int(o)
    return o


# ------------------------------------------------------------------ longitudinal checks


def longitudinal_ecdf_check(observed: LongSample, replicates: Sequence[LongSample]) -> CheckReport:
    obs = ecdf(observed.values)
    reps = [ecdf(r.values) for r in replicates if len(r)]
    rng_ = (float(observed.values.min()), float(observed.values.max()))
    return CheckReport("ecdf-long", obs, reps, mise(obs, reps, rng_), rng_)


def _mean_curve(sample: LongSample, config, grid):
    return loess_fit(sample.times, sample.values, config).curve(grid, "loess_mean")


def mean_function_check(observed: LongSample, replicates: Sequence[LongSample],
                        config: LoessConfig = LoessConfig(), scope="pooled") -> CheckReport:
    """Loess of y on t for observed and replicated data; ``scope`` is 'pooled' or a subject index."""
    extra = {}
    if scope != "pooled":
        observed = observed.subset_subject(int(scope))
        if len(observed) < config.degree + 2:
            raise GofError(f"subject {scope} has {len(observed)} points; needs >= {config.degree + 2}")
        replicates = [r.subset_subject(int(scope)) for r in replicates]
    rng_ = (float(observed.times.min()), float(observed.times.max()))
    grid = uniform_grid(*rng_)
    obs = _mean_curve(observed, config, grid)
    reps, skipped = [], 0
    for r in replicates:
        try:
            reps.append(_mean_curve(r, config, grid))
        except GofError:
            skipped += 1
    extra["skipped_replicates"] = skipped
    return CheckReport("mean", obs, reps, mise(obs, reps, rng_), rng_,
                       regime={"scope": scope}, extra=extra)


def loess_residuals(sample: LongSample, config: LoessConfig):
    """Residuals from the pooled loess mean, with the smoother's df (cached on the sample)."""
    key = ("resid", config)
    if key not in sample._cache:
        fit = loess_fit(sample.times, sample.values, config)
        sample._cache[key] = (sample.values - fit.fitted, fit.df)
    return sample._cache[key]


def standardized_abs_residuals(sample: LongSample, config: LoessConfig):
    r, df = loess_residuals(sample, config)
    N = r.size
    if N <= df:
        raise GofError(f"N={N} does not exceed the loess df={df:.3f}")
    sigma = math.sqrt(float(r @ r) / (N - df))
    return np.sqrt(np.abs(r / sigma)), r, sigma


def variance_function_check(observed: LongSample, replicates: Sequence[LongSample],
                            config: LoessConfig = LoessConfig()) -> CheckReport:
    rng_ = (float(observed.times.min()), float(observed.times.max()))
    grid = uniform_grid(*rng_)

    def curve(s: LongSample):
        rb, _, sigma = standardized_abs_residuals(s, config)
        return loess_fit(s.times, rb, config).curve(grid, "loess_variance"), sigma

    obs, sig = curve(observed)
    reps, sigmas = [], []
    for r in replicates:
        c, s = curve(r)
        reps.append(c)
        sigmas.append(s)
    return CheckReport("variance", obs, reps, mise(obs, reps, rng_), rng_,
                       extra={"sigma_hat": sig, "sigma_hat_rep": sigmas})


def semivariogram_pairs(subject, times, resid):
    """All within-subject pairs j < k: lags |t_j - t_k| and half squared differences."""
    subject = np.asarray(subject)
    times = np.asarray(times, float)
    resid = np.asarray(resid, float)
    o = np.lexsort((times, subject))
    subject, times, resid = subject[o], times[o], resid[o]
    uniq, start, counts = np.unique(subject, return_index=True, return_counts=True)
    us, ds = [], []
    for c in np.unique(counts):
        if c < 2:
            continue
        starts = start[counts == c]
        j, k = np.triu_indices(c, 1)
        ia = (starts[:, None] + j[None, :]).ravel()
        ib = (starts[:, None] + k[None, :]).ravel()
        us.append(np.abs(times[ia] - times[ib]))
        ds.append(0.5 * (resid[ia] - resid[ib]) ** 2)
    if not us:
        raise GofError("semi-variogram needs at least one subject with >= 2 measurements")
    return np.concatenate(us), np.concatenate(ds)


def semivariogram_check(observed: LongSample, replicates: Sequence[LongSample],
                        config: LoessConfig = LoessConfig(), max_lag: Optional[float] = None) -> CheckReport:
    def pairs(s):
        r, _ = loess_residuals(s, config)
        u, d = semivariogram_pairs(s.subject, s.times, r)
        if max_lag is not None:
            keep = u <= max_lag
            u, d = u[keep], d[keep]
        return u, d

    u, d = pairs(observed)
    rng_ = (float(u.min()), float(u.max()))
    grid = uniform_grid(*rng_)
    obs = loess_fit(u, d, config).curve(grid, "semivariogram")
    reps = []
    for r in replicates:
        ur, dr = pairs(r)
        reps.append(loess_fit(ur, dr, config).curve(grid, "semivariogram"))
    return CheckReport("semivariogram", obs, reps, mise(obs, reps, rng_), rng_,
                       extra={"n_pairs": int(u.size)})


# ------------------------------------------------------------------ survival


@dataclass
class KaplanMeier:
    """Product-limit estimate with Greenwood variance and log-scale 95% band."""

    times: np.ndarray          # distinct event times
    survival: np.ndarray
    greenwood: np.ndarray      # cumulative sum d / (n (n - d))
    n_risk: np.ndarray
    n_event: np.ndarray

    @property
    def lower(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            lo = self.survival * np.exp(-Z95 * np.sqrt(self.greenwood))
        return np.where(self.survival > 0, np.nan_to_num(lo, nan=0.0), 0.0)

    @property
    def upper(self) -> np.ndarray:
        with np.errstate(invalid="ignore", over="ignore"):
            up = self.survival * np.exp(Z95 * np.sqrt(self.greenwood))
        return np.where(self.survival > 0, np.minimum(np.nan_to_num(up, nan=1.0), 1.0), 0.0)

    def survival_curve(self) -> Curve:
        if self.times.size == 0:
            return Curve(np.array([0.0]), np.array([1.0]), "km", True, 1.0,
                         np.array([1.0]), np.array([1.0]))
        return Curve(self.times, self.survival, "km", True, 1.0, self.lower, self.upper)

    def cdf_curve(self) -> Curve:
        """1 - S(t) with the band flipped accordingly."""
        if self.times.size == 0:
            return Curve(np.array([0.0]), np.array([0.0]), "ecdf", True, 0.0,
                         np.array([0.0]), np.array([0.0]))
        return Curve(self.times, 1 - self.survival, "ecdf", True, 0.0, 1 - self.upper, 1 - self.lower)

    def S(self, t) -> np.ndarray:
        return self.survival_curve()(t)

    def S_left(self, t) -> np.ndarray:
        """S(t-), the left limit."""
        t = np.asarray(t, float)
        i = np.searchsorted(self.times, t, side="left") - 1
        return np.where(i >= 0, self.survival[np.clip(i, 0, None)] if self.times.size else 1.0, 1.0)


def kaplan_meier(times, indicators) -> KaplanMeier:
    t = np.asarray(times, float)
    d = np.asarray(indicators).astype(int)
    if np.any(t < 0):
        raise GofError("times must be nonnegative")
    ev_times = np.unique(t[d == 1])
    if ev_times.size == 0:
        e = np.array([])
        return KaplanMeier(e, e, e, e, e)
    ts = np.sort(t)
    n_risk = ts.size - np.searchsorted(ts, ev_times, side="left")
    evs = np.sort(t[d == 1])
    n_event = np.searchsorted(evs, ev_times, side="right") - np.searchsorted(evs, ev_times, side="left")
    surv = np.cumprod(1 - n_event / n_risk)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(n_risk > n_event, n_event / (n_risk * (n_risk - n_event)), np.inf)
    return KaplanMeier(ev_times, surv, np.cumsum(term), n_risk.astype(float), n_event.astype(float))


def band_coverage(band_curve: Curve, curve_values, grid, start: float = -np.inf) -> float:
    """Fraction of grid points at or after ``start`` where the curve lies inside the band."""
    lo, hi = band_curve.band(grid)
    v = np.asarray(curve_values)
    tol = 1e-12
    use = np.asarray(grid) >= start
    inside = (v >= lo - tol) & (v <= hi + tol)
    return float(np.mean(inside[use])) if use.any() else math.nan


def _first_event(km: "KaplanMeier") -> float:
    """Left end of the informative part of a KM band (before it the band is the single point 0)."""
    return float(km.times[0]) if km.times.size else -np.inf


def survival_ecdf_check(obs_times, obs_status, rep_times: Sequence, start: float = 0.0) -> CheckReport:
    """Kaplan-Meier eCDF of the observed times against plain eCDFs of replicated event times.

    ``rep_times`` entries are arrays of replicated times; horizon-truncated
    entries should be passed as their horizon value (beyond the grid) or
    ``inf``. ``start`` is the left end of the comparison range (the
    landmark time for dynamic replicates). The report's ``extra`` carries the fraction of grid points at
    which the pointwise mean replicate curve lies inside the KM band, counted
    from the first observed event time (before it the band is degenerate).
    """
    obs_times = np.asarray(obs_times, float)
    km = kaplan_meier(obs_times, obs_status)
    obs = km.cdf_curve()
    rng_ = (float(start), float(obs_times.max()))
    grid = uniform_grid(*rng_)
    reps = [Curve(grid, ecdf_at(r, grid), "ecdf") for r in rep_times]
    mean_rep = np.mean([c.values for c in reps], axis=0)
    first = _first_event(km)
    per_rep = [band_coverage(obs, c.values, grid, first) for c in reps]
    beyond = [float(np.mean(np.asarray(r) > rng_[1])) for r in rep_times]
    extra = {"band_coverage": band_coverage(obs, mean_rep, grid, first),
             "coverage_from": first,
             "per_replicate_band_coverage": float(np.mean(per_rep)),
             "mass_beyond_range": float(np.mean(beyond))}
    return CheckReport("ecdf-surv", obs, reps, mise(obs, reps, rng_), rng_, extra=extra)


def pit_values(obs_times, rep_matrix) -> np.ndarray:
    """u_i = fraction of subject i's replicated times <= its observed time."""
    rep = np.asarray(rep_matrix, float)
    return np.mean(rep <= np.asarray(obs_times, float)[:, None], axis=1)


def pit_check(obs_times, obs_status, rep_matrix) -> CheckReport:
    """KM of (u_i, delta_i) against the Uniform(0, 1) CDF; ``rep_matrix`` is (n, M)."""
    rep = np.asarray(rep_matrix, float)
    if rep.ndim != 2 or rep.shape[1] < 20:
        raise GofError("PIT needs at least 20 replicated times per subject")
    u = pit_values(obs_times, rep)
    km = kaplan_meier(u, obs_status)
    obs = km.cdf_curve()
    grid = uniform_grid(0.0, 1.0)
    ident = Curve(grid, grid.copy(), "uniform_cdf")
    first = _first_event(km)
    extra = {"band_coverage": band_coverage(obs, grid, grid, first), "coverage_from": first,
             "sup_deviation": float(np.max(np.abs(obs(grid) - grid)))}
    return CheckReport("pit", obs, [ident], mise(obs, [ident], (0.0, 1.0)), (0.0, 1.0), extra=extra)


# ------------------------------------------------------------------ concordance


def last_values(sample: LongSample, n_subjects: int, at, kappa: Optional[float] = None) -> np.ndarray:
    """(n, K) matrix of each subject's last measurement at or before each time (NaN if none)."""
    s = sample.sorted()
    at = np.asarray(at, float)
    out = np.full((n_subjects, at.size), np.nan)
    if len(s) == 0:
        return out
    span = max(float(np.max(np.abs(s.times))), float(np.max(np.abs(at)))) * 2 + 1.0
    key = s.subject * span + s.times
    for i in np.unique(s.subject):
        q = np.searchsorted(key, i * span + at, side="right") - 1
        valid = q >= 0
        valid[valid] &= s.subject[q[valid]] == i
        qi = np.clip(q, 0, None)
        vals = np.where(valid, s.values[qi], np.nan)
        if kappa is not None:
            too_old = valid & (at - s.times[qi] > kappa)
            vals = np.where(too_old, np.nan, vals)
        out[i] = vals
    return out


def concordance_at(marker, times, status, weights, t_k: float, tau: float):
    """C(t_k) for subjects at risk (times >= t_k) with a marker; returns (C or nan, reason)."""
    at_risk = (times >= t_k) & ~np.isnan(marker)
    if at_risk.sum() < 2:
        return math.nan, "risk set < 2"
    m = marker[at_risk]
    if np.all(m == m[0]):
        return math.nan, "all predictors tied"
    num, den = concordance_kernel(np.ascontiguousarray(m), np.ascontiguousarray(times[at_risk]),
                                  np.ascontiguousarray(status[at_risk], dtype=np.int64),
                                  np.ascontiguousarray(weights[at_risk]), float(tau))
    if den == 0:
        return math.nan, "no comparable pairs"
    return num / den, ""


def concordance_series(sample: LongSample, times, status, t_grid, tau, weights=None,
                       kappa=None):
    n = np.asarray(times).size
    times = np.asarray(times, float)
    status = np.asarray(status).astype(np.int64)
    w = np.ones(n) if weights is None else np.asarray(weights, float)
    markers = last_values(sample, n, t_grid, kappa)
    C = np.full(len(t_grid), np.nan)
    reasons = {}
    for k, tk in enumerate(t_grid):
        C[k], why = concordance_at(markers[:, k], times, status, w, tk, tau)
        if why:
            reasons[float(tk)] = why
    return C, reasons


def ipcw_weights(obs_times, obs_status) -> np.ndarray:
    """Uno weights 1 / G(T_i-)^2 from the Kaplan-Meier estimate of the censoring distribution."""
    t = np.asarray(obs_times, float)
    d = np.asarray(obs_status).astype(int)
    G = kaplan_meier(t, 1 - d)
    g = G.S_left(t)
    with np.errstate(divide="ignore"):
        return np.where(g > 0, 1.0 / g ** 2, 0.0)


def concordance_over_time(observed: LongSample, obs_times, obs_status,
                          replicates: Sequence[tuple], kappa: Optional[float] = None,
                          tau_horizon: Optional[float] = None,
                          config: LoessConfig = LoessConfig()) -> CheckReport:
    """Concordance C(t_k) between the last marker value and subsequent event times.

    ``replicates`` holds ``(LongSample, rep_times, rep_status)`` triples;
    replicated data are censoring-free so they use unit weights. Orientation:
    a pair is concordant when the subject failing earlier has the higher
    marker.
    """
    obs_times = np.asarray(obs_times, float)
    obs_status = np.asarray(obs_status).astype(int)
    tau = float(np.quantile(obs_times, 0.9)) if tau_horizon is None else float(tau_horizon)
    t_grid = np.concatenate([[0.0], np.unique(obs_times[obs_status == 1])])
    w = ipcw_weights(obs_times, obs_status)
    C, reasons = concordance_series(observed, obs_times, obs_status, t_grid, tau, w, kappa)
    ok = ~np.isnan(C)
    if ok.sum() < config.degree + 2:
        raise GofError("too few time points with a defined concordance")
    rng_ = (float(t_grid[ok].min()), float(t_grid[ok].max()))
    grid = uniform_grid(*rng_)
    obs = loess_fit(t_grid[ok], C[ok], config).curve(grid, "concordance")
    reps, rep_points = [], []
    for sample, rt, rs in replicates:
        Cr, _ = concordance_series(sample, rt, rs, t_grid, tau, None, kappa)
        okr = ~np.isnan(Cr)
        if okr.sum() < config.degree + 2:
            continue
        reps.append(loess_fit(t_grid[okr], Cr[okr], config).curve(grid, "concordance"))
        rep_points.append(int(okr.sum()))
    extra = {"tau": tau, "skipped": {str(k): v for k, v in reasons.items()},
             "observed_points": {"t": t_grid[ok].tolist(), "C": C[ok].tolist()},
             "replicate_points_used": rep_points}
    if not reps:
        raise GofError("no replicate produced a concordance curve")
    return CheckReport("concordance", obs, reps, mise(obs, reps, rng_), rng_,
                       regime={"kappa": kappa}, extra=extra)
