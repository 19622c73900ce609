"""Joint model specification and parameter containers."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .splines import BSplineBasis, NaturalSplineBasis, quantile_baseline_basis

FORMS = ("value", "slope", "acceleration", "windowed_average", "windowed_curvature",
         "integral_average")
SCHEMA_VERSION = 1


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class TimeBasis:
    """Time structure of the longitudinal mean: an intercept plus ``linear`` or ``ns`` terms."""

    kind: str = "linear"
    internal_knots: tuple = ()
    boundary_knots: tuple = (0.0, 1.0)
    _ns: Optional[NaturalSplineBasis] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("linear", "ns"):
            raise SpecError(f"time basis kind must be 'linear' or 'ns', got {self.kind!r}")
        object.__setattr__(self, "internal_knots", tuple(float(k) for k in self.internal_knots))
        object.__setattr__(self, "boundary_knots", tuple(float(k) for k in self.boundary_knots))
        if self.kind == "ns":
            object.__setattr__(self, "_ns", NaturalSplineBasis(self.internal_knots, self.boundary_knots))

    @property
    def n_columns(self) -> int:
        return 2 if self.kind == "linear" else 1 + self._ns.df

    def breakpoints(self) -> np.ndarray:
        return self._ns.breakpoints() if self.kind == "ns" else np.array([], dtype=float)

    def evaluate(self, t, deriv: int = 0) -> np.ndarray:
        """Design columns (intercept first) or their time derivatives at ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((t.size, self.n_columns))
        if deriv == 0:
            out[:, 0] = 1.0
        if self.kind == "linear":
            if deriv == 0:
                out[:, 1] = t
            elif deriv == 1:
                out[:, 1] = 1.0
        else:
            out[:, 1:] = self._ns.evaluate(t, deriv)
        return out

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "ns":
            d.update(internal_knots=list(self.internal_knots), boundary_knots=list(self.boundary_knots))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TimeBasis":
        return cls(d.get("kind", "linear"), tuple(d.get("internal_knots", ())),
                   tuple(d.get("boundary_knots", (0.0, 1.0))))


@dataclass(frozen=True)
class FunctionalForm:
    kind: str = "value"
    window: Optional[float] = None

    def __post_init__(self):
        if self.kind not in FORMS:
            raise SpecError(f"unknown functional form {self.kind!r}")
        if self.kind.startswith("windowed") and not (self.window and self.window > 0):
            raise SpecError(f"{self.kind} requires a window v > 0")

    @property
    def uses_covariates(self) -> bool:
        """Whether time-constant fixed effects enter the form (true for level-type forms)."""
        return self.kind in ("value", "windowed_average", "integral_average")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "window": self.window}


@dataclass(frozen=True)
class ModelSpec:
    """Design definitions of a Gaussian joint model with identity link.

    Fixed-effects design x(t) = [time basis, ``fixed_covariates``]; the
    random-effects design z(t) is the first ``n_random`` time-basis columns
    (all of them by default). ``baseline`` may be left ``None`` and resolved
    from data with :meth:`resolve_baseline`.
    """

    time_basis: TimeBasis = TimeBasis()
    fixed_covariates: tuple = ()
    n_random: Optional[int] = None
    functional_form: FunctionalForm = FunctionalForm()
    baseline: Optional[BSplineBasis] = None
    survival_covariates: tuple = ()
    outcome_transform: str = "identity"
    baseline_n_basis: int = 9
    baseline_degree: int = 3
    baseline_transform: str = "log"
    penalty_order: int = 2
    horizon_factor: float = 1.5

    def __post_init__(self):
        object.__setattr__(self, "fixed_covariates", tuple(self.fixed_covariates))
        object.__setattr__(self, "survival_covariates", tuple(self.survival_covariates))
        q = self.n_random if self.n_random is not None else self.time_basis.n_columns
        if not 1 <= q <= self.time_basis.n_columns:
            raise SpecError("n_random must be between 1 and the number of time-basis columns")
        object.__setattr__(self, "n_random", int(q))
        if self.outcome_transform not in ("identity", "exp"):
            raise SpecError("outcome_transform must be 'identity' or 'exp'")

    @property
    def n_time(self) -> int:
        return self.time_basis.n_columns

    @property
    def n_fixed(self) -> int:
        return self.n_time + len(self.fixed_covariates)

    @property
    def n_baseline(self) -> int:
        if self.baseline is not None:
            return self.baseline.n_basis
        return self.baseline_n_basis

    def transform_outcome(self, y):
        y = np.asarray(y, dtype=float)
        return np.exp(y) if self.outcome_transform == "exp" else y

    def resolve_baseline(self, event_times, event_indicators, horizon: float) -> "ModelSpec":
        if self.baseline is not None:
            return self
        et = np.asarray(event_times, float)[np.asarray(event_indicators) == 1]
        if et.size == 0:
            et = np.asarray(event_times, float)
        basis = quantile_baseline_basis(et, horizon, self.baseline_n_basis, self.baseline_degree,
                                        self.baseline_transform)
        return replace(self, baseline=basis)

    def quadrature_breakpoints(self) -> np.ndarray:
        pts = [self.time_basis.breakpoints()]
        if self.baseline is not None:
            pts.append(self.baseline.breakpoints())
        bp = np.unique(np.concatenate(pts)) if pts else np.array([])
        return bp[bp > 0]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "time_basis": self.time_basis.to_dict(),
            "fixed_covariates": list(self.fixed_covariates),
            "n_random": self.n_random,
            "functional_form": self.functional_form.to_dict(),
            "baseline": self.baseline.to_dict() if self.baseline is not None else None,
            "survival_covariates": list(self.survival_covariates),
            "outcome_transform": self.outcome_transform,
            "baseline_n_basis": self.baseline_n_basis,
            "baseline_degree": self.baseline_degree,
            "baseline_transform": self.baseline_transform,
            "penalty_order": self.penalty_order,
            "horizon_factor": self.horizon_factor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        ff = d.get("functional_form", {}) or {}
        bl = d.get("baseline")
        return cls(
            time_basis=TimeBasis.from_dict(d.get("time_basis", {})),
            fixed_covariates=tuple(d.get("fixed_covariates", ())),
            n_random=d.get("n_random"),
            functional_form=FunctionalForm(ff.get("kind", "value"), ff.get("window")),
            baseline=BSplineBasis.from_dict(bl) if bl else None,
            survival_covariates=tuple(d.get("survival_covariates", ())),
            outcome_transform=d.get("outcome_transform", "identity"),
            baseline_n_basis=int(d.get("baseline_n_basis", 9)),
            baseline_degree=int(d.get("baseline_degree", 3)),
            baseline_transform=d.get("baseline_transform", "log"),
            penalty_order=int(d.get("penalty_order", 2)),
            horizon_factor=float(d.get("horizon_factor", 1.5)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass(frozen=True)
class Draw:
    """A single parameter vector theta."""

    beta: np.ndarray
    sigma: float
    gamma: np.ndarray
    alpha: float
    gamma_h0: np.ndarray
    D: np.ndarray
    tau: Optional[float] = None

    def __post_init__(self):
        for name in ("beta", "gamma", "gamma_h0"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        object.__setattr__(self, "D", np.atleast_2d(np.asarray(self.D, dtype=float)))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "alpha", float(np.asarray(self.alpha).reshape(-1)[0]))

    def with_(self, **kw) -> "Draw":
        return replace(self, **kw)


def weibull_baseline(phi: float, log_scale: float = 0.0, upper: float = 100.0) -> tuple[BSplineBasis, np.ndarray]:
    """Exact log-time linear B-spline representation of h0(t) = exp(c) * phi * t**(phi - 1)."""
    lo, hi = np.log(1e-8), np.log(upper)
    basis = BSplineBasis(1, (), (lo, hi), True, "log")
    g = basis.greville()
    coef = log_scale + np.log(phi) + (phi - 1.0) * g
    return basis, coef
