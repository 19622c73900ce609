"""Linear predictor, functional forms, hazard, cumulative hazard and event-time simulation.

Everything is vectorized over a batch of subjects: ``SubjectBatch`` holds
per-subject covariates and random effects for one parameter draw, and
``NodeCache`` freezes the quadrature design on fixed integration intervals so
repeated likelihood evaluations (MCMC) reduce to array products.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .model import Draw, ModelSpec

GL_ORDER = 15
ROOT_TOL = 1e-9


class HazardError(ArithmeticError):
    pass


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def order(self) -> int:
        return self.nodes.size


def gauss_legendre(order: int = GL_ORDER) -> QuadratureRule:
    x, w = np.polynomial.legendre.leggauss(order)
    return QuadratureRule(x, w)


_GL = gauss_legendre()


def _segments(t0, t1, bp):
    """Split [t0_i, t1_i] at the global breakpoints; returns (lo, hi) of shape (n, len(bp)+1)."""
    edges = np.concatenate([[-np.inf], bp, [np.inf]])
    lo = np.clip(edges[:-1][None, :], t0[:, None], t1[:, None])
    hi = np.clip(edges[1:][None, :], t0[:, None], t1[:, None])
    keep = np.any(hi > lo, axis=0)
    if not keep.any():
        keep[0] = True
    return lo[:, keep], hi[:, keep]


def _nodes(lo, hi, rule: QuadratureRule):
    """Quadrature nodes/weights on each segment, flattened to (n, S * order)."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    s = mid[:, :, None] + half[:, :, None] * rule.nodes[None, None, :]
    w = half[:, :, None] * rule.weights[None, None, :]
    n = lo.shape[0]
    return s.reshape(n, -1), w.reshape(n, -1)


def basis_integral(spec: ModelSpec, a, b, rule: QuadratureRule = _GL) -> np.ndarray:
    """Integral of the time-basis columns over [a_i, b_i]; exact for piecewise cubics."""
    a = np.asarray(a, float).ravel()
    b = np.asarray(b, float).ravel()
    lo, hi = _segments(a, b, spec.time_basis.breakpoints())
    s, w = _nodes(lo, hi, rule)
    T = spec.time_basis.evaluate(s.ravel()).reshape(s.shape + (-1,))
    return np.einsum("nk,nkc->nc", w, T)


def form_design(spec: ModelSpec, t) -> np.ndarray:
    """Matrix F with f(t) = F(t) @ (time coefficients) for the spec's functional form.

    Windowed forms truncate the window to (max(0, t - v), t); at t = 0 the
    averages reduce to the value at 0 and the curvature to the acceleration.
    """
    t = np.asarray(t, dtype=float)
    shape = t.shape
    t = t.ravel()
    form = spec.functional_form
    tb = spec.time_basis
    kind = form.kind
    if kind == "value":
        F = tb.evaluate(t, 0)
    elif kind == "slope":
        F = tb.evaluate(t, 1)
    elif kind == "acceleration":
        F = tb.evaluate(t, 2)
    else:
        if kind == "integral_average":
            a = np.zeros_like(t)
        else:
            a = np.maximum(0.0, t - form.window)
        width = t - a
        pos = width > 0
        F = np.empty((t.size, tb.n_columns))
        if kind == "windowed_curvature":
            F[~pos] = tb.evaluate(t[~pos], 2)
            if pos.any():
                F[pos] = (tb.evaluate(t[pos], 1) - tb.evaluate(a[pos], 1)) / width[pos, None]
        else:
            F[~pos] = tb.evaluate(t[~pos], 0)
            if pos.any():
                F[pos] = basis_integral(spec, a[pos], t[pos]) / width[pos, None]
    return F.reshape(shape + (tb.n_columns,))


class SubjectBatch:
    """Per-subject quantities for one parameter draw.

    Parameters
    ----------
    spec : ModelSpec
        Must have a resolved baseline basis.
    draw : Draw
    W : (n, g) survival covariates.
    Xc : (n, p_c) longitudinal fixed-effect covariates.
    b : (n, q) random effects.
    """

    def __init__(self, spec: ModelSpec, draw: Draw, W=None, Xc=None, b=None, n: Optional[int] = None):
        if spec.baseline is None:
            raise ValueError("ModelSpec baseline must be resolved before evaluating hazards")
        self.spec = spec
        self.draw = draw
        if n is None:
            n = next(len(a) for a in (b, W, Xc) if a is not None)
        self.n = n
        q = spec.n_random
        self.b = np.zeros((n, q)) if b is None else np.asarray(b, float).reshape(n, q)
        self.W = np.zeros((n, 0)) if W is None else np.asarray(W, float).reshape(n, -1)
        self.Xc = np.zeros((n, 0)) if Xc is None else np.asarray(Xc, float).reshape(n, -1)
        nt = spec.n_time
        if draw.beta.size != spec.n_fixed:
            raise ValueError(f"beta has length {draw.beta.size}, spec needs {spec.n_fixed}")
        if draw.gamma.size != self.W.shape[1]:
            raise ValueError("gamma length does not match survival covariates")
        if draw.gamma_h0.size != spec.baseline.n_basis:
            raise ValueError("gamma_h0 length does not match the baseline basis")
        coef = np.tile(draw.beta[:nt], (n, 1))
        coef[:, :q] += self.b
        self.coef = coef
        self.cov_part = self.Xc @ draw.beta[nt:] if self.Xc.shape[1] else np.zeros(n)
        self.surv_lp = self.W @ draw.gamma if self.W.shape[1] else np.zeros(n)
        self._form_mult = 1.0 if spec.functional_form.uses_covariates else 0.0
        self.breakpoints = spec.quadrature_breakpoints()

    # ---- longitudinal -------------------------------------------------------
    def eta(self, t, deriv: int = 0) -> np.ndarray:
        """eta_i(t) (or its derivative) at times ``t`` of shape (n,) or (n, k)."""
        t = np.asarray(t, float)
        t2 = t.reshape(self.n, -1)
        T = self.spec.time_basis.evaluate(t2.ravel(), deriv).reshape(t2.shape + (-1,))
        out = np.einsum("nkc,nc->nk", T, self.coef)
        if deriv == 0:
            out += self.cov_part[:, None]
        return out.reshape(t.shape)

    def form_value(self, t) -> np.ndarray:
        t = np.asarray(t, float)
        t2 = t.reshape(self.n, -1)
        F = form_design(self.spec, t2)
        out = np.einsum("nkc,nc->nk", F, self.coef) + self._form_mult * self.cov_part[:, None]
        return out.reshape(t.shape)

    # ---- survival -----------------------------------------------------------
    def log_baseline(self, t) -> np.ndarray:
        t = np.asarray(t, float)
        B = self.spec.baseline.evaluate(t.ravel(), clamp=True)
        return (B @ self.draw.gamma_h0).reshape(t.shape)

    def log_hazard(self, t) -> np.ndarray:
        t = np.asarray(t, float)
        t2 = t.reshape(self.n, -1)
        lh = self.log_baseline(t2) + self.surv_lp[:, None] + self.draw.alpha * self.form_value(t2)
        return lh.reshape(t.shape)

    def hazard(self, t) -> np.ndarray:
        lh = self.log_hazard(t)
        if not np.all(np.isfinite(lh)):
            bad = np.nonzero(~np.isfinite(np.asarray(lh).reshape(self.n, -1)).all(axis=1))[0]
            raise HazardError(f"non-finite log-hazard for subject index(es) {bad.tolist()}")
        return np.exp(lh)

    def _segment_integrals(self, lo, hi) -> np.ndarray:
        s, w = _nodes(lo, hi, _GL)
        h = self.hazard(s)
        S = lo.shape[1]
        return (w * h).reshape(self.n, S, -1).sum(axis=2)

    def cumulative_hazard(self, t0, t1) -> np.ndarray:
        t0 = np.broadcast_to(np.asarray(t0, float), (self.n,)).copy()
        t1 = np.broadcast_to(np.asarray(t1, float), (self.n,)).copy()
        if np.any(t1 < t0):
            raise ValueError("cumulative_hazard requires t1 >= t0")
        lo, hi = _segments(t0, t1, self.breakpoints)
        return self._segment_integrals(lo, hi).sum(axis=1)

    def conditional_cdf(self, t_L, t) -> np.ndarray:
        return -np.expm1(-self.cumulative_hazard(t_L, t))

    def solve_event_times(self, t_L, horizon, E, tol: float = ROOT_TOL):
        """Solve H(t_L, T) = E for every subject.

        Returns ``(times, censored)``; subjects with H(t_L, horizon) < E get
        ``times = horizon`` and ``censored = True``. The root is bracketed
        within one knot-delimited segment and refined by Illinois regula falsi
        with bisection safeguards.
        """
        n = self.n
        t_L = np.broadcast_to(np.asarray(t_L, float), (n,)).copy()
        horizon = np.broadcast_to(np.asarray(horizon, float), (n,)).copy()
        E = np.broadcast_to(np.asarray(E, float), (n,)).copy()
        if np.any(horizon <= t_L):
            raise ValueError("horizon must exceed t_L")
        lo, hi = _segments(t_L, horizon, self.breakpoints)
        seg = self._segment_integrals(lo, hi)
        cum = np.concatenate([np.zeros((n, 1)), np.cumsum(seg, axis=1)], axis=1)
        censored = cum[:, -1] < E
        times = horizon.copy()
        act = np.nonzero(~censored)[0]
        if act.size == 0:
            return times, censored
        # first segment whose cumulative end reaches E
        j = np.argmax(cum[act, 1:] >= E[act, None], axis=1)
        a = lo[act, j]
        b = hi[act, j]
        target = E[act] - cum[act, j]
        fa = -target
        fb = seg[act, j] - target
        times[act] = self._illinois(act, a, b, fa, fb, target, tol)
        return times, censored

    def _restrict(self, idx) -> "SubjectBatch":
        out = SubjectBatch.__new__(SubjectBatch)
        out.__dict__.update(self.__dict__)
        out.n = len(idx)
        out.b = self.b[idx]
        out.W = self.W[idx]
        out.Xc = self.Xc[idx]
        out.coef = self.coef[idx]
        out.cov_part = self.cov_part[idx]
        out.surv_lp = self.surv_lp[idx]
        return out

    def _partial(self, sub, a, x):
        s, w = _nodes(a[:, None], x[:, None], _GL)
        return (w * sub.hazard(s)).sum(axis=1)

    def _illinois(self, idx, a, b, fa, fb, target, tol, max_iter: int = 200):
        sub = self._restrict(idx)
        a = a.copy(); b = b.copy(); fa = fa.copy(); fb = fb.copy()
        seg_a = a.copy()
        x = 0.5 * (a + b)
        side = np.zeros(a.size, dtype=int)
        width_prev = b - a
        for it in range(max_iter):
            open_ = (b - a) > tol
            if not open_.any():
                break
            k = np.nonzero(open_)[0]
            denom = fb[k] - fa[k]
            xk = np.where(denom > 0, b[k] - fb[k] * (b[k] - a[k]) / np.where(denom > 0, denom, 1.0),
                          0.5 * (a[k] + b[k]))
            # bisection every third step if the bracket is not shrinking fast enough
            if it % 3 == 2:
                slow = (b[k] - a[k]) > 0.5 * width_prev[k]
                xk = np.where(slow, 0.5 * (a[k] + b[k]), xk)
                width_prev[k] = b[k] - a[k]
            xk = np.clip(xk, a[k], b[k])
            fx = self._partial(sub._restrict(k), seg_a[k], xk) - target[k]
            x[k] = xk
            done = fx == 0
            left = fx < 0
            # fx < 0: root is right of x
            na, nb = a[k].copy(), b[k].copy()
            nfa, nfb = fa[k].copy(), fb[k].copy()
            na[left] = xk[left]; nfa[left] = fx[left]
            nb[~left] = xk[~left]; nfb[~left] = fx[~left]
            # Illinois: halve the retained endpoint value when the same side repeats
            s_new = np.where(left, -1, 1)
            rep = side[k] == s_new
            nfb[left & rep] *= 0.5
            nfa[~left & rep] *= 0.5
            side[k] = s_new
            na[done] = xk[done]; nb[done] = xk[done]
            a[k], b[k], fa[k], fb[k] = na, nb, nfa, nfb
        return np.where(b - a <= tol, 0.5 * (a + b), x)


class NodeCache:
    """Frozen quadrature design for integrals of the hazard over [t0_i, t1_i].

    Used wherever the integration limits stay fixed while parameters change
    (MCMC over theta or b). The log-hazard at each node is linear in
    (gamma_h0, gamma, alpha * coefficients), so all the expensive basis
    evaluations happen once here.
    """

    def __init__(self, spec: ModelSpec, t0, t1, event_at=None):
        if spec.baseline is None:
            raise ValueError("ModelSpec baseline must be resolved")
        t0 = np.asarray(t0, float)
        t1 = np.asarray(t1, float)
        n = t0.size
        self.spec = spec
        self.n = n
        lo, hi = _segments(t0, t1, spec.quadrature_breakpoints())
        s, w = _nodes(lo, hi, _GL)
        keep = np.any(w > 0, axis=0)
        s, w = s[:, keep], w[:, keep]
        self.nodes = s
        self.weights = w
        K = s.shape[1]
        self.F = form_design(spec, s)                                   # (n, K, c)
        self.B = spec.baseline.evaluate(s.ravel(), clamp=True).reshape(n, K, spec.baseline.n_basis)
        self.form_mult = 1.0 if spec.functional_form.uses_covariates else 0.0
        if event_at is not None:
            te = np.asarray(event_at, float)
            self.F_event = form_design(spec, te[:, None])[:, 0, :]
            self.B_event = spec.baseline.evaluate(te, clamp=True)
        else:
            self.F_event = self.B_event = None

    def subset(self, idx) -> "NodeCache":
        out = NodeCache.__new__(NodeCache)
        out.__dict__.update(self.__dict__)
        out.n = len(idx)
        for name in ("nodes", "weights", "F", "B", "F_event", "B_event"):
            v = getattr(self, name)
            if v is not None:
                setattr(out, name, v[idx])
        return out

    def form_at_nodes(self, coef, cov_part) -> np.ndarray:
        return np.einsum("nkc,nc->nk", self.F, coef) + self.form_mult * cov_part[:, None]

    def form_at_event(self, coef, cov_part) -> np.ndarray:
        return np.einsum("nc,nc->n", self.F_event, coef) + self.form_mult * cov_part

    def cumhaz(self, gamma_h0, surv_lp, alpha, form_nodes) -> np.ndarray:
        lh = self.B @ gamma_h0 + surv_lp[:, None] + alpha * form_nodes
        return np.einsum("nk,nk->n", self.weights, np.exp(lh))

    def log_hazard_event(self, gamma_h0, surv_lp, alpha, form_event) -> np.ndarray:
        return self.B_event @ gamma_h0 + surv_lp + alpha * form_event


# ------------------------------------------------------------------ scalar API


@dataclass
class SubjectState:
    """One subject's covariates and random effects under a parameter draw."""

    spec: ModelSpec
    draw: Draw
    random_effects: np.ndarray
    survival_covariates: Mapping[str, float] | None = None
    fixed_covariates: Mapping[str, float] | None = None

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.random_effects, float))
        if b.size != self.spec.n_random:
            raise ValueError(f"random_effects has dimension {b.size}, spec needs {self.spec.n_random}")
        self.random_effects = b

    def batch(self) -> SubjectBatch:
        sc = self.survival_covariates or {}
        fc = self.fixed_covariates or {}
        W = np.array([[sc[k] for k in self.spec.survival_covariates]]) if self.spec.survival_covariates else None
        Xc = np.array([[fc[k] for k in self.spec.fixed_covariates]]) if self.spec.fixed_covariates else None
        return SubjectBatch(self.spec, self.draw, W=W, Xc=Xc, b=self.random_effects[None, :], n=1)


def linear_predictor(state: SubjectState, t: float, derivative_order: int = 0) -> float:
    if t < 0:
        raise ValueError("t must be nonnegative")
    return float(state.batch().eta(np.array([t]), derivative_order)[0])


def functional_form_value(state: SubjectState, t: float) -> float:
    if t < 0:
        raise ValueError("t must be nonnegative")
    return float(state.batch().form_value(np.array([t]))[0])


def hazard(state: SubjectState, t: float) -> float:
    if t < 0:
        raise ValueError("t must be nonnegative")
    return float(state.batch().hazard(np.array([t]))[0])


def cumulative_hazard(state: SubjectState, t0: float, t1: float) -> float:
    if t0 < 0 or t1 < t0:
        raise ValueError("need 0 <= t0 <= t1")
    return float(state.batch().cumulative_hazard(t0, t1)[0])


def conditional_event_cdf(state: SubjectState, t_L: float, t: float) -> float:
    if t_L < 0 or t < t_L:
        raise ValueError("need t >= t_L >= 0")
    return float(state.batch().conditional_cdf(t_L, t)[0])


@dataclass(frozen=True)
class EventDraw:
    time: float
    censored_at_horizon: bool
    exp_draw: float


def simulate_event_time(state: SubjectState, t_L: float, horizon: float, rng) -> EventDraw:
    """Inverse-transform draw of T > t_L; returns a horizon-censored marker if H(t_L, horizon) < E."""
    if not horizon > t_L:
        raise ValueError("horizon must exceed t_L")
    E = float(rng.exponential())
    times, cens = state.batch().solve_event_times(t_L, horizon, E)
    return EventDraw(float(times[0]), bool(cens[0]), E)
