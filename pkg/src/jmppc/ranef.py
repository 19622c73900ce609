"""Random effects: prior draws and Metropolis-Hastings draws from the conditional posterior.

The conditional target for subject i given a parameter draw is

    log p(y_i | b) - H_i(0, t_L) + delta_i * log h_i(t_L) + log N(b; 0, D)

where only measurements at times <= t_L enter. ``ConditionalTarget``
evaluates it for all subjects at once so that one vectorized random-walk
chain per subject can run in lockstep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import SubjectRecord
from .model import Draw, ModelSpec
from .survival import NodeCache

LOG_2PI = math.log(2 * math.pi)


class SamplerError(RuntimeError):
    pass


@dataclass(frozen=True)
class MHConfig:
    """Random-walk Metropolis-Hastings settings.

    The proposal covariance is ``proposal_scale**2 / q`` times the Gaussian
    conditional covariance of b given the longitudinal data; with ``adapt`` the
    scale follows a Robbins-Monro recursion toward ``target_acceptance``
    during burn-in and is frozen afterwards.
    """

    n_iterations: int = 1500
    burn_in: int = 500
    thinning: int = 5
    proposal_scale: float = 2.38
    adapt: bool = True
    target_acceptance: float = 0.234

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ValueError("n_iterations must be positive")
        if not 0 <= self.burn_in < self.n_iterations:
            raise ValueError("burn-in exceeds iterations")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.proposal_scale <= 0:
            raise ValueError("proposal_scale must be positive")
        if not 0 < self.target_acceptance < 1:
            raise ValueError("target_acceptance must be in (0, 1)")

    @property
    def n_kept(self) -> int:
        return len(range(self.burn_in, self.n_iterations, self.thinning))

    @classmethod
    def from_dict(cls, d: dict) -> "MHConfig":
        return cls(**d)


def cholesky_or_raise(D, draw_index: Optional[int] = None) -> np.ndarray:
    D = np.asarray(D, float)
    where = f" in draw {draw_index}" if draw_index is not None else ""
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise SamplerError(f"D{where} must be a square matrix")
    if not np.allclose(D, D.T, rtol=1e-8, atol=1e-10):
        raise SamplerError(f"D{where} is not symmetric")
    try:
        return np.linalg.cholesky(D)
    except np.linalg.LinAlgError:
        raise SamplerError(f"D{where} is not positive definite") from None


def sample_prior_random_effects(D, rng, size: Optional[int] = None,
                                draw_index: Optional[int] = None) -> np.ndarray:
    """Draw b ~ N(0, D) through the Cholesky factor; ``size`` draws give a (size, q) array."""
    L = cholesky_or_raise(D, draw_index)
    q = L.shape[0]
    if size is None:
        return L @ rng.standard_normal(q)
    return rng.standard_normal((size, q)) @ L.T


def _group_sum(idx, values, n):
    """Sum rows of ``values`` (N, ...) by group index into an (n, ...) array."""
    values = np.asarray(values, float)
    flat = values.reshape(values.shape[0], int(np.prod(values.shape[1:])))
    out = np.empty((n, flat.shape[1]))
    for j in range(flat.shape[1]):
        out[:, j] = np.bincount(idx, weights=flat[:, j], minlength=n)
    return out.reshape((n,) + values.shape[1:])


class ConditionalTarget:
    """Log conditional density of the random effects for a batch of subjects.

    Parameters
    ----------
    spec : ModelSpec
        With a resolved baseline.
    subject, times, values : arrays
        Pooled longitudinal rows (subject index 0..n-1); values on the model
        scale. Rows after ``t_L`` of their subject must already be removed.
    t_L : (n,) array
        Upper limit of the cumulative hazard integral.
    delta : (n,) array
        1 adds the log-hazard at ``t_L``.
    W, Xc : survival and longitudinal baseline covariates.
    """

    def __init__(self, spec: ModelSpec, subject, times, values, t_L, delta, W=None, Xc=None,
                 survival: bool = True):
        self.spec = spec
        t_L = np.asarray(t_L, float)
        n = t_L.size
        self.n = n
        self.q = spec.n_random
        self.subject = np.asarray(subject, dtype=np.int64)
        self.times = np.asarray(times, float)
        self.values = np.asarray(values, float)
        self.delta = np.asarray(delta, dtype=float)
        self.W = np.zeros((n, 0)) if W is None else np.asarray(W, float).reshape(n, -1)
        self.Xc = np.zeros((n, 0)) if Xc is None else np.asarray(Xc, float).reshape(n, -1)
        T = spec.time_basis.evaluate(self.times)
        self.X = np.hstack([T, self.Xc[self.subject]]) if self.Xc.shape[1] else T
        self.Z = T[:, : self.q]
        self.n_obs = np.bincount(self.subject, minlength=n)
        self.ZtZ = _group_sum(self.subject, self.Z[:, :, None] * self.Z[:, None, :], n)
        self.survival = survival
        self.cache = None
        if survival:
            self.cache = NodeCache(spec, np.zeros(n), t_L, event_at=t_L if self.delta.any() else None)
        self.draw = None

    def set_draw(self, draw: Draw, draw_index: Optional[int] = None) -> "ConditionalTarget":
        spec = self.spec
        nt = spec.n_time
        self.draw = draw
        self.sigma2 = draw.sigma ** 2
        self.L = cholesky_or_raise(draw.D, draw_index)
        self.Dinv = np.linalg.inv(draw.D)
        self.logdetD = 2 * np.sum(np.log(np.diag(self.L)))
        self.resid0 = self.values - self.X @ draw.beta
        self.Ztr = _group_sum(self.subject, self.Z * self.resid0[:, None], self.n)
        self.coef0 = np.tile(draw.beta[:nt], (self.n, 1))
        self.cov_part = self.Xc @ draw.beta[nt:] if self.Xc.shape[1] else np.zeros(self.n)
        self.surv_lp = self.W @ draw.gamma if self.W.shape[1] else np.zeros(self.n)
        return self

    # -- pieces ------------------------------------------------------------
    def longitudinal(self, b) -> np.ndarray:
        r = self.resid0 - np.einsum("lq,lq->l", self.Z, b[self.subject])
        ss = np.bincount(self.subject, weights=r * r, minlength=self.n)
        return -0.5 * ss / self.sigma2 - 0.5 * self.n_obs * (LOG_2PI + math.log(self.sigma2))

    def prior(self, b) -> np.ndarray:
        z = np.linalg.solve(self.L, b.T)
        return -0.5 * np.sum(z * z, axis=0) - 0.5 * (self.q * LOG_2PI + self.logdetD)

    def survival_part(self, b) -> np.ndarray:
        if not self.survival:
            return np.zeros(self.n)
        d = self.draw
        coef = self.coef0.copy()
        coef[:, : self.q] += b
        fn = self.cache.form_at_nodes(coef, self.cov_part)
        with np.errstate(over="ignore"):
            out = -self.cache.cumhaz(d.gamma_h0, self.surv_lp, d.alpha, fn)
        if self.cache.F_event is not None:
            fe = self.cache.form_at_event(coef, self.cov_part)
            lh = self.cache.log_hazard_event(d.gamma_h0, self.surv_lp, d.alpha, fe)
            out = out + np.where(self.delta > 0, lh, 0.0)
        return out

    def __call__(self, b) -> np.ndarray:
        b = np.asarray(b, float).reshape(self.n, self.q)
        out = self.longitudinal(b) + self.prior(b) + self.survival_part(b)
        return np.where(np.isfinite(out), out, -np.inf)

    # -- Gaussian approximation from the longitudinal part -------------------
    def conjugate(self):
        """Mean and covariance of b under the longitudinal likelihood and the prior only."""
        prec = self.ZtZ / self.sigma2 + self.Dinv[None]
        cov = np.linalg.inv(prec)
        cov = 0.5 * (cov + np.swapaxes(cov, 1, 2))
        mean = np.einsum("nij,nj->ni", cov, self.Ztr / self.sigma2)
        return mean, cov


@dataclass
class MHResult:
    draws: np.ndarray        # (n_kept, n, q)
    acceptance: np.ndarray   # (n,) acceptance rate after burn-in
    scale: np.ndarray        # (n,) final proposal scale
    last: np.ndarray         # (n, q) final state


class BatchSampler:
    """Lockstep random-walk MH over independent per-subject targets."""

    def __init__(self, target: ConditionalTarget, config: MHConfig = MHConfig(), b0=None, cov=None):
        self.target = target
        self.config = config
        mean, ccov = target.conjugate()
        self.b = mean.copy() if b0 is None else np.array(b0, float)
        cov = ccov if cov is None else cov
        self.chol = np.linalg.cholesky(cov)
        q = target.q
        self.log_scale = np.full(target.n, math.log(config.proposal_scale / math.sqrt(q)))
        self.lp = target(self.b)
        if not np.all(np.isfinite(self.lp)):
            # fall back to the prior mean where the conjugate start is not supported
            bad = ~np.isfinite(self.lp)
            self.b[bad] = 0.0
            self.lp = target(self.b)
        self.n_steps = 0

    def step(self, rng, adapt_gain: float = 0.0) -> np.ndarray:
        n, q = self.b.shape
        z = rng.standard_normal((n, q))
        prop = self.b + np.exp(self.log_scale)[:, None] * np.einsum("nij,nj->ni", self.chol, z)
        lp_prop = self.target(prop)
        log_u = np.log(rng.random(n))
        with np.errstate(invalid="ignore"):
            log_ratio = np.where(np.isfinite(lp_prop), lp_prop - self.lp, -np.inf)
        acc = log_u < log_ratio
        self.b[acc] = prop[acc]
        self.lp[acc] = lp_prop[acc]
        if adapt_gain > 0:
            a = np.exp(np.minimum(log_ratio, 0.0))
            self.log_scale += adapt_gain * (a - self.config.target_acceptance)
        self.n_steps += 1
        return acc

    def run(self, rng) -> MHResult:
        cfg = self.config
        n, q = self.b.shape
        kept = []
        acc_burn = np.zeros(n)
        acc_after = np.zeros(n)
        for it in range(cfg.n_iterations):
            gain = (it + 1) ** -0.6 if (cfg.adapt and it < cfg.burn_in) else 0.0
            acc = self.step(rng, gain)
            if it < cfg.burn_in:
                acc_burn += acc
            else:
                acc_after += acc
                if (it - cfg.burn_in) % cfg.thinning == 0:
                    kept.append(self.b.copy())
        if cfg.burn_in > 0 and np.any(acc_burn == 0):
            bad = np.nonzero(acc_burn == 0)[0].tolist()
            raise SamplerError(
                f"zero acceptance during burn-in for subject index(es) {bad[:10]}; "
                "try a smaller proposal_scale (or a larger one if the target is very flat)")
        n_after = cfg.n_iterations - cfg.burn_in
        return MHResult(np.array(kept), acc_after / n_after, np.exp(self.log_scale), self.b.copy())


def target_for_subjects(spec: ModelSpec, subjects, t_L, delta, survival: bool = True) -> ConditionalTarget:
    """Build a ConditionalTarget from SubjectRecords, keeping measurements at times <= t_L."""
    t_L = np.asarray(t_L, float).reshape(-1)
    rows_s, rows_t, rows_y = [], [], []
    for i, s in enumerate(subjects):
        keep = s.times <= t_L[i]
        rows_s.append(np.full(int(keep.sum()), i))
        rows_t.append(s.times[keep])
        rows_y.append(spec.transform_outcome(s.values[keep]))
    W = np.array([[s.covariates[k] for k in spec.survival_covariates] for s in subjects]).reshape(len(subjects), -1)
    Xc = np.array([[s.covariates[k] for k in spec.fixed_covariates] for s in subjects]).reshape(len(subjects), -1)
    return ConditionalTarget(spec, np.concatenate(rows_s).astype(np.int64), np.concatenate(rows_t),
                             np.concatenate(rows_y), t_L, delta, W, Xc, survival)


def log_conditional_target(b, subject: SubjectRecord, delta: int, t_L: float, spec: ModelSpec,
                           draw: Draw) -> float:
    """Unnormalized log density of b for one subject (measurements after ``t_L`` are ignored)."""
    if np.any(subject.times > t_L):
        raise ValueError("subject has measurements after t_L; truncate it first")
    tgt = target_for_subjects(spec, [subject], [t_L], [delta]).set_draw(draw)
    return float(tgt(np.atleast_2d(np.asarray(b, float)))[0])


def mh_sample_conditional(subject: SubjectRecord, delta: int, t_L: float, spec: ModelSpec, draw: Draw,
                          config: MHConfig = MHConfig(), rng=None) -> np.ndarray:
    """Retained MH draws (n_kept, q) of one subject's random effects."""
    rng = np.random.default_rng() if rng is None else rng
    tgt = target_for_subjects(spec, [subject], [t_L], [delta]).set_draw(draw)
    return BatchSampler(tgt, config).run(rng).draws[:, 0, :]
