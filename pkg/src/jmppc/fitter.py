"""Metropolis-within-Gibbs sampler for the Gaussian joint model, and posterior-draw storage.

Blocks per iteration:

* random effects b_i: per-subject adaptive random-walk MH (survival-aware);
* random-effect means beta_R: Gibbs in the centred parameterization
  m_i = beta_R + b_i, which leaves the likelihood untouched;
* remaining fixed effects: independence proposal from their longitudinal
  full conditional, corrected by the survival likelihood ratio;
* sigma^2: inverse-Gamma Gibbs; D: inverse-Wishart Gibbs;
* (gamma, alpha, gamma_h0): adaptive random-walk MH started at the
  penalized maximum found by Newton's method;
* tau: Gamma Gibbs from the penalized prior.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import invwishart

from .data import JointDataset, fmt
from .model import Draw, ModelSpec, SCHEMA_VERSION
from .ranef import ConditionalTarget, SamplerError, cholesky_or_raise


class FitError(RuntimeError):
    pass


class DrawsError(ValueError):
    pass


# ------------------------------------------------------------------ penalty


@dataclass(frozen=True)
class PenaltyMatrix:
    K: np.ndarray
    Theta: np.ndarray
    order: int

    @property
    def rank(self) -> int:
        return self.K.shape[0] - self.order


def difference_penalty(P: int, r: int) -> PenaltyMatrix:
    """K = Theta_r' Theta_r with Theta_r the r-th order difference matrix (rank P - r)."""
    if r < 1:
        raise ValueError("penalty order must be >= 1")
    if r >= P:
        raise ValueError(f"penalty order r={r} must be smaller than the basis size P={P}")
    Theta = np.diff(np.eye(P), n=r, axis=0)
    return PenaltyMatrix(Theta.T @ Theta, Theta, r)


def log_penalized_prior(gamma_h0, tau: float, K: PenaltyMatrix) -> float:
    """(rank/2) log tau - (tau/2) gamma' K gamma, dropping constants."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    g = np.asarray(gamma_h0, float)
    if g.size != K.K.shape[0]:
        raise ValueError("gamma_h0 length does not match the penalty matrix")
    return 0.5 * K.rank * math.log(tau) - 0.5 * tau * float(g @ K.K @ g)


# ------------------------------------------------------------------ configs


@dataclass(frozen=True)
class PriorConfig:
    """Prior hyperparameters.

    Normal N(0, sd^2) priors on beta, gamma, alpha; the baseline coefficients
    get the penalized prior plus a weak N(0, gh0_sd^2) ridge that keeps the
    null space of K proper. sigma^2 ~ IG(sigma_shape, sigma_rate);
    D ~ IW(q + D_df_extra, I); tau ~ Gamma(tau_shape, tau_rate) where
    ``tau_parameterization`` says whether the second number is a rate or a
    scale.
    """

    beta_sd: float = 100.0
    gamma_sd: float = 100.0
    alpha_sd: float = 100.0
    gh0_sd: float = 100.0
    sigma_shape: float = 0.01
    sigma_rate: float = 0.01
    D_df_extra: int = 2
    tau_shape: float = 5.0
    tau_rate: float = 0.05
    tau_parameterization: str = "rate"

    def __post_init__(self):
        for name in ("beta_sd", "gamma_sd", "alpha_sd", "gh0_sd", "sigma_shape", "sigma_rate",
                     "tau_shape", "tau_rate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"prior {name} must be positive")
        if self.D_df_extra < 1:
            raise ValueError("D_df_extra must be >= 1")
        if self.tau_parameterization not in ("rate", "scale"):
            raise ValueError("tau_parameterization must be 'rate' or 'scale'")

    @property
    def tau_rate_value(self) -> float:
        return self.tau_rate if self.tau_parameterization == "rate" else 1.0 / self.tau_rate


@dataclass(frozen=True)
class McmcConfig:
    n_iter: int = 2000
    burn_in: int = 1000
    thin: int = 5
    seed: int = 0
    survival: bool = True
    b_steps: int = 2
    surv_steps: int = 3

    def __post_init__(self):
        if self.n_iter < 1 or self.thin < 1:
            raise ValueError("n_iter and thin must be positive")
        if self.burn_in >= self.n_iter:
            raise ValueError("burn-in exceeds iterations")


# ------------------------------------------------------------------ draws


@dataclass
class PosteriorDraws:
    """MCMC sample of theta with optional per-subject random effects (S draws)."""

    spec: ModelSpec
    beta: np.ndarray
    sigma: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    gamma_h0: np.ndarray
    D: np.ndarray
    tau: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    subject_ids: Optional[list] = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        S = np.atleast_1d(np.asarray(self.sigma, float)).size
        self.sigma = np.asarray(self.sigma, float).reshape(S)
        self.beta = np.asarray(self.beta, float).reshape(S, -1)
        self.gamma = np.asarray(self.gamma, float).reshape(S, -1)
        self.alpha = np.asarray(self.alpha, float).reshape(S)
        self.gamma_h0 = np.asarray(self.gamma_h0, float).reshape(S, -1)
        self.D = np.asarray(self.D, float)
        if self.D.ndim == 2:
            self.D = self.D[None]
        if self.tau is not None:
            self.tau = np.asarray(self.tau, float).reshape(S)
        self._validate()

    def _validate(self):
        spec = self.spec
        S = self.n_draws
        if self.beta.shape[1] != spec.n_fixed:
            raise DrawsError(f"beta has {self.beta.shape[1]} columns, spec needs {spec.n_fixed}")
        if self.gamma.shape[1] != len(spec.survival_covariates):
            raise DrawsError("gamma columns do not match the survival covariates")
        if spec.baseline is None:
            raise DrawsError("posterior draws need a spec with a resolved baseline basis")
        if self.gamma_h0.shape[1] != spec.baseline.n_basis:
            raise DrawsError(f"gamma_h0 has {self.gamma_h0.shape[1]} columns, baseline has "
                             f"{spec.baseline.n_basis}")
        if self.D.shape != (S, spec.n_random, spec.n_random):
            raise DrawsError(f"D must have shape ({S}, {spec.n_random}, {spec.n_random})")
        for s in range(S):
            if not self.sigma[s] > 0:
                raise DrawsError(f"sigma must be positive in draw {s}")
            try:
                cholesky_or_raise(self.D[s], s)
            except SamplerError as e:
                raise DrawsError(str(e)) from None
            if self.tau is not None and not (self.tau[s] > 0 or np.isnan(self.tau[s])):
                raise DrawsError(f"tau must be positive in draw {s}")
        if self.b is not None:
            self.b = np.asarray(self.b, float)
            if self.b.ndim != 3 or self.b.shape[0] != S or self.b.shape[2] != spec.n_random:
                raise DrawsError("b draws must have shape (n_draws, n_subjects, q)")

    @property
    def n_draws(self) -> int:
        return self.sigma.size

    @property
    def has_random_effects(self) -> bool:
        return self.b is not None

    def draw(self, s: int) -> Draw:
        tau = None if self.tau is None or np.isnan(self.tau[s]) else float(self.tau[s])
        return Draw(self.beta[s], self.sigma[s], self.gamma[s], self.alpha[s], self.gamma_h0[s],
                    self.D[s], tau)

    @classmethod
    def from_draw(cls, spec: ModelSpec, draw: Draw, b=None, subject_ids=None) -> "PosteriorDraws":
        """Single-draw container (oracle mode)."""
        return cls(spec, draw.beta[None], np.array([draw.sigma]), draw.gamma[None],
                   np.array([draw.alpha]), draw.gamma_h0[None], draw.D[None],
                   None if draw.tau is None else np.array([draw.tau]),
                   None if b is None else np.asarray(b, float)[None], subject_ids)

    def summary(self) -> dict:
        """Posterior means and equal-tailed 95% intervals of the scalar parameters."""
        out = {}
        cols = self._columns()
        for name, v in cols.items():
            out[name] = {"mean": float(np.mean(v)), "lo": float(np.quantile(v, 0.025)),
                         "hi": float(np.quantile(v, 0.975))}
        return out

    # -- persistence -------------------------------------------------------
    def _columns(self) -> dict:
        spec = self.spec
        cols = {}
        for j in range(self.beta.shape[1]):
            cols[f"beta.{j + 1}"] = self.beta[:, j]
        cols["sigma"] = self.sigma
        for j, name in enumerate(spec.survival_covariates):
            cols[f"gamma.{name}"] = self.gamma[:, j]
        cols["alpha.1"] = self.alpha
        for j in range(self.gamma_h0.shape[1]):
            cols[f"gh0.{j + 1}"] = self.gamma_h0[:, j]
        q = spec.n_random
        for i in range(q):
            for j in range(q):
                cols[f"D.{i + 1}.{j + 1}"] = self.D[:, i, j]
        if self.tau is not None:
            cols["tau"] = self.tau
        return cols

    def save(self, directory) -> Path:
        """Write draws.csv, b_draws.csv (when present) and spec.json into ``directory``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        cols = self._columns()
        names = list(cols)
        with open(d / "draws.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for s in range(self.n_draws):
                w.writerow([fmt(cols[n][s]) for n in names])
        if self.b is not None:
            ids = self.subject_ids or [str(i + 1) for i in range(self.b.shape[1])]
            with open(d / "b_draws.csv", "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["draw", "subject"] + [f"b.{k + 1}" for k in range(self.b.shape[2])])
                for s in range(self.n_draws):
                    for i, sid in enumerate(ids):
                        w.writerow([s, sid] + [fmt(v) for v in self.b[s, i]])
        with open(d / "spec.json", "w", encoding="utf-8") as fh:
            fh.write(self.spec.to_json())
        return d


def load_posterior_draws(path, spec: Optional[ModelSpec] = None) -> PosteriorDraws:
    """Read draws written by :meth:`PosteriorDraws.save` (a directory or its draws.csv).

    ``spec`` overrides the spec.json stored next to the draws.
    """
    p = Path(path)
    directory = p if p.is_dir() else p.parent
    draws_csv = p / "draws.csv" if p.is_dir() else p
    if spec is None:
        sp = directory / "spec.json"
        if not sp.exists():
            raise DrawsError(f"no spec.json next to {draws_csv}; pass spec explicitly")
        spec = ModelSpec.from_dict(json.loads(sp.read_text(encoding="utf-8")))
    with open(draws_csv, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise DrawsError("draws file has no rows")
    header, body = rows[0], rows[1:]
    try:
        data = np.array([[float(x) for x in r] for r in body])
    except ValueError as e:
        raise DrawsError(f"non-numeric entry in draws file: {e}") from None
    if data.shape[1] != len(header):
        raise DrawsError("ragged draws file")
    col = {h: data[:, j] for j, h in enumerate(header)}

    def block(prefix, names):
        missing = [n for n in names if f"{prefix}{n}" not in col]
        if missing:
            raise DrawsError(f"draws file lacks columns {[prefix + m for m in missing]} "
                             "(dimension mismatch with the model spec)")
        return np.stack([col[f"{prefix}{n}"] for n in names], axis=1) if names else np.zeros((len(body), 0))

    extra_beta = [h for h in header if h.startswith("beta.") and int(h.split(".")[1]) > spec.n_fixed]
    if extra_beta:
        raise DrawsError(f"draws file has more beta columns than the spec allows ({spec.n_fixed})")
    q = spec.n_random
    beta = block("beta.", [str(j + 1) for j in range(spec.n_fixed)])
    gamma = block("gamma.", list(spec.survival_covariates))
    if spec.baseline is None:
        raise DrawsError("spec must carry a resolved baseline basis")
    gh0 = block("gh0.", [str(j + 1) for j in range(spec.baseline.n_basis)])
    D = block("D.", [f"{i + 1}.{j + 1}" for i in range(q) for j in range(q)]).reshape(-1, q, q)
    if "sigma" not in col or "alpha.1" not in col:
        raise DrawsError("draws file lacks sigma or alpha.1")
    tau = col.get("tau")
    b = None
    ids = None
    bfile = directory / "b_draws.csv"
    if bfile.exists():
        with open(bfile, newline="", encoding="utf-8") as fh:
            brows = list(csv.reader(fh))
        bh = brows[0]
        if len(bh) != 2 + q:
            raise DrawsError("b draws file has the wrong random-effect dimension")
        ids = []
        seen = set()
        vals = []
        for r in brows[1:]:
            if r[1] not in seen:
                seen.add(r[1])
                ids.append(r[1])
            vals.append([float(x) for x in r[2:]])
        S = len(body)
        if len(vals) != S * len(ids):
            raise DrawsError("b draws file is not a complete (draw x subject) table")
        b = np.array(vals).reshape(S, len(ids), q)
    return PosteriorDraws(spec, beta, col["sigma"], gamma, col["alpha.1"], gh0, D, tau, b, ids)


# ------------------------------------------------------------------ fitter


class _SurvivalBlock:
    """Log posterior of (gamma, alpha, gamma_h0) given the subject coefficients."""

    def __init__(self, cache, W, delta, priors: PriorConfig, penalty: PenaltyMatrix):
        self.cache = cache
        self.W = W
        self.delta = delta.astype(float)
        self.g = W.shape[1]
        self.P = cache.B.shape[2]
        self.penalty = penalty
        self.prec_diag = np.concatenate([
            np.full(self.g, priors.gamma_sd ** -2), [priors.alpha_sd ** -2],
            np.full(self.P, priors.gh0_sd ** -2)])

    def split(self, theta):
        g = self.g
        return theta[:g], theta[g], theta[g + 1:]

    def prior_prec(self, tau):
        Lam = np.diag(self.prec_diag)
        Lam[self.g + 1:, self.g + 1:] += tau * self.penalty.K
        return Lam

    def set_form(self, form_nodes, form_event):
        self.fn = form_nodes
        self.fe = form_event

    def loglik(self, theta) -> float:
        gamma, alpha, gh0 = self.split(theta)
        lp = self.W @ gamma
        with np.errstate(over="ignore"):
            H = self.cache.cumhaz(gh0, lp, alpha, self.fn)
        lh = self.cache.log_hazard_event(gh0, lp, alpha, self.fe)
        return float(np.sum(self.delta * lh) - np.sum(H))

    def logpost(self, theta, tau) -> float:
        v = self.loglik(theta) - 0.5 * float(theta @ self.prior_prec(tau) @ theta)
        return v if math.isfinite(v) else -math.inf

    def newton(self, theta, tau, max_iter: int = 100):
        """Penalized maximum and the negative Hessian there."""
        c = self.cache
        n, K = self.fn.shape
        A = np.concatenate([np.broadcast_to(self.W[:, None, :], (n, K, self.g)), self.fn[:, :, None], c.B],
                           axis=2)
        Ae = np.concatenate([self.W, self.fe[:, None], c.B_event], axis=1)
        Lam = self.prior_prec(tau)
        cur = self.logpost(theta, tau)
        negH = None
        for _ in range(max_iter):
            eta = A @ theta
            wexp = c.weights * np.exp(eta)
            grad = self.delta @ Ae - np.einsum("nk,nkd->d", wexp, A) - Lam @ theta
            negH = np.einsum("nk,nkd,nke->de", wexp, A, A) + Lam
            step = np.linalg.solve(negH, grad)
            t = 1.0
            while t > 1e-8:
                new = theta + t * step
                val = self.logpost(new, tau)
                if val >= cur:
                    break
                t *= 0.5
            else:
                break
            done = abs(val - cur) < 1e-10 * (1 + abs(cur))
            theta, cur = new, val
            if done:
                break
        eta = A @ theta
        wexp = c.weights * np.exp(eta)
        negH = np.einsum("nk,nkd,nke->de", wexp, A, A) + Lam
        return theta, negH


def _design(spec: ModelSpec, data: JointDataset):
    times = np.asarray(data.long_times)
    T = spec.time_basis.evaluate(times)
    Xc = data.covariate_matrix(spec.fixed_covariates) if spec.fixed_covariates else np.zeros((data.n, 0))
    X = np.hstack([T, Xc[data.long_subject]]) if Xc.shape[1] else T
    return X, Xc


def fit_joint_model(data: JointDataset, spec: ModelSpec, priors: PriorConfig = PriorConfig(),
                    mcmc: McmcConfig = McmcConfig()) -> PosteriorDraws:
    """Sample the joint posterior; returns thinned post-burn-in draws with aligned b_i draws."""
    rng = np.random.default_rng(mcmc.seed)
    n = data.n
    T_obs = np.asarray(data.event_times, float)
    delta = np.asarray(data.event_indicators)
    horizon = spec.horizon_factor * float(T_obs.max())
    spec = spec.resolve_baseline(T_obs, delta, horizon)
    q = spec.n_random
    nt = spec.n_time
    subj = np.asarray(data.long_subject)
    y = spec.transform_outcome(data.long_values)
    X, Xc = _design(spec, data)
    p = X.shape[1]
    if np.linalg.matrix_rank(X) < p:
        raise FitError("fixed-effects design is rank deficient (collinear columns)")
    W = data.covariate_matrix(spec.survival_covariates) if spec.survival_covariates else np.zeros((n, 0))
    F_idx = np.arange(q, p)
    XF = X[:, F_idx]

    target = ConditionalTarget(spec, subj, data.long_times, y, T_obs, delta, W, Xc, survival=True)
    cache = target.cache
    use_surv = mcmc.survival
    target.survival = use_surv
    penalty = difference_penalty(spec.baseline.n_basis, spec.penalty_order)
    sblock = _SurvivalBlock(cache, W, delta, priors, penalty)
    tau_rate = priors.tau_rate_value

    # ---- initial values
    beta = np.linalg.lstsq(X, y, rcond=None)[0]
    resid = y - X @ beta
    sigma2 = float(resid @ resid / max(len(y) - p, 1))
    D = np.eye(q)
    gamma = np.zeros(W.shape[1])
    alpha = 0.0
    gh0 = np.full(spec.baseline.n_basis, math.log(max(delta.sum(), 1) / T_obs.sum()))
    tau = priors.tau_shape / tau_rate

    def make_draw():
        return Draw(beta, math.sqrt(sigma2), gamma, alpha, gh0, D, tau)

    for _ in range(3):
        target.set_draw(make_draw())
        b, _ = target.conjugate()
        D = np.cov(b.T).reshape(q, q) + 1e-4 * np.eye(q)
    target.set_draw(make_draw())
    b, cov_b = target.conjugate()

    def coef_of(beta_, b_):
        c = np.tile(beta_[:nt], (n, 1))
        c[:, :q] += b_
        return c

    def cov_part_of(beta_):
        return Xc @ beta_[nt:] if Xc.shape[1] else np.zeros(n)

    def set_form():
        c = coef_of(beta, b)
        cp = cov_part_of(beta)
        sblock.set_form(cache.form_at_nodes(c, cp), cache.form_at_event(c, cp))

    theta_s = np.concatenate([gamma, [alpha], gh0])
    d_s = theta_s.size
    if use_surv:
        set_form()
        theta_s, negH = sblock.newton(theta_s, tau)
        prop_cov_s = np.linalg.inv(negH)
    else:
        prop_cov_s = np.eye(d_s)
    prop_chol_s = np.linalg.cholesky(0.5 * (prop_cov_s + prop_cov_s.T))
    log_scale_s = math.log(2.38 / math.sqrt(d_s))
    gamma, alpha, gh0 = sblock.split(theta_s)
    alpha = float(alpha) if use_surv else 0.0
    theta_s = np.concatenate([gamma, [alpha], gh0])
    log_scale_b = np.full(n, math.log(2.38 / math.sqrt(q)))
    hist_s = []

    kept = {k: [] for k in ("beta", "sigma", "gamma", "alpha", "gh0", "D", "tau", "b")}
    acc_b = np.zeros(n)
    acc_s = 0
    n_s = 0
    Dinv_prior_df = q + priors.D_df_extra
    beta_prec = priors.beta_sd ** -2

    for it in range(mcmc.n_iter):
        burning = it < mcmc.burn_in
        # ---- random effects
        target.set_draw(make_draw())
        _, cov_b = target.conjugate()
        chol_b = np.linalg.cholesky(cov_b)
        lp = target(b)
        for _ in range(mcmc.b_steps):
            z = rng.standard_normal((n, q))
            prop = b + np.exp(log_scale_b)[:, None] * np.einsum("nij,nj->ni", chol_b, z)
            lp_prop = target(prop)
            with np.errstate(invalid="ignore"):
                ratio = np.where(np.isfinite(lp_prop), lp_prop - lp, -np.inf)
            acc = np.log(rng.random(n)) < ratio
            b[acc] = prop[acc]
            lp[acc] = lp_prop[acc]
            if burning:
                log_scale_b += (it + 1) ** -0.6 * (np.exp(np.minimum(ratio, 0.0)) - 0.234)
            else:
                acc_b += acc
        if not np.all(np.isfinite(lp)):
            raise FitError(f"non-finite log posterior for random effects at iteration {it}")

        # ---- beta_R by centred Gibbs
        m = b + beta[:q]
        Dinv = np.linalg.inv(D)
        V = np.linalg.inv(n * Dinv + beta_prec * np.eye(q))
        mu = V @ (Dinv @ m.sum(axis=0))
        beta_R = mu + np.linalg.cholesky(0.5 * (V + V.T)) @ rng.standard_normal(q)
        beta = beta.copy()
        beta[:q] = beta_R
        b = m - beta_R

        # ---- remaining fixed effects
        if F_idx.size:
            Zb = np.einsum("lq,lq->l", target.Z, b[subj])
            r = y - X[:, :q] @ beta_R - Zb
            prec = XF.T @ XF / sigma2 + beta_prec * np.eye(F_idx.size)
            Vf = np.linalg.inv(prec)
            muf = Vf @ (XF.T @ r / sigma2)
            prop_f = muf + np.linalg.cholesky(0.5 * (Vf + Vf.T)) @ rng.standard_normal(F_idx.size)
            new_beta = beta.copy()
            new_beta[F_idx] = prop_f
            if use_surv:
                set_form()
                old_ll = sblock.loglik(theta_s)
                c = coef_of(new_beta, b)
                cp = cov_part_of(new_beta)
                sblock.set_form(cache.form_at_nodes(c, cp), cache.form_at_event(c, cp))
                new_ll = sblock.loglik(theta_s)
                if math.log(rng.random()) < new_ll - old_ll:
                    beta = new_beta
            else:
                beta = new_beta

        # ---- sigma^2
        Zb = np.einsum("lq,lq->l", target.Z, b[subj])
        r = y - X @ beta - Zb
        shape = priors.sigma_shape + 0.5 * len(y)
        rate = priors.sigma_rate + 0.5 * float(r @ r)
        sigma2 = rate / rng.gamma(shape)

        # ---- D
        S = b.T @ b + np.eye(q)
        D = np.atleast_2d(invwishart.rvs(df=Dinv_prior_df + n, scale=S, random_state=rng))
        D = 0.5 * (D + D.T)

        # ---- survival block
        if use_surv:
            set_form()
            cur = sblock.logpost(theta_s, tau)
            if not math.isfinite(cur):
                raise FitError(f"non-finite survival log posterior at iteration {it}")
            for _ in range(mcmc.surv_steps):
                prop = theta_s + math.exp(log_scale_s) * (prop_chol_s @ rng.standard_normal(d_s))
                val = sblock.logpost(prop, tau)
                ratio = val - cur if math.isfinite(val) else -math.inf
                if math.log(rng.random()) < ratio:
                    theta_s, cur = prop, val
                    if not burning:
                        acc_s += 1
                if burning:
                    log_scale_s += (it + 1) ** -0.6 * (math.exp(min(ratio, 0.0)) - 0.234)
                    hist_s.append(theta_s.copy())
                else:
                    n_s += 1
            if burning and it + 1 == mcmc.burn_in // 2 and len(hist_s) > 10 * d_s:
                emp = np.cov(np.array(hist_s[len(hist_s) // 2:]).T)
                emp = 0.5 * (emp + emp.T) + 1e-10 * np.eye(d_s)
                try:
                    prop_chol_s = np.linalg.cholesky(emp)
                    log_scale_s = math.log(2.38 / math.sqrt(d_s))
                except np.linalg.LinAlgError:
                    pass
            gamma, alpha, gh0 = sblock.split(theta_s)
            alpha = float(alpha)

        # ---- tau
        quad = float(gh0 @ penalty.K @ gh0)
        tau = rng.gamma(priors.tau_shape + 0.5 * penalty.rank) / (tau_rate + 0.5 * quad)

        if not burning and (it - mcmc.burn_in) % mcmc.thin == 0:
            kept["beta"].append(beta.copy())
            kept["sigma"].append(math.sqrt(sigma2))
            kept["gamma"].append(np.array(gamma, float).copy())
            kept["alpha"].append(alpha)
            kept["gh0"].append(np.array(gh0, float).copy())
            kept["D"].append(D.copy())
            kept["tau"].append(tau)
            kept["b"].append(b.copy())

    n_after = mcmc.n_iter - mcmc.burn_in
    diag = {
        "acceptance_b_mean": float(np.mean(acc_b / (n_after * mcmc.b_steps))),
        "acceptance_survival": float(acc_s / n_s) if n_s else None,
        "n_iter": mcmc.n_iter, "burn_in": mcmc.burn_in, "thin": mcmc.thin, "seed": mcmc.seed,
    }
    return PosteriorDraws(spec, np.array(kept["beta"]), np.array(kept["sigma"]), np.array(kept["gamma"]),
                          np.array(kept["alpha"]), np.array(kept["gh0"]), np.array(kept["D"]),
                          np.array(kept["tau"]), np.array(kept["b"]), list(data.ids), diag)
