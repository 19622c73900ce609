"""Replicated datasets under the posterior-posterior, posterior-prior, dynamic and cross-validated regimes.

Replicated longitudinal responses are always simulated at the subject's
observed visit times; event times are simulated without censoring up to a
horizon of ``spec.horizon_factor * max(T)``, beyond which they are marked as
horizon-truncated. Each replicate gets its own child of a ``SeedSequence``
so results do not depend on execution order.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .data import JointDataset, fmt, split_folds
from .fitter import McmcConfig, PosteriorDraws, PriorConfig, fit_joint_model
from .gof import LongSample
from .model import ModelSpec
from .ranef import BatchSampler, ConditionalTarget, MHConfig, cholesky_or_raise
from .survival import SubjectBatch

REGIMES = ("posterior_posterior", "posterior_prior", "dynamic", "cross_validated")


class ReplicationError(ValueError):
    pass


@dataclass
class Replicate:
    """One replicated dataset over the subjects ``subjects`` (indices into the observed data).

    ``long.subject`` indexes positions in ``subjects``.
    """

    index: int
    draw_index: object
    seed: list
    subjects: np.ndarray
    long: LongSample
    event_times: np.ndarray
    censored: np.ndarray
    horizon: float

    @property
    def status(self) -> np.ndarray:
        return (~self.censored).astype(int)


@dataclass
class ReplicatedData:
    regime: str
    replicates: list
    subject_ids: list
    seed: int
    t_L: Optional[float] = None
    info: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return len(self.replicates)

    def rep_matrix(self) -> np.ndarray:
        """(n_subjects, M) replicated event times (horizon for truncated ones)."""
        subs = self.replicates[0].subjects
        out = np.empty((subs.size, self.M))
        for m, r in enumerate(self.replicates):
            if not np.array_equal(r.subjects, subs):
                raise ReplicationError("replicates cover different subject sets")
            out[:, m] = r.event_times
        return out

    # -- persistence -------------------------------------------------------
    def save(self, directory) -> Path:
        """One CSV per replicate (long rows and event rows) plus manifest.json."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        manifest = {"schema_version": 1, "regime": self.regime, "t_L": self.t_L, "seed": self.seed,
                    "subject_ids": list(self.subject_ids), "info": self.info, "replicates": []}
        for r in self.replicates:
            name = f"rep_{r.index + 1:04d}.csv"
            with open(d / name, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["record", "subject", "time", "value", "censored"])
                ids = [self.subject_ids[i] for i in r.subjects]
                for j, t, v in zip(r.long.subject, r.long.times, r.long.values):
                    w.writerow(["long", ids[j], fmt(t), fmt(v), ""])
                for j, sid in enumerate(ids):
                    w.writerow(["event", sid, fmt(r.event_times[j]), "", int(r.censored[j])])
            manifest["replicates"].append({
                "file": name, "index": r.index, "draw_index": r.draw_index, "seed": r.seed,
                "horizon": r.horizon, "regime": self.regime, "t_L": self.t_L,
                "n_subjects": int(r.subjects.size)})
        with open(d / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)
        return d


def load_replicated_data(directory) -> ReplicatedData:
    d = Path(directory)
    man = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
    ids = man["subject_ids"]
    pos = {sid: i for i, sid in enumerate(ids)}
    reps = []
    for entry in man["replicates"]:
        with open(d / entry["file"], newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))[1:]
        ev = [r for r in rows if r[0] == "event"]
        subjects = np.array([pos[r[1]] for r in ev], dtype=np.int64)
        local = {sid: j for j, sid in enumerate(r[1] for r in ev)}
        lr = [r for r in rows if r[0] == "long"]
        long = LongSample(np.array([local[r[1]] for r in lr], dtype=np.int64),
                          np.array([float(r[2]) for r in lr]), np.array([float(r[3]) for r in lr]))
        reps.append(Replicate(entry["index"], entry["draw_index"], entry["seed"], subjects, long,
                              np.array([float(r[2]) for r in ev]),
                              np.array([r[4] == "1" for r in ev]), entry["horizon"]))
    return ReplicatedData(man["regime"], reps, ids, man["seed"], man.get("t_L"), man.get("info", {}))


# ------------------------------------------------------------------ helpers


def _child_seeds(seed: int, M: int):
    ss = np.random.SeedSequence(seed)
    return ss.spawn(M)


def _seed_record(child: np.random.SeedSequence) -> list:
    return [int(child.entropy), [int(k) for k in child.spawn_key]]


def cycle_draw_indices(S: int, M: int) -> list:
    """Spread M replicate draws evenly over S thinned posterior draws."""
    if M <= S:
        return [(m * S) // M for m in range(M)]
    return [m % S for m in range(M)]


@dataclass
class _Design:
    """Per-subject covariates and pooled observed rows for a subset of subjects."""

    spec: ModelSpec
    subjects: np.ndarray
    W: np.ndarray
    Xc: np.ndarray
    row_subject: np.ndarray     # local positions
    row_times: np.ndarray
    row_values: np.ndarray      # model scale
    T: np.ndarray
    delta: np.ndarray

    @classmethod
    def build(cls, data: JointDataset, spec: ModelSpec, subjects=None):
        subjects = np.arange(data.n) if subjects is None else np.asarray(subjects, dtype=np.int64)
        sub = [data.subjects[i] for i in subjects]
        W = np.array([[s.covariates[k] for k in spec.survival_covariates] for s in sub]).reshape(len(sub), -1)
        Xc = np.array([[s.covariates[k] for k in spec.fixed_covariates] for s in sub]).reshape(len(sub), -1)
        rs = np.concatenate([np.full(s.n_obs, j) for j, s in enumerate(sub)]).astype(np.int64)
        rt = np.concatenate([s.times for s in sub])
        rv = spec.transform_outcome(np.concatenate([s.values for s in sub]))
        return cls(spec, subjects, W, Xc, rs, rt, rv, np.array([s.event_time for s in sub]),
                   np.array([s.event_indicator for s in sub]))

    @property
    def n(self) -> int:
        return self.subjects.size

    def target(self, t_L, delta) -> ConditionalTarget:
        keep = self.row_times <= np.asarray(t_L)[self.row_subject]
        return ConditionalTarget(self.spec, self.row_subject[keep], self.row_times[keep],
                                 self.row_values[keep], t_L, delta, self.W, self.Xc)


def _simulate(des: _Design, draw, b, rows: np.ndarray, t_L, horizon, rng, truncate: bool):
    """y_rep at ``rows`` (boolean mask over des rows) and event times after ``t_L``."""
    n = des.n
    batch = SubjectBatch(des.spec, draw, W=des.W, Xc=des.Xc, b=b, n=n)
    E = rng.exponential(size=n)
    T, cens = batch.solve_event_times(np.broadcast_to(t_L, (n,)), np.full(n, horizon), E)
    rs = des.row_subject[rows]
    rt = des.row_times[rows]
    eta = _eta_rows(des.spec, draw, b, des.Xc, rs, rt)
    y = eta + draw.sigma * rng.standard_normal(rt.size)
    if truncate:
        keep = rt < T[rs]
        rs, rt, y = rs[keep], rt[keep], y[keep]
    return LongSample(rs, rt, y), T, cens


def _eta_rows(spec, draw, b, Xc, rs, rt):
    nt = spec.n_time
    Tm = spec.time_basis.evaluate(rt)
    coef = np.tile(draw.beta[:nt], (b.shape[0], 1))
    coef[:, : spec.n_random] += b
    eta = np.einsum("lc,lc->l", Tm, coef[rs])
    if Xc.shape[1]:
        eta += Xc[rs] @ draw.beta[nt:]
    return eta


def _horizon(spec: ModelSpec, data: JointDataset) -> float:
    return spec.horizon_factor * float(np.max(data.event_times))


def _prior_b(draw, n, rng, s):
    L = cholesky_or_raise(draw.D, s)
    return rng.standard_normal((n, L.shape[0])) @ L.T


# ------------------------------------------------------------------ regimes


def replicate_posterior_posterior(data: JointDataset, draws: PosteriorDraws, M: int = 50,
                                  seed: int = 0) -> ReplicatedData:
    """b_i taken from the posterior draw aligned with theta; y and T simulated independently."""
    if draws.b is None:
        raise ReplicationError("posterior-posterior replication needs per-subject random-effect draws; "
                               "use the posterior_prior or dynamic regimes instead")
    if draws.b.shape[1] != data.n:
        raise ReplicationError("random-effect draws do not match the number of subjects")
    spec = draws.spec
    des = _Design.build(data, spec)
    horizon = _horizon(spec, data)
    reps = []
    all_rows = np.ones(des.row_times.size, dtype=bool)
    for m, (s, child) in enumerate(zip(cycle_draw_indices(draws.n_draws, M), _child_seeds(seed, M))):
        rng = np.random.default_rng(child)
        long, T, cens = _simulate(des, draws.draw(s), draws.b[s], all_rows, 0.0, horizon, rng, False)
        reps.append(Replicate(m, int(s), _seed_record(child), des.subjects, long, T, cens, horizon))
    return ReplicatedData("posterior_posterior", reps, list(data.ids), seed)


def replicate_posterior_prior(data: JointDataset, draws: PosteriorDraws, M: int = 50,
                              seed: int = 0, subjects=None) -> ReplicatedData:
    """b_i ~ N(0, D); y and T simulated jointly, y truncated at the replicated event time."""
    spec = draws.spec
    des = _Design.build(data, spec, subjects)
    horizon = _horizon(spec, data)
    reps = []
    all_rows = np.ones(des.row_times.size, dtype=bool)
    for m, (s, child) in enumerate(zip(cycle_draw_indices(draws.n_draws, M), _child_seeds(seed, M))):
        rng = np.random.default_rng(child)
        draw = draws.draw(s)
        b = _prior_b(draw, des.n, rng, s)
        long, T, cens = _simulate(des, draw, b, all_rows, 0.0, horizon, rng, True)
        reps.append(Replicate(m, int(s), _seed_record(child), des.subjects, long, T, cens, horizon))
    return ReplicatedData("posterior_prior", reps, list(data.ids), seed)


def replicate_dynamic(data: JointDataset, draws: PosteriorDraws, t_L: float, M: int = 50,
                      mh: MHConfig = MHConfig(), seed: int = 0) -> ReplicatedData:
    """Subjects at risk at ``t_L``: b_i by MH given data up to t_L, replicates after t_L."""
    if t_L < 0:
        raise ReplicationError("t_L must be nonnegative")
    spec = draws.spec
    risk = np.nonzero(np.asarray(data.event_times) > t_L)[0]
    if risk.size == 0:
        raise ReplicationError(f"no subject is at risk at t_L={t_L}")
    des = _Design.build(data, spec, risk)
    horizon = max(_horizon(spec, data), t_L * 1.5 + 1.0)
    tL = np.full(des.n, float(t_L))
    target = des.target(tL, np.zeros(des.n))
    rows = des.row_times > t_L
    reps = []
    for m, (s, child) in enumerate(zip(cycle_draw_indices(draws.n_draws, M), _child_seeds(seed, M))):
        rng = np.random.default_rng(child)
        draw = draws.draw(s)
        target.set_draw(draw, s)
        b = BatchSampler(target, mh).run(rng).last
        long, T, cens = _simulate(des, draw, b, rows, tL, horizon, rng, False)
        reps.append(Replicate(m, int(s), _seed_record(child), des.subjects, long, T, cens, horizon))
    return ReplicatedData("dynamic", reps, list(data.ids), seed, t_L=float(t_L))


def conditional_random_effects(data: JointDataset, spec: ModelSpec, draw, mh: MHConfig, rng,
                               subjects=None, draw_index: Optional[int] = None) -> np.ndarray:
    """Final MH state of b_i given each subject's full data including (T_i, delta_i)."""
    des = _Design.build(data, spec, subjects)
    target = des.target(des.T, des.delta).set_draw(draw, draw_index)
    return BatchSampler(target, mh).run(rng).last


def oracle_draws(data: JointDataset, spec: ModelSpec, draw, n_draws: int = 50,
                 mh: MHConfig = MHConfig(), seed: int = 0) -> PosteriorDraws:
    """Degenerate posterior at a fixed theta with b_i re-sampled by MH from their full conditional."""
    rng = np.random.default_rng(seed)
    des = _Design.build(data, spec)
    target = des.target(des.T, des.delta).set_draw(draw)
    cfg = MHConfig(n_iterations=mh.burn_in + n_draws * mh.thinning, burn_in=mh.burn_in,
                   thinning=mh.thinning, proposal_scale=mh.proposal_scale, adapt=mh.adapt,
                   target_acceptance=mh.target_acceptance)
    res = BatchSampler(target, cfg).run(rng)
    S = res.draws.shape[0]
    rep = lambda a: np.repeat(np.asarray(a, float)[None], S, axis=0)  # noqa: E731
    return PosteriorDraws(spec, rep(draw.beta), np.full(S, draw.sigma), rep(draw.gamma),
                          np.full(S, draw.alpha), rep(draw.gamma_h0), rep(draw.D), None, res.draws,
                          list(data.ids))


def replicate_cross_validated(data: JointDataset, spec: ModelSpec, priors: PriorConfig = PriorConfig(),
                              mcmc: McmcConfig = McmcConfig(), V: int = 10, regime: str = "prior",
                              M: int = 50, mh: MHConfig = MHConfig(), seed: int = 0,
                              fit=None) -> ReplicatedData:
    """Fit on V-1 folds, replicate the held-out fold, pool the folds.

    ``regime`` is ``prior`` (posterior-prior for held-out subjects) or
    ``dynamic`` (b_j by MH given all of subject j's data with t_L = T_j and
    the observed delta_j, then y and T replicated from t = 0). ``fit``
    overrides the fitter (a callable ``(train_data, spec, priors, mcmc)``).
    """
    if regime not in ("prior", "dynamic"):
        raise ReplicationError("cross-validated regime must be 'prior' or 'dynamic'")
    if V < 2:
        raise ReplicationError("V must be at least 2")
    fit = fit_joint_model if fit is None else fit
    folds = split_folds(data, V, seed)
    fold_of = np.array([folds.fold_of_subject[sid] for sid in data.ids])
    horizon = _horizon(spec, data)
    fold_seeds = np.random.SeedSequence(seed).spawn(V)
    per_fold = []
    info = {"V": V, "sub_regime": regime, "folds": {}, "fold_of_subject": fold_of.tolist()}
    for v in range(1, V + 1):
        held = np.nonzero(fold_of == v)[0]
        train = np.nonzero(fold_of != v)[0]
        fs = fold_seeds[v - 1]
        fit_seed = int(fs.generate_state(1)[0])
        try:
            draws = fit(data.subset(train), spec, priors, McmcConfig(
                mcmc.n_iter, mcmc.burn_in, mcmc.thin, fit_seed, mcmc.survival, mcmc.b_steps, mcmc.surv_steps))
        except Exception as e:  # surface the fold for any fitting failure
            raise ReplicationError(f"fit for fold {v} failed: {e}") from e
        fspec = draws.spec
        des = _Design.build(data, fspec, held)
        rows = np.ones(des.row_times.size, dtype=bool)
        idx = cycle_draw_indices(draws.n_draws, M)
        reps = []
        for m, child in enumerate(fs.spawn(M)):
            rng = np.random.default_rng(child)
            s = idx[m]
            draw = draws.draw(s)
            if regime == "prior":
                b = _prior_b(draw, des.n, rng, s)
                out = _simulate(des, draw, b, rows, 0.0, horizon, rng, True)
            else:
                target = des.target(des.T, des.delta).set_draw(draw, s)
                b = BatchSampler(target, mh).run(rng).last
                out = _simulate(des, draw, b, rows, 0.0, horizon, rng, False)
            reps.append((s, _seed_record(child), out))
        per_fold.append((held, reps))
        info["folds"][str(v)] = {"held_out": [data.ids[i] for i in held],
                                 "training": [data.ids[i] for i in train], "fit_seed": fit_seed}
    pooled = []
    for m in range(M):
        subj, rs, rt, rv, T, C, dix, seeds = [], [], [], [], [], [], {}, {}
        offset = 0
        for v, (held, reps) in enumerate(per_fold, start=1):
            s, sd, (long, Tm, cm) = reps[m]
            subj.append(held)
            rs.append(long.subject + offset)
            rt.append(long.times)
            rv.append(long.values)
            T.append(Tm)
            C.append(cm)
            dix[str(v)] = int(s)
            seeds[str(v)] = sd
            offset += held.size
        subjects = np.concatenate(subj)
        order = np.argsort(subjects, kind="stable")
        inv = np.empty_like(order)
        inv[order] = np.arange(order.size)
        long = LongSample(inv[np.concatenate(rs)], np.concatenate(rt), np.concatenate(rv)).sorted()
        pooled.append(Replicate(m, dix, seeds, subjects[order], long, np.concatenate(T)[order],
                                np.concatenate(C)[order], horizon))
    return ReplicatedData("cross_validated", pooled, list(data.ids), seed, info=info)


# ------------------------------------------------------------------ observed views


def observed_view(data: JointDataset, spec: ModelSpec, rep: ReplicatedData):
    """Observed data restricted and re-indexed to match the replicates' subjects.

    Returns ``(LongSample, T, delta)`` on the model scale; for the dynamic
    regime only measurements after t_L are kept.
    """
    subs = rep.replicates[0].subjects
    des = _Design.build(data, spec, subs)
    keep = np.ones(des.row_times.size, dtype=bool)
    if rep.regime == "dynamic":
        keep = des.row_times > rep.t_L
    long = LongSample(des.row_subject[keep], des.row_times[keep], des.row_values[keep])
    return long, des.T, des.delta
