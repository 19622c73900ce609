"""Command-line interface: simulate, fit, check and report.

Examples
--------
jmppc simulate --seed 1 --out run/data
jmppc fit --data run/data --model true_model --seed 1 --out run/true_model/draws
jmppc check --data run/data --draws run/true_model/draws --regime pp --stat all --M 50 \\
    --seed 1 --out run/true_model/check
jmppc report run/true_model/check run/linear_trend/check --out run/report.csv
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .checks import STATISTICS, parse_statistics, run_check
from .data import DataError, fmt, load_joint_dataset, write_joint_dataset
from .fitter import McmcConfig, PosteriorDraws, PriorConfig, fit_joint_model, load_posterior_draws
from .gof import GofError, LoessConfig
from .model import SCHEMA_VERSION, ModelSpec, SpecError
from .ranef import MHConfig
from .replicate import (ReplicationError, oracle_draws, replicate_cross_validated, replicate_dynamic,
                        replicate_posterior_posterior, replicate_posterior_prior)
from .scenario import (ANALYSIS_MODELS, ScenarioConfig, analysis_model_spec, generate_scenario_dataset,
                       true_draw, true_spec)
from .svg import write_svg


class CliError(Exception):
    pass


def _read_config(path, allowed: set) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CliError(f"invalid JSON in {path}: {e}") from None
    if not isinstance(cfg, dict):
        raise CliError(f"config {path} must be a JSON object")
    version = cfg.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise CliError(f"config field 'schema_version' must be {SCHEMA_VERSION}, got {version!r}")
    for k in cfg:
        if k != "schema_version" and k not in allowed:
            raise CliError(f"unknown config field {k!r}")
    return cfg


def _sub(cfg: dict, key: str, cls):
    try:
        return cls(**cfg.get(key, {}))
    except TypeError as e:
        raise CliError(f"config field {key!r}: {e}") from None


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load_data(directory):
    d = Path(directory)
    return load_joint_dataset(d / "longitudinal.csv", d / "survival.csv")


# ------------------------------------------------------------------ commands


def cmd_simulate(args) -> int:
    cfg = _read_config(args.config, {f for f in ScenarioConfig.__dataclass_fields__})
    try:
        config = ScenarioConfig.from_dict(cfg)
    except (TypeError, ValueError) as e:
        raise CliError(f"invalid scenario config: {e}") from None
    data = generate_scenario_dataset(config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_joint_dataset(data, out / "longitudinal.csv", out / "survival.csv")
    _write_json(out / "manifest.json", {
        "schema_version": SCHEMA_VERSION, "command": "simulate", "seed": args.seed,
        "n_subjects": data.n, "n_longitudinal_rows": int(np.sum(data.n_obs)),
        "n_events": int(np.sum(data.event_indicators)), "scenario": config.to_dict()})
    return 0


def _spec_from_args(args, cfg) -> ModelSpec:
    scen = ScenarioConfig.from_dict(cfg.get("scenario", {}))
    if cfg.get("spec"):
        return ModelSpec.from_dict(cfg["spec"])
    model = args.model or cfg.get("model", "true_model")
    return analysis_model_spec(model, scen)


FIT_FIELDS = {"model", "spec", "mcmc", "priors", "mh", "scenario"}


def cmd_fit(args) -> int:
    cfg = _read_config(args.config, FIT_FIELDS)
    spec = _spec_from_args(args, cfg)
    mcmc = _sub(cfg, "mcmc", McmcConfig)
    mcmc = replace(mcmc, seed=args.seed)
    if args.iterations:
        mcmc = replace(mcmc, n_iter=args.iterations, burn_in=args.iterations // 2)
    priors = _sub(cfg, "priors", PriorConfig)
    data = _load_data(args.data)
    draws = fit_joint_model(data, spec, priors, mcmc)
    out = draws.save(args.out)
    _write_json(out / "fit.json", {"schema_version": SCHEMA_VERSION, "command": "fit", "seed": args.seed,
                                   "model": args.model or cfg.get("model", "true_model"),
                                   "diagnostics": draws.diagnostics, "summary": draws.summary()})
    return 0


def _parse_regime(text: str):
    if text in ("pp", "prior"):
        return text, None
    kind, _, arg = text.partition(":")
    if kind == "dynamic" and arg:
        return "dynamic", float(arg)
    if kind == "cv" and arg:
        v, _, sub = arg.partition(":")
        return "cv", (int(v), sub or "prior")
    raise CliError(f"unknown regime {text!r}; use pp, prior, dynamic:t_L or cv:V[:prior|dynamic]")


def cmd_check(args) -> int:
    cfg = _read_config(args.config, FIT_FIELDS)
    data = _load_data(args.data)
    regime, rarg = _parse_regime(args.regime)
    stats = parse_statistics(args.stat)
    mh = _sub(cfg, "mh", MHConfig)
    loess = LoessConfig(span=args.span)
    model = args.model or cfg.get("model")
    if "pit" in stats and args.M < 20:
        raise CliError("statistic pit needs --M >= 20")
    if args.draws == "oracle":
        scen = ScenarioConfig.from_dict(cfg.get("scenario", {}))
        spec = true_spec(scen)
        if regime == "pp":
            draws = oracle_draws(data, spec, true_draw(scen), n_draws=args.M, mh=mh, seed=args.seed)
        else:
            draws = PosteriorDraws.from_draw(spec, true_draw(scen))
        model = model or "oracle"
    elif regime != "cv":
        if not args.draws:
            raise CliError("--draws is required for every regime except cv")
        draws = load_posterior_draws(args.draws)
        spec = draws.spec
        fit_meta = Path(args.draws) / "fit.json"
        if model is None and fit_meta.exists():
            model = json.loads(fit_meta.read_text(encoding="utf-8")).get("model")
    if regime == "pp":
        if draws.b is None:
            raise CliError("regime pp needs per-subject random-effect draws (b_draws.csv)")
        rep = replicate_posterior_posterior(data, draws, args.M, args.seed)
    elif regime == "prior":
        rep = replicate_posterior_prior(data, draws, args.M, args.seed)
    elif regime == "dynamic":
        rep = replicate_dynamic(data, draws, rarg, args.M, mh, args.seed)
    else:
        V, sub = rarg
        if sub not in ("prior", "dynamic"):
            raise CliError("cv sub-regime must be prior or dynamic")
        if args.draws and args.draws != "oracle" and not model and not cfg.get("spec"):
            spec = replace(load_posterior_draws(args.draws).spec, baseline=None)
        else:
            spec = _spec_from_args(args, cfg)
        mcmc = replace(_sub(cfg, "mcmc", McmcConfig), seed=args.seed)
        if args.iterations:
            mcmc = replace(mcmc, n_iter=args.iterations, burn_in=args.iterations // 2)
        rep = replicate_cross_validated(data, spec, _sub(cfg, "priors", PriorConfig), mcmc, V, sub,
                                        args.M, mh, args.seed)
        spec = spec.resolve_baseline(data.event_times, data.event_indicators,
                                     spec.horizon_factor * float(np.max(data.event_times)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.save_replicates:
        rep.save(out / "replicates")

    def one(stat):
        return stat, run_check(stat, data, spec, rep, loess, args.kappa)

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as ex:
        reports = dict(ex.map(one, stats))
    rows = []
    for stat in stats:
        r = reports[stat]
        r.to_json(out / f"{stat}.json")
        r.to_long_csv(out / f"{stat}_curves.csv")
        write_svg(r, out / f"{stat}.svg", f"{stat} [{args.regime}]")
        rows.append((stat, r.mise))
    with open(out / "mise_summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["statistic", "model", "regime", "M", "mise"])
        for stat, v in rows:
            w.writerow([stat, model or "model", args.regime, args.M, fmt(v)])
    _write_json(out / "check.json", {"schema_version": SCHEMA_VERSION, "command": "check",
                                     "model": model or "model", "regime": args.regime, "M": args.M,
                                     "seed": args.seed, "statistics": stats, "span": args.span,
                                     "kappa": args.kappa})
    return 0


def cmd_report(args) -> int:
    if len(args.dirs) < 2:
        raise CliError("report needs at least two check directories")
    tables = []
    for d in args.dirs:
        p = Path(d)
        meta = json.loads((p / "check.json").read_text(encoding="utf-8"))
        with open(p / "mise_summary.csv", newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        name = meta.get("model") or p.name
        if name == "model":
            name = p.name
        tables.append((name, {r["statistic"]: float(r["mise"]) for r in rows}))
    stat_sets = {tuple(sorted(t)) for _, t in tables}
    if len(stat_sets) != 1:
        raise CliError("check directories were run with different statistic sets")
    names = [n for n, _ in tables]
    if len(set(names)) != len(names):
        names = [f"{n}:{Path(d).name}" for n, d in zip(names, args.dirs)]
    stats = [s for s in STATISTICS if s in tables[0][1]]
    lines = []
    for s in stats:
        vals = np.array([t[s] for _, t in tables])
        ranks = rankdata(vals, method="min")
        for name, v, rk in zip(names, vals, ranks):
            lines.append([s, name, fmt(v), int(rk)])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["statistic", "model", "mise", "rank"])
        w.writerows(lines)
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jmppc", description="Posterior predictive checks for joint models")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, need_out=True):
        sp.add_argument("--seed", type=int, default=1, help="random seed (default 1)")
        sp.add_argument("--threads", type=int, default=1, help="maximum worker threads")
        sp.add_argument("--config", help="JSON config file (schema_version 1)")
        if need_out:
            sp.add_argument("--out", required=True, help="output directory")

    s = sub.add_parser("simulate", help="generate a simulation-study dataset")
    common(s)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="fit a joint model by MCMC")
    common(f)
    f.add_argument("--data", required=True, help="directory with longitudinal.csv and survival.csv")
    f.add_argument("--model", choices=ANALYSIS_MODELS, help="analysis model (default true_model)")
    f.add_argument("--iterations", type=int, help="override MCMC iterations (burn-in is half)")
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("check", help="replicate data and compute goodness-of-fit statistics")
    common(c)
    c.add_argument("--data", required=True, help="directory with longitudinal.csv and survival.csv")
    c.add_argument("--draws", help="posterior draws directory, or 'oracle' for the generating parameters")
    c.add_argument("--model", choices=ANALYSIS_MODELS, help="model name (label; analysis model for cv)")
    c.add_argument("--regime", default="pp", help="pp | prior | dynamic:t_L | cv:V[:prior|dynamic]")
    c.add_argument("--stat", default="all", help=f"comma list from {', '.join(STATISTICS)} or 'all'")
    c.add_argument("--M", type=int, default=50, help="number of replicated datasets")
    c.add_argument("--kappa", type=float, default=None, help="concordance look-back window")
    c.add_argument("--span", type=float, default=0.75, help="loess span")
    c.add_argument("--iterations", type=int, help="MCMC iterations for cross-validated fits")
    c.add_argument("--save-replicates", action="store_true", help="also write the replicated data")
    c.set_defaults(func=cmd_check)

    r = sub.add_parser("report", help="compare MISE across check directories")
    r.add_argument("dirs", nargs="+", help="check output directories")
    r.add_argument("--out", required=True, help="output CSV path")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, DataError, SpecError, GofError, ReplicationError, ValueError, RuntimeError,
            OSError, KeyError) as e:
        print(f"jmppc {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
