"""Command-line entry point: ``credrj fit|rj|dic|simulate|diagnose|predict``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

import numpy as np

from . import io
from .chain import Chain
from .diagnostics import autocorrelation, effective_sample_size, hpd_interval, multichain_diagnostic
from .dic import compute_dic, format_table, rank_models
from .errors import CredrjError
from .gibbs import gibbs_run
from .model import RJ_MODELS, LossPanel, ModelId
from .rj import (
    empirical_transition_matrix,
    estimate_model_probs,
    model_averaged_predict,
    rj_run,
    run_pilots,
    stationary_distribution,
)

log = logging.getLogger("credrj")

COMMANDS = ("fit", "rj", "dic", "simulate", "diagnose", "predict")


def _load_panel(cfg: io.RunConfig) -> tuple[LossPanel, LossPanel | None]:
    if cfg.data is None:
        log.info("no [data] path given; using the bundled synthetic panel")
        return io.load_example(cfg.holdout_year)
    return io.ingest(cfg.data, cfg.holdout_year, cfg.allow_negative_loss)


def _param_series(chain: Chain, model: ModelId, panel: LossPanel):
    """(name, label, draws) for every free parameter of ``model``."""
    k = len(chain)
    out = []
    if model is not ModelId.K:
        out.append(("mu", "", chain.mu[:k]))
    first = 0 if model is ModelId.K else 1
    if model.has_alpha:
        for i in range(first, panel.m):
            out.append((f"alpha_{i + 1}", panel.states[i], chain.alpha[:k, i]))
    if model.has_beta:
        for j in range(first, panel.n):
            out.append((f"beta_{j + 1}", panel.occupations[j], chain.beta[:k, j]))
    out.append(("sigma", "", chain.sigma[:k]))
    if model is ModelId.K:
        out += [("tau_alpha", "", chain.tau_alpha[:k]), ("tau_beta", "", chain.tau_beta[:k])]
    return out


def _pilots(cfg: io.RunConfig, panel: LossPanel) -> dict[ModelId, Chain]:
    return run_pilots(panel, cfg.priors, cfg.pilot_iterations, cfg.pilot_burn_in, cfg.seed + 1)


# --- subcommands ----------------------------------------------------------------------


def cmd_fit(cfg: io.RunConfig) -> None:
    panel, _ = _load_panel(cfg)
    model = cfg.fit_model
    chain = gibbs_run(panel, model, cfg.priors, cfg.gibbs)
    if len(chain) == 0:
        raise CredrjError("no draws retained: burn_in equals iterations")
    hdr = cfg.header("fit")
    io.write_chain_csv(chain, cfg.out / "chain.csv", hdr)

    rows, means = [], {}
    for name, label, x in _param_series(chain, model, panel):
        h = hpd_interval(x, cfg.hpd_level) if x.size >= 20 else None
        mean = float(np.mean(x))
        means[name] = mean
        rows.append([name, label, mean, float(np.std(x, ddof=1)) if x.size > 1 else float("nan"),
                     h.lo if h else float("nan"), h.hi if h else float("nan"),
                     effective_sample_size(x)])
    io.write_csv(cfg.out / "hpd.csv", ["parameter", "label", "mean", "sd", "hpd_lo", "hpd_hi", "ess"],
                 rows, hdr)
    report = compute_dic(chain, panel, model)
    io.write_json(cfg.out / "summary.json", {
        "command": "fit", "config_sha256": cfg.sha256, "seed": cfg.seed, "model": model.name,
        "panel_shape": list(panel.shape), "iterations": cfg.gibbs.iterations,
        "burn_in": cfg.gibbs.burn_in, "thin": cfg.gibbs.thin, "draws": len(chain),
        "hpd_level": cfg.hpd_level, "posterior_means": means,
        "dic": dataclasses.asdict(report) | {"model": model.name},
    })


def cmd_rj(cfg: io.RunConfig) -> None:
    panel, _ = _load_panel(cfg)
    start = cfg.rj.initial_model
    warnings = []
    if cfg.rj.move_matrix[start.index, start.index] == 1.0:
        msg = (f"move matrix gives {start.name} no way out; the chain stays in "
               f"{start.name} and the report covers that model only")
        log.warning(msg)
        warnings.append(msg)
    pilots = _pilots(cfg, panel)
    chain = rj_run(panel, cfg.priors, cfg.rj, pilots)
    if len(chain) == 0:
        raise CredrjError("no draws retained: burn_in equals iterations")
    hdr = cfg.header("rj")
    io.write_chain_csv(chain, cfg.out / "chain.csv", hdr)

    probs = estimate_model_probs(chain)
    P = empirical_transition_matrix(chain)
    limit = stationary_distribution(P)
    io.write_csv(cfg.out / "probs.csv", ["model", "visits", "raw", "corrected", "limiting"],
                 [[m.name, int(probs.counts[k]), probs.raw[k], probs.corrected[k], limit[k]]
                  for k, m in enumerate(RJ_MODELS)], hdr)
    io.write_csv(cfg.out / "transition.csv", ["from"] + [f"to_{m.name}" for m in RJ_MODELS],
                 [[m.name] + [float(v) for v in P[k]] for k, m in enumerate(RJ_MODELS)], hdr)
    att, acc = chain.info["attempts"], chain.info["accepts"]
    with np.errstate(invalid="ignore", divide="ignore"):
        rate = np.where(att > 0, acc / np.maximum(att, 1), np.nan)
    visited = [m.name for k, m in enumerate(RJ_MODELS) if probs.counts[k] > 0]
    io.write_json(cfg.out / "summary.json", {
        "command": "rj", "config_sha256": cfg.sha256, "seed": cfg.seed,
        "iterations": cfg.rj.iterations, "burn_in": cfg.rj.burn_in, "draws": len(chain),
        "log_prior_offsets": list(cfg.rj.log_prior_offsets),
        "visited_models": visited,
        "unvisited_models": [m.name for m in RJ_MODELS if m.name not in visited],
        "acceptance_rate": [[None if np.isnan(v) else float(v) for v in row] for row in rate],
        "nonfinite_rejections": int(chain.info["nonfinite"]),
        "warnings": warnings,
    })


def cmd_dic(cfg: io.RunConfig) -> None:
    panel, _ = _load_panel(cfg)
    reports = []
    for model in cfg.dic_models:
        gc = dataclasses.replace(cfg.gibbs, seed=cfg.seed + model.index)
        chain = gibbs_run(panel, model, cfg.priors, gc)
        reports.append(compute_dic(chain, panel, model))
    ranked = rank_models(reports)
    text = f"# {cfg.header('dic')}\n" + format_table(reports)
    text += "ranking (best first): " + ", ".join(r.model.name for r in ranked) + "\n"
    (cfg.out / "dic.txt").write_text(text)


def cmd_simulate(cfg: io.RunConfig) -> None:
    spec = io.simulation_spec(cfg.simulate, cfg.seed)
    panel, truth = io.simulate(**spec)
    name = cfg.simulate.get("output", "panel.csv")
    io.write_panel_csv(panel, cfg.out / name, f"{cfg.header('simulate')} SYNTHETIC")
    io.write_json(cfg.out / "truth.json", {"config_sha256": cfg.sha256, **truth.to_dict()})


def cmd_diagnose(cfg: io.RunConfig) -> None:
    panel, _ = _load_panel(cfg)
    sec = cfg.diagnose
    n_chains = int(sec.get("chains", "3"))
    max_lag = int(sec.get("max_lag", "50"))
    level = float(sec.get("level", "0.05"))
    sampler = sec.get("sampler", "rj").strip().lower()
    if n_chains < 2:
        raise ValueError("[diagnose] chains must be at least 2")

    # chain seeds step by 10 so they never coincide with the pilot seeds seed+1..seed+3
    seeds = [cfg.seed + 10 * k for k in range(n_chains)]
    if sampler == "rj":
        pilots = _pilots(cfg, panel)
        chains = [rj_run(panel, cfg.priors, dataclasses.replace(cfg.rj, seed=sd), pilots) for sd in seeds]
    elif sampler == "gibbs":
        chains = [gibbs_run(panel, cfg.fit_model, cfg.priors, dataclasses.replace(cfg.gibbs, seed=sd))
                  for sd in seeds]
    else:
        raise ValueError(f"[diagnose] sampler must be 'rj' or 'gibbs', got {sampler!r}")

    hdr = cfg.header("diagnose")
    acf_rows, ess_rows = [], []
    for c, chain in enumerate(chains, start=1):
        k = len(chain)
        series = {"logpost": chain.logpost[:k], "sigma": chain.sigma[:k], "mu": chain.mu[:k],
                  "model": chain.models.astype(float)}
        for name, x in series.items():
            ess_rows.append([c, name, k, effective_sample_size(x)])
            if np.ptp(x) == 0 or k <= max_lag:
                continue
            acf = autocorrelation(x, max_lag)
            acf_rows += [[c, name, int(lag), float(v), acf.ci_band] for lag, v in zip(acf.lags, acf.values)]
    io.write_csv(cfg.out / "acf.csv", ["chain", "series", "lag", "acf", "ci_band"], acf_rows, hdr)
    io.write_csv(cfg.out / "ess.csv", ["chain", "series", "n", "ess"], ess_rows, hdr)

    res = multichain_diagnostic([ch.models for ch in chains], [ch.logpost[: len(ch)] for ch in chains], level)
    io.write_csv(cfg.out / "multichain.csv", ["diagnostic", "statistic", "critical", "pass", "thin"], [
        ["chi_square", res.chi_square, res.chi_critical, int(res.chi_pass), res.thin_indicator],
        ["ks", res.ks, res.ks_critical, int(res.ks_pass), res.thin_logpost],
    ], hdr)


def cmd_predict(cfg: io.RunConfig) -> None:
    if cfg.holdout_year is None:
        raise ValueError("predict needs [data] holdout_year")
    panel, hold = _load_panel(cfg)
    source = cfg.predict_source
    if source.lower() == "averaged":
        chains = {m: gibbs_run(panel, m, cfg.priors, dataclasses.replace(cfg.gibbs, seed=cfg.seed + 1 + k))
                  for k, m in enumerate(RJ_MODELS)}
        probs = estimate_model_probs(rj_run(panel, cfg.priors, cfg.rj, chains)).corrected

        def predict(i, j):
            return model_averaged_predict(chains, probs, i, j)
        weights = {m.name: float(probs[k]) for k, m in enumerate(RJ_MODELS)}
    else:
        model = ModelId.parse(source)
        chain = gibbs_run(panel, model, cfg.priors, cfg.gibbs)
        predict = chain.predictive_mean
        weights = {model.name: 1.0}

    rows, num, den = [], 0.0, 0.0
    for i in range(panel.m):
        for j in range(panel.n):
            pred = predict(i, j)
            e = float(hold.E[i, j, 0])
            obs = float(hold.R[i, j, 0]) if e > 0 else float("nan")
            if e > 0:
                num += e * (obs - pred) ** 2
                den += e
            rows.append([i + 1, j + 1, panel.states[i], panel.occupations[j], pred, obs, e])
    hdr = cfg.header("predict")
    io.write_csv(cfg.out / "predict.csv",
                 ["i", "j", "state", "occupation", "predicted", "observed", "exposure"], rows, hdr)
    io.write_json(cfg.out / "summary.json", {
        "command": "predict", "config_sha256": cfg.sha256, "seed": cfg.seed,
        "holdout_year": cfg.holdout_year, "source": source, "model_weights": weights,
        "holdout_weighted_squared_error": num / den if den > 0 else None,
        "holdout_exposure": den,
    })


HANDLERS = {
    "fit": cmd_fit, "rj": cmd_rj, "dic": cmd_dic, "simulate": cmd_simulate,
    "diagnose": cmd_diagnose, "predict": cmd_predict,
}


HELP = {
    "fit": "Gibbs chain for one model: chain.csv, hpd.csv, summary.json",
    "rj": "reversible-jump run over M1/M2/M3: chain.csv, probs.csv, transition.csv",
    "dic": "DIC table for several models: dic.txt",
    "simulate": "synthetic panel CSV plus truth.json",
    "diagnose": "ACF, ESS and multi-chain checks: acf.csv, ess.csv, multichain.csv",
    "predict": "holdout-year predictive means and weighted squared error: predict.csv",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="credrj", description="Bayesian two-way credibility models: Gibbs, reversible jump, DIC.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="RNG seed (overrides CREDRJ_SEED and the config file)")
        p.add_argument("--out", default=None, help="output directory (default: [run] out)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="credrj: %(levelname)s: %(message)s")
    try:
        cfg = io.load_config(args.config, args.seed, args.out)
        cfg.out.mkdir(parents=True, exist_ok=True)
        HANDLERS[args.command](cfg)
    except (CredrjError, ValueError, FileNotFoundError) as exc:
        print(f"credrj {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
