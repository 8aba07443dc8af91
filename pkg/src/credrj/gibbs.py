"""Deterministic-scan Gibbs samplers for the centred and corner-point models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import conditionals as cond
from .chain import Chain
from .errors import NonFiniteError
from .model import LossPanel, ModelId, ParamVector, PriorConfig, _log_lik, check_params, log_prior

DEFAULT_SCANS = {
    ModelId.M1: ("sigma", "mu", "alpha", "beta"),
    ModelId.M2: ("sigma", "mu", "alpha"),
    ModelId.M3: ("sigma", "mu", "beta"),
    ModelId.K: ("sigma", "mu", "alpha", "beta", "tau_alpha", "tau_beta"),
}


@dataclass(frozen=True)
class GibbsConfig:
    """Run length and seeding for one chain.

    ``iterations`` counts every sweep, burn-in included. ``burn_in`` defaults
    to a tenth of the run. ``scan`` overrides the model's default block order.
    """

    iterations: int = 10_000
    burn_in: int | None = None
    thin: int = 1
    seed: int = 0
    scan: tuple[str, ...] | None = field(default=None)

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.iterations // 10)
        if not 0 <= self.burn_in <= self.iterations:
            raise ValueError(f"burn_in must lie in [0, iterations], got {self.burn_in}")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")

    def scan_for(self, model: ModelId) -> tuple[str, ...]:
        default = DEFAULT_SCANS[model]
        if self.scan is None:
            return default
        if sorted(self.scan) != sorted(default):
            raise ValueError(f"scan for {model.name} must be a permutation of {default}")
        return tuple(self.scan)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def initial_params(panel: LossPanel, model: ModelId) -> ParamVector:
    """Starting point: overall weighted mean level, zero contrasts."""
    level = panel.weighted_mean()
    m, n = panel.m, panel.n
    if model is ModelId.K:
        return ParamVector(level, np.full(m, level / 2), np.full(n, level / 2), 1.0, 1.0, 1.0)
    return ParamVector(
        level,
        np.zeros(m) if model.has_alpha else None,
        np.zeros(n) if model.has_beta else None,
        1.0,
    )


def _gamma(rng, g: cond.GammaParams) -> float:
    return rng.gamma(g.shape) / g.rate


def _normal(rng, p: cond.NormalParams) -> float:
    return p.mean + math.sqrt(p.variance) * rng.standard_normal()


def sweep(panel: LossPanel, model: ModelId, params: ParamVector, priors: PriorConfig,
          rng: np.random.Generator, scan: tuple[str, ...] | None = None) -> ParamVector:
    """One deterministic-scan Gibbs sweep; updates ``params`` in place."""
    p = params
    for block in scan or DEFAULT_SCANS[model]:
        if block == "sigma":
            p.sigma = _gamma(rng, cond.cond_sigma(panel, model, p, priors.a, priors.b))
        elif model is ModelId.K:
            if block == "mu":
                p.mu = _normal(rng, cond.cond_mu_centred(p.alpha, p.beta, p.tau_alpha, p.tau_beta, priors.c))
            elif block == "alpha":
                mean, prec = cond.alpha_centred_all(panel, p.mu, p.beta, p.tau_alpha, p.sigma)
                p.alpha = mean + rng.standard_normal(panel.m) / np.sqrt(prec)
            elif block == "beta":
                mean, prec = cond.beta_centred_all(panel, p.mu, p.alpha, p.tau_beta, p.sigma)
                p.beta = mean + rng.standard_normal(panel.n) / np.sqrt(prec)
            elif block == "tau_alpha":
                p.tau_alpha = _gamma(rng, cond.cond_tau_alpha(p.alpha, p.mu, priors.a, priors.b))
            elif block == "tau_beta":
                p.tau_beta = _gamma(rng, cond.cond_tau_beta(p.beta, p.mu, priors.a, priors.b))
        elif block == "mu":
            p.mu = _normal(rng, cond.cond_mu_noncentred(panel, p.alpha, p.beta, p.sigma, priors.tau_mu))
        elif block == "alpha":
            q = cond.cond_alpha_block(panel, p.mu, p.beta, p.sigma, priors.tau_alpha0)
            p.alpha = np.concatenate([[0.0], q.mean + rng.standard_normal(q.mean.size) / np.sqrt(q.precision_diag)])
        elif block == "beta":
            q = cond.cond_beta_block(panel, p.mu, p.alpha, p.sigma, priors.tau_beta0)
            p.beta = np.concatenate([[0.0], q.mean + rng.standard_normal(q.mean.size) / np.sqrt(q.precision_diag)])
    return p


def evaluate(panel: LossPanel, model: ModelId, params: ParamVector, priors: PriorConfig) -> tuple[float, float]:
    """(log posterior, deviance), raising :class:`NonFiniteError` on overflow."""
    ll = _log_lik(panel, model, params)
    lp = ll + log_prior(model, params, priors)
    if not (math.isfinite(ll) and math.isfinite(lp)):
        raise NonFiniteError(
            f"non-finite density in {model.name}",
            {"mu": params.mu, "alpha": params.alpha, "beta": params.beta, "sigma": params.sigma,
             "tau_alpha": params.tau_alpha, "tau_beta": params.tau_beta, "loglik": ll, "logpost": lp},
        )
    return lp, -2.0 * ll


def gibbs_run(panel: LossPanel, model: ModelId | str, priors: PriorConfig | None = None,
              config: GibbsConfig | None = None, init: ParamVector | None = None) -> Chain:
    """Run one seeded Gibbs chain and return its retained draws.

    Draws from sweeps ``burn_in + 1 .. iterations`` are kept, every ``thin``-th
    one. Identical inputs give bit-identical chains.
    """
    model = ModelId.parse(model)
    priors = priors or PriorConfig()
    config = config or GibbsConfig()
    scan = config.scan_for(model)
    params = (init or initial_params(panel, model)).copy()
    check_params(panel, model, params)
    rng = make_rng(config.seed)

    kept = (config.iterations - config.burn_in + config.thin - 1) // config.thin
    chain = Chain(panel.m, panel.n, capacity=kept)
    for it in range(1, config.iterations + 1):
        sweep(panel, model, params, priors, rng, scan)
        if it > config.burn_in and (it - config.burn_in - 1) % config.thin == 0:
            lp, dev = evaluate(panel, model, params, priors)
            chain.append(it, model, params, lp, dev)
    chain.info.update(sampler="gibbs", model=model.name, seed=config.seed)
    return chain.trim()
