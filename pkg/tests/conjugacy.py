"""Log-density-ratio constancy checks for the full conditionals.

For a correct conditional q(x) of a parameter x, log pi(x, rest) - log q(x)
does not depend on x. Each checker draws a random panel, parameter point and
prior, evaluates that difference at five values of x and returns its variance.
"""

import numpy as np
from conftest import random_panel, random_params, random_priors
from scipy import stats

from credrj import conditionals as cond
from credrj.model import ModelId, log_posterior


def _spread(values):
    return float(np.var(np.asarray(values)))


def _normal_grid(p, rng):
    return p.mean + np.sqrt(p.variance) * rng.uniform(-3, 3, 5)


def _gamma_grid(g, rng):
    return g.mean * rng.uniform(0.5, 1.5, 5)


def _setup(rng, model):
    panel = random_panel(rng, m=int(rng.integers(2, 6)), n=int(rng.integers(2, 7)),
                         s=int(rng.integers(1, 4)), holes=0.15 * rng.random())
    return panel, random_params(rng, model, panel.m, panel.n), random_priors(rng)


def check_alpha_centred(rng):
    panel, p, pr = _setup(rng, ModelId.K)
    i = int(rng.integers(panel.m))
    q = cond.cond_alpha_centred(panel, i, p.mu, p.beta, p.tau_alpha, p.sigma)
    out = []
    for x in _normal_grid(q, rng):
        p.alpha[i] = x
        out.append(log_posterior(panel, ModelId.K, p, pr) - stats.norm.logpdf(x, q.mean, np.sqrt(q.variance)))
    return _spread(out)


def check_beta_centred(rng):
    panel, p, pr = _setup(rng, ModelId.K)
    j = int(rng.integers(panel.n))
    q = cond.cond_beta_centred(panel, j, p.mu, p.alpha, p.tau_beta, p.sigma)
    out = []
    for x in _normal_grid(q, rng):
        p.beta[j] = x
        out.append(log_posterior(panel, ModelId.K, p, pr) - stats.norm.logpdf(x, q.mean, np.sqrt(q.variance)))
    return _spread(out)


def check_mu_centred(rng):
    panel, p, pr = _setup(rng, ModelId.K)
    q = cond.cond_mu_centred(p.alpha, p.beta, p.tau_alpha, p.tau_beta, pr.c)
    out = []
    for x in _normal_grid(q, rng):
        p.mu = x
        out.append(log_posterior(panel, ModelId.K, p, pr) - stats.norm.logpdf(x, q.mean, np.sqrt(q.variance)))
    return _spread(out)


def check_tau_alpha(rng):
    panel, p, pr = _setup(rng, ModelId.K)
    g = cond.cond_tau_alpha(p.alpha, p.mu, pr.a, pr.b)
    out = []
    for x in _gamma_grid(g, rng):
        p.tau_alpha = x
        out.append(log_posterior(panel, ModelId.K, p, pr) - stats.gamma.logpdf(x, g.shape, scale=1 / g.rate))
    return _spread(out)


def check_tau_beta(rng):
    panel, p, pr = _setup(rng, ModelId.K)
    g = cond.cond_tau_beta(p.beta, p.mu, pr.a, pr.b)
    out = []
    for x in _gamma_grid(g, rng):
        p.tau_beta = x
        out.append(log_posterior(panel, ModelId.K, p, pr) - stats.gamma.logpdf(x, g.shape, scale=1 / g.rate))
    return _spread(out)


def check_sigma(rng):
    model = [ModelId.M1, ModelId.M2, ModelId.M3, ModelId.K][int(rng.integers(4))]
    panel, p, pr = _setup(rng, model)
    g = cond.cond_sigma(panel, model, p, pr.a, pr.b)
    out = []
    for x in _gamma_grid(g, rng):
        p.sigma = x
        out.append(log_posterior(panel, model, p, pr) - stats.gamma.logpdf(x, g.shape, scale=1 / g.rate))
    return _spread(out)


def check_mu_noncentred(rng):
    model = [ModelId.M1, ModelId.M2, ModelId.M3][int(rng.integers(3))]
    panel, p, pr = _setup(rng, model)
    q = cond.cond_mu_noncentred(panel, p.alpha, p.beta, p.sigma, pr.tau_mu)
    out = []
    for x in _normal_grid(q, rng):
        p.mu = x
        out.append(log_posterior(panel, model, p, pr) - stats.norm.logpdf(x, q.mean, np.sqrt(q.variance)))
    return _spread(out)


def _block_check(rng, model, name):
    panel, p, pr = _setup(rng, model)
    if name == "alpha":
        q = cond.cond_alpha_block(panel, p.mu, p.beta, p.sigma, pr.tau_alpha0)
    else:
        q = cond.cond_beta_block(panel, p.mu, p.alpha, p.sigma, pr.tau_beta0)
    sd = 1 / np.sqrt(q.precision_diag)
    out = []
    for _ in range(5):
        x = q.mean + sd * rng.uniform(-3, 3, sd.size)
        setattr(p, name, np.concatenate([[0.0], x]))
        out.append(log_posterior(panel, model, p, pr) - stats.norm.logpdf(x, q.mean, sd).sum())
    return _spread(out)


def check_alpha_block(rng):
    return _block_check(rng, [ModelId.M1, ModelId.M2][int(rng.integers(2))], "alpha")


def check_beta_block(rng):
    return _block_check(rng, [ModelId.M1, ModelId.M3][int(rng.integers(2))], "beta")


CHECKS = {
    "cond_alpha_centred": check_alpha_centred,
    "cond_beta_centred": check_beta_centred,
    "cond_mu_centred": check_mu_centred,
    "cond_tau_alpha": check_tau_alpha,
    "cond_tau_beta": check_tau_beta,
    "cond_sigma": check_sigma,
    "cond_mu_noncentred": check_mu_noncentred,
    "cond_alpha_block": check_alpha_block,
    "cond_beta_block": check_beta_block,
}


def worst_spread(name, instances, seed=0):
    rng = np.random.default_rng(seed)
    return max(CHECKS[name](rng) for _ in range(instances))
