"""Reversible-jump sampling across the corner-point models M1, M2 and M3.

Between-model moves redraw every parameter of the target model. The
observation precision is drawn from a gamma fitted to a pilot run; given
that precision, the location block is drawn from a Gaussian whose precision
is the Hessian of the block's negative log posterior and whose mean is one
Newton step from a centering point. The block's log posterior is exactly
quadratic, so this Gaussian is the exact conditional posterior and the
acceptance ratio does not depend on the proposed block, only on the two
precisions. The dimension-matching map is the identity and the Jacobian is 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import linalg

from .chain import Chain
from .errors import DimensionMismatchError, ProposalError
from .gibbs import GibbsConfig, evaluate, gibbs_run, make_rng, sweep
from .model import (
    RJ_MODELS,
    LossPanel,
    ModelId,
    ParamVector,
    PriorConfig,
    from_block,
    log_posterior,
    to_block,
)

LOG_2PI = math.log(2.0 * math.pi)


# --- quadratic exponent of each model ---------------------------------------------


class QuadraticForm:
    """Half the exponent ``f`` (resp. ``g``, ``h``) of a corner-point model's block posterior.

    For a block ``theta = (mu, alpha[1:], beta[1:])`` and precision scale
    ``sigma``::

        f(theta) / 2 = theta' P0 theta / 2 + sigma * sum_ijt E (R - x_ij' theta)**2 / 2

    where ``x_ij`` is the 0/1 indicator row of cell (i, j) and ``P0`` is the
    diagonal prior precision. Its Hessian ``P0 + sigma * X' W X`` does not
    depend on ``theta``.
    """

    def __init__(self, model: ModelId, panel: LossPanel, priors: PriorConfig):
        model = ModelId.parse(model)
        if model is ModelId.K:
            raise ValueError("proposals are defined for the corner-point models only")
        m, n = panel.m, panel.n
        self.model = model
        self.size = model.block_size(m, n)

        rows = []
        prior_prec = [priors.tau_mu]
        if model.has_alpha:
            prior_prec += [priors.tau_alpha0] * (m - 1)
        if model.has_beta:
            prior_prec += [priors.tau_beta0] * (n - 1)
        for i in range(m):
            for j in range(n):
                x = np.zeros(self.size)
                x[0] = 1.0
                k = 1
                if model.has_alpha:
                    if i > 0:
                        x[k + i - 1] = 1.0
                    k += m - 1
                if model.has_beta and j > 0:
                    x[k + j - 1] = 1.0
                rows.append(x)
        X = np.array(rows)
        w = panel.W.ravel()
        self.design = X
        self.prior_precision = np.diag(prior_prec)
        P1 = X.T @ (w[:, None] * X)
        self.data_precision = 0.5 * (P1 + P1.T)
        self.data_shift = X.T @ panel.S.ravel()

    def hessian(self, sigma: float) -> np.ndarray:
        return self.prior_precision + sigma * self.data_precision

    def gradient(self, theta, sigma: float) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return self.hessian(sigma) @ theta - sigma * self.data_shift

    def mode(self, sigma: float) -> np.ndarray:
        """Exact minimizer via the normal equations."""
        return linalg.solve(self.hessian(sigma), sigma * self.data_shift, assume_a="pos")


def quadratic_form(model: ModelId, panel: LossPanel, priors: PriorConfig,
                   sigma: float) -> tuple[Callable[[np.ndarray], np.ndarray], np.ndarray]:
    """Gradient function and (constant) Hessian of half the model's quadratic exponent.

    Returns the derivatives of ``f/2`` so the Hessian is directly the block's
    posterior precision: diagonal ``tau + sigma * (exposure sums)``,
    off-diagonal ``sigma * (shared exposure sums)``.
    """
    if not sigma >= 0:
        raise ValueError("sigma must be non-negative")
    qf = QuadraticForm(model, panel, priors)
    return (lambda theta: qf.gradient(theta, sigma)), qf.hessian(sigma)


# --- proposal densities --------------------------------------------------------------


@dataclass(frozen=True)
class CenteringPoint:
    model: ModelId
    block_values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "model", ModelId.parse(self.model))
        object.__setattr__(self, "block_values", np.asarray(self.block_values, dtype=float))


@dataclass(frozen=True)
class GaussianProposal:
    """Multivariate normal parameterized by its precision matrix.

    ``chol`` is the lower Cholesky factor of ``precision``.
    """

    mean: np.ndarray
    precision: np.ndarray
    chol: np.ndarray

    @classmethod
    def from_precision(cls, mean, precision, label: str = "") -> "GaussianProposal":
        precision = np.asarray(precision, dtype=float)
        scale = max(1.0, float(np.abs(precision).max()))
        if float(np.abs(precision - precision.T).max()) > 1e-12 * scale:
            raise ProposalError(f"proposal precision is not symmetric {label}")
        try:
            chol = np.linalg.cholesky(precision)
        except np.linalg.LinAlgError as exc:
            raise ProposalError(f"proposal precision is not positive definite {label}") from exc
        return cls(np.asarray(mean, dtype=float), precision, chol)

    @property
    def half_logdet(self) -> float:
        return float(np.log(self.chol.diagonal()).sum())

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def covariance(self) -> np.ndarray:
        return linalg.cho_solve((self.chol, True), np.eye(self.dim))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.dim)
        return self.mean + linalg.solve_triangular(self.chol.T, z, lower=False, check_finite=False)

    def logpdf(self, x) -> float:
        u = self.chol.T @ (np.asarray(x, dtype=float) - self.mean)
        return self.half_logdet - 0.5 * self.dim * LOG_2PI - 0.5 * float(u @ u)


def build_proposal(model: ModelId, panel: LossPanel, priors: PriorConfig, sigma: float,
                   center: CenteringPoint, order: int = 2,
                   qf: QuadraticForm | None = None) -> GaussianProposal:
    """Gaussian block proposal derived at a centering point.

    ``order=2`` (the default) matches gradient and curvature and, the log
    posterior being quadratic, reproduces the exact conditional posterior
    whatever the centering point. ``order=1`` keeps only the diagonal of the
    curvature and ``order=0`` uses the centering point as the mean; both are
    degraded modes kept for comparison.
    """
    model = ModelId.parse(model)
    qf = qf or QuadraticForm(model, panel, priors)
    if center.model is not model or center.block_values.shape != (qf.size,):
        raise DimensionMismatchError(
            f"centering point for {center.model.name} with {center.block_values.size} values "
            f"does not fit {model.name} (block size {qf.size})"
        )
    label = f"for {model.name} at sigma={sigma!r}"
    H = qf.hessian(sigma)
    theta = center.block_values
    if order == 2:
        prop = GaussianProposal.from_precision(theta, H, label)
        grad = qf.gradient(theta, sigma)
        mean = theta - linalg.cho_solve((prop.chol, True), grad, check_finite=False)
        return GaussianProposal(mean, prop.precision, prop.chol)
    if order == 1:
        D = np.diag(np.diag(H))
        return GaussianProposal.from_precision(theta - qf.gradient(theta, sigma) / np.diag(H), D, label)
    if order == 0:
        return GaussianProposal.from_precision(theta, H, label)
    raise ValueError(f"order must be 0, 1 or 2, got {order}")


@dataclass(frozen=True)
class SigmaProposal:
    """Gamma (shape/rate) proposal for the observation precision scale."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ValueError("sigma proposal needs positive shape and rate")

    def sample(self, rng: np.random.Generator) -> float:
        return rng.gamma(self.shape) / self.rate

    def logpdf(self, x: float) -> float:
        if not x > 0:
            return -math.inf
        a, b = self.shape, self.rate
        return a * math.log(b) - math.lgamma(a) + (a - 1.0) * math.log(x) - b * x


def fit_sigma_proposal(pilot_sigma_draws) -> SigmaProposal:
    """Moment-matched gamma for pilot draws of sigma."""
    x = np.asarray(pilot_sigma_draws, dtype=float)
    if x.size < 100:
        raise ValueError(f"need at least 100 pilot draws, got {x.size}")
    if np.any(~(x > 0)):
        raise ValueError("pilot sigma draws must be positive")
    mean, var = x.mean(), x.var()
    if not var > 0:
        raise ValueError("pilot sigma draws have zero variance")
    return SigmaProposal(mean * mean / var, mean / var)


class ModelProposal:
    """Everything needed to propose a jump into one model."""

    def __init__(self, model: ModelId, panel: LossPanel, priors: PriorConfig,
                 center: CenteringPoint, sigma_proposal: SigmaProposal, order: int = 2):
        self.model = ModelId.parse(model)
        self.panel, self.priors = panel, priors
        self.center = center
        self.sigma_proposal = sigma_proposal
        self.order = order
        self.qf = QuadraticForm(self.model, panel, priors)
        self._cache: dict[float, GaussianProposal] = {}

    @classmethod
    def from_pilot(cls, model: ModelId, panel: LossPanel, priors: PriorConfig, pilot: Chain,
                   order: int = 2) -> "ModelProposal":
        model = ModelId.parse(model)
        sub = pilot.for_model(model)
        if len(sub) == 0:
            raise ValueError(f"pilot chain has no draws for {model.name}")
        blocks = np.array([to_block(model, sub.params_at(k)) for k in range(len(sub))])
        center = CenteringPoint(model, blocks.mean(axis=0))
        return cls(model, panel, priors, center, fit_sigma_proposal(sub.sigma), order)

    def block(self, sigma: float) -> GaussianProposal:
        prop = self._cache.get(sigma)
        if prop is None:
            prop = build_proposal(self.model, self.panel, self.priors, sigma, self.center, self.order, self.qf)
            if len(self._cache) >= 4:
                self._cache.pop(next(iter(self._cache)))
            self._cache[sigma] = prop
        return prop

    def draw(self, rng: np.random.Generator) -> ParamVector:
        sigma = self.sigma_proposal.sample(rng)
        block = self.block(sigma).sample(rng)
        return from_block(self.model, block, sigma, self.panel.m, self.panel.n)

    def logq(self, params: ParamVector) -> float:
        """log q(block | sigma) + log q(sigma)."""
        return self.block(params.sigma).logpdf(to_block(self.model, params)) + self.sigma_proposal.logpdf(params.sigma)


# --- the sampler ---------------------------------------------------------------------


def _default_moves() -> np.ndarray:
    return np.full((3, 3), 0.5) - 0.5 * np.eye(3)


@dataclass(frozen=True)
class RjConfig:
    """Settings for one reversible-jump chain.

    ``log_prior_offsets`` are added to the model log prior to push the chain
    across models; :func:`estimate_model_probs` removes them again.
    """

    iterations: int = 50_000
    burn_in: int | None = None
    seed: int = 0
    move_matrix: np.ndarray = field(default_factory=_default_moves)
    log_prior_offsets: tuple[float, float, float] = (0.0, 0.0, 0.0)
    within_model_sweeps: int = 1
    initial_model: ModelId = ModelId.M1
    thin: int = 1

    def __post_init__(self):
        r = np.array(self.move_matrix, dtype=float)
        if r.shape != (3, 3) or np.any(r < 0) or not np.allclose(r.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("move_matrix must be a 3x3 row-stochastic matrix")
        r.setflags(write=False)
        object.__setattr__(self, "move_matrix", r)
        offsets = tuple(float(v) for v in self.log_prior_offsets)
        if len(offsets) != 3:
            raise ValueError("log_prior_offsets needs three entries")
        object.__setattr__(self, "log_prior_offsets", offsets)
        object.__setattr__(self, "initial_model", ModelId.parse(self.initial_model))
        if self.initial_model is ModelId.K:
            raise ValueError("the centred model does not take part in reversible jumps")
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.iterations // 10)
        if not 0 <= self.burn_in <= self.iterations:
            raise ValueError("burn_in must lie in [0, iterations]")
        if self.within_model_sweeps < 1 or self.thin < 1:
            raise ValueError("within_model_sweeps and thin must be at least 1")

    def log_model_prior(self, priors: PriorConfig, model: ModelId) -> float:
        k = model.index
        return priors.model_log_prior[k] + self.log_prior_offsets[k]


def log_accept(from_state: tuple[ModelId, ParamVector], to_state: tuple[ModelId, ParamVector],
               proposals: Mapping[ModelId, ModelProposal], rj: RjConfig, panel: LossPanel,
               priors: PriorConfig) -> float:
    """Log acceptance ratio for a jump between two corner-point models."""
    m_from, p_from = ModelId.parse(from_state[0]), from_state[1]
    m_to, p_to = ModelId.parse(to_state[0]), to_state[1]
    r = rj.move_matrix
    log_target = log_posterior(panel, m_to, p_to, priors) - log_posterior(panel, m_from, p_from, priors)
    log_prior_odds = rj.log_model_prior(priors, m_to) - rj.log_model_prior(priors, m_from)
    if m_to is m_from:
        log_moves = 0.0
    else:
        back, fwd = r[m_to.index, m_from.index], r[m_from.index, m_to.index]
        # an irreversible move (zero back-probability) is never accepted
        log_moves = (math.log(back) if back > 0 else -math.inf) - math.log(fwd)
    log_q = proposals[m_from].logq(p_from) - proposals[m_to].logq(p_to)
    return log_target + log_prior_odds + log_moves + log_q


def run_pilots(panel: LossPanel, priors: PriorConfig | None = None, iterations: int = 5000,
               burn_in: int = 1000, seed: int = 0) -> dict[ModelId, Chain]:
    """Independent Gibbs pilot chains for the three models."""
    priors = priors or PriorConfig()
    return {
        model: gibbs_run(panel, model, priors, GibbsConfig(iterations, burn_in, 1, seed + k))
        for k, model in enumerate(RJ_MODELS)
    }


def rj_run(panel: LossPanel, priors: PriorConfig | None, rj: RjConfig,
           pilots: Mapping[ModelId, Chain | ModelProposal]) -> Chain:
    """Alternate within-model Gibbs sweeps with between-model jump attempts.

    ``pilots`` maps each model either to a pilot chain (its posterior means
    become the centering point and its sigma draws are moment-matched to the
    sigma proposal) or to a ready-made :class:`ModelProposal`. Acceptance
    counts and rejected non-finite ratios end up in ``chain.info``.
    """
    priors = priors or PriorConfig()
    proposals: dict[ModelId, ModelProposal] = {}
    for model in RJ_MODELS:
        source = pilots[model]
        proposals[model] = (source if isinstance(source, ModelProposal)
                            else ModelProposal.from_pilot(model, panel, priors, source))

    rng = make_rng(rj.seed)
    r = rj.move_matrix
    model = rj.initial_model
    start = proposals[model]
    sigma0 = start.sigma_proposal.shape / start.sigma_proposal.rate
    params = from_block(model, start.center.block_values, sigma0, panel.m, panel.n)

    attempts = np.zeros((3, 3), dtype=np.int64)
    accepts = np.zeros((3, 3), dtype=np.int64)
    nonfinite = 0
    kept = (rj.iterations - rj.burn_in + rj.thin - 1) // rj.thin
    chain = Chain(panel.m, panel.n, capacity=kept)
    for it in range(1, rj.iterations + 1):
        for _ in range(rj.within_model_sweeps):
            sweep(panel, model, params, priors, rng)
        row = r[model.index]
        if row[model.index] < 1.0:
            target = RJ_MODELS[_pick(row, rng.random())]
            if target is not model:
                attempts[model.index, target.index] += 1
                proposed = proposals[target].draw(rng)
                log_a = log_accept((model, params), (target, proposed), proposals, rj, panel, priors)
                u = rng.random()
                if not math.isfinite(log_a):
                    nonfinite += 1
                elif log_a >= 0 or u < math.exp(log_a):
                    accepts[model.index, target.index] += 1
                    model, params = target, proposed
        if it > rj.burn_in and (it - rj.burn_in - 1) % rj.thin == 0:
            lp, dev = evaluate(panel, model, params, priors)
            chain.append(it, model, params, lp, dev)

    chain.info.update(
        sampler="rj", seed=rj.seed, log_prior_offsets=rj.log_prior_offsets,
        attempts=attempts, accepts=accepts, nonfinite=nonfinite,
    )
    return chain.trim()


def _pick(probs, u: float) -> int:
    acc = 0.0
    for k, p in enumerate(probs):
        acc += p
        if u < acc:
            return k
    return len(probs) - 1


# --- post-processing ---------------------------------------------------------------


@dataclass(frozen=True)
class ModelProbs:
    counts: np.ndarray
    raw: np.ndarray
    corrected: np.ndarray


def estimate_model_probs(chain: Chain, offsets=None) -> ModelProbs:
    """Visit frequencies, and the same with the mixing offsets divided out.

    ``offsets`` default to the ones recorded by :func:`rj_run`.
    """
    if len(chain) == 0:
        raise ValueError("empty chain")
    if offsets is None:
        offsets = chain.info.get("log_prior_offsets", (0.0, 0.0, 0.0))
    counts = np.bincount(chain.models, minlength=3)[:3]
    raw = counts / counts.sum()
    with np.errstate(divide="ignore"):
        logw = np.log(raw) - np.asarray(offsets, dtype=float)
    logw -= logw.max()
    w = np.exp(logw)
    return ModelProbs(counts, raw, w / w.sum())


def empirical_transition_matrix(chain: Chain | np.ndarray) -> np.ndarray:
    """Row-normalized one-step transition counts of the model indicator.

    Rows of models the chain never leaves from are NaN.
    """
    z = chain.models if isinstance(chain, Chain) else np.asarray(chain, dtype=np.int64)
    counts = np.zeros((3, 3))
    np.add.at(counts, (z[:-1], z[1:]), 1.0)
    totals = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(totals > 0, counts / totals, np.nan)


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Limiting probabilities of a transition matrix (rows with NaN are dropped)."""
    keep = ~np.isnan(P).any(axis=1)
    Q = P[np.ix_(keep, keep)]
    vals, vecs = np.linalg.eig(Q.T)
    v = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
    out = np.zeros(len(P))
    out[keep] = v / v.sum()
    return out


def model_averaged_predict(chains: Mapping[ModelId, Chain], model_probs, i: int, j: int) -> float:
    """Posterior-probability weighted average of each model's predictive mean."""
    probs = np.asarray(getattr(model_probs, "corrected", model_probs), dtype=float)
    total = 0.0
    for k, model in enumerate(RJ_MODELS):
        if probs[k] == 0.0:
            continue
        total += probs[k] * chains[model].predictive_mean(i, j)
    return total
