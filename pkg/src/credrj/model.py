"""Loss panels, model parameterizations, priors and exact log densities.

Four models share one observation equation,

    R[i, j, t] ~ Normal(fit[i, j], 1 / (sigma * E[i, j, t]))

and differ only in how ``fit`` is built:

==========  =============================  ===========================
model       fit[i, j]                      free parameters
==========  =============================  ===========================
K_centred   alpha[i] + beta[j]             mu, alpha, beta, sigma,
                                           tau_alpha, tau_beta
M1_full     mu + alpha[i] + beta[j]        mu, alpha[1:], beta[1:], sigma
M2          mu + alpha[i]                  mu, alpha[1:], sigma
M3          mu + beta[j]                   mu, beta[1:], sigma
==========  =============================  ===========================

The corner-point models fix ``alpha[0] = beta[0] = 0``. Indices are zero based
throughout. Gamma densities use a shape/rate parameterization.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatchError, DomainError

LOG_2PI = math.log(2.0 * math.pi)


class ModelId(str, enum.Enum):
    M1 = "M1_full"
    M2 = "M2_state_only"
    M3 = "M3_occupation_only"
    K = "K_centred"

    @property
    def index(self) -> int:
        """Position among the reversible-jump models (M1=0, M2=1, M3=2)."""
        return _INDEX[self]

    @property
    def has_alpha(self) -> bool:
        return self is not ModelId.M3

    @property
    def has_beta(self) -> bool:
        return self is not ModelId.M2

    @property
    def corner(self) -> bool:
        return self is not ModelId.K

    def n_free(self, m: int, n: int) -> int:
        if self is ModelId.M1:
            return 1 + (m - 1) + (n - 1) + 1
        if self is ModelId.M2:
            return 1 + (m - 1) + 1
        if self is ModelId.M3:
            return 1 + (n - 1) + 1
        return 1 + m + n + 3

    def block_size(self, m: int, n: int) -> int:
        """Length of the (mu, free alpha, free beta) block of a corner-point model."""
        if self is ModelId.K:
            raise ValueError("the centred model has no corner-point block")
        return self.n_free(m, n) - 1

    @classmethod
    def parse(cls, value: "str | int | ModelId") -> "ModelId":
        if isinstance(value, ModelId):
            return value
        if isinstance(value, (int, np.integer)):
            return RJ_MODELS[int(value)]
        key = str(value).strip()
        for model in cls:
            if key in (model.value, model.name) or key.upper() == model.name:
                return model
        aliases = {"1": cls.M1, "2": cls.M2, "3": cls.M3, "KLUGMAN": cls.K, "CENTRED": cls.K}
        if key.upper() in aliases:
            return aliases[key.upper()]
        raise ValueError(f"unknown model {value!r}")


RJ_MODELS: tuple[ModelId, ...] = (ModelId.M1, ModelId.M2, ModelId.M3)
_INDEX = {ModelId.M1: 0, ModelId.M2: 1, ModelId.M3: 2, ModelId.K: 3}


class LossPanel:
    """Loss ratios and exposures on an ``m x n x s`` grid.

    Cells with zero exposure are inactive: they are excluded from every sum,
    and their loss ratio is stored as NaN so that accidental use shows up.

    Parameters
    ----------
    R : array_like, shape (m, n, s)
        Loss ratios. Values at inactive cells are ignored.
    E : array_like, shape (m, n, s)
        Non-negative exposures.
    states, occupations, years : sequence, optional
        Labels for each axis, kept for reporting.
    """

    def __init__(self, R, E, states=None, occupations=None, years=None):
        R = np.array(R, dtype=float)
        E = np.array(E, dtype=float)
        if R.ndim != 3 or R.shape != E.shape:
            raise DimensionMismatchError(
                f"R and E must be 3-d arrays of equal shape, got {R.shape} and {E.shape}"
            )
        m, n, s = R.shape
        if m < 2 or n < 2 or s < 1:
            raise DimensionMismatchError(f"panel needs m >= 2, n >= 2, s >= 1; got {R.shape}")
        if not np.all(np.isfinite(E)) or np.any(E < 0):
            raise DomainError("exposures must be finite and non-negative")
        active = E > 0
        if not np.all(np.isfinite(R[active])):
            raise DomainError("loss ratios must be finite on active cells")
        R[~active] = np.nan

        self.R = R
        self.E = E
        self.active = active
        self.states = list(states) if states is not None else [str(i + 1) for i in range(m)]
        self.occupations = (
            list(occupations) if occupations is not None else [str(j + 1) for j in range(n)]
        )
        self.years = list(years) if years is not None else list(range(1, s + 1))

        # Zero-filled copy: E * (R0 - fit) ** 2 vanishes on inactive cells.
        self._R0 = np.where(active, R, 0.0)
        self.W = E.sum(axis=2)
        self.S = (E * self._R0).sum(axis=2)
        self.W_row, self.W_col = self.W.sum(axis=1), self.W.sum(axis=0)
        self.S_row, self.S_col = self.S.sum(axis=1), self.S.sum(axis=0)
        self.n_active = int(active.sum())
        self._log_norm = float(np.sum(np.log(E[active]) - LOG_2PI))
        for arr in (self.R, self.E, self.active, self._R0, self.W, self.S,
                    self.W_row, self.W_col, self.S_row, self.S_col):
            arr.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.R.shape

    @property
    def m(self) -> int:
        return self.R.shape[0]

    @property
    def n(self) -> int:
        return self.R.shape[1]

    @property
    def s(self) -> int:
        return self.R.shape[2]

    def weighted_ss(self, fit: np.ndarray) -> float:
        """Sum over active cells of ``E * (R - fit)**2`` for an ``(m, n)`` fit."""
        resid = self._R0 - fit[:, :, None]
        return float(np.sum(self.E * resid * resid))

    def weighted_mean(self) -> float:
        return float(self.S.sum() / self.W.sum()) if self.n_active else 0.0

    def with_exposure(self, E) -> "LossPanel":
        """Copy with new exposures; newly inactive cells lose their loss ratio."""
        R = np.where(self.active, self.R, 0.0)
        return LossPanel(R, E, self.states, self.occupations, self.years)

    def __repr__(self) -> str:
        m, n, s = self.shape
        return f"LossPanel(m={m}, n={n}, s={s}, active={self.n_active})"


@dataclass
class ParamVector:
    """Parameter values for one model.

    ``alpha`` has length m and ``beta`` length n. In the corner-point models the
    first entry of each is pinned to zero; an effect the model lacks is ``None``.
    ``tau_alpha`` and ``tau_beta`` are only used by the centred model.
    """

    mu: float
    alpha: np.ndarray | None
    beta: np.ndarray | None
    sigma: float
    tau_alpha: float | None = None
    tau_beta: float | None = None

    def __post_init__(self):
        self.mu = float(self.mu)
        self.sigma = float(self.sigma)
        if self.alpha is not None:
            self.alpha = np.asarray(self.alpha, dtype=float)
        if self.beta is not None:
            self.beta = np.asarray(self.beta, dtype=float)

    def copy(self) -> "ParamVector":
        return replace(
            self,
            alpha=None if self.alpha is None else self.alpha.copy(),
            beta=None if self.beta is None else self.beta.copy(),
        )


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters shared by every model.

    ``a`` and ``b`` are the gamma shape and rate for sigma (and for the tau's of
    the centred model); ``c`` is the precision of the centred model's mu prior.
    The corner-point models use fixed prior precisions ``tau_mu``,
    ``tau_alpha0`` and ``tau_beta0``. ``model_log_prior`` holds log p(M1),
    log p(M2), log p(M3) up to an additive constant.
    """

    a: float = 0.001
    b: float = 0.001
    c: float = 0.001
    tau_mu: float = 0.001
    tau_alpha0: float = 0.001
    tau_beta0: float = 0.001
    model_log_prior: tuple[float, float, float] = field(default=(0.0, 0.0, 0.0))

    def __post_init__(self):
        for name in ("a", "b", "c", "tau_mu", "tau_alpha0", "tau_beta0"):
            if not getattr(self, name) > 0:
                raise DomainError(f"prior hyperparameter {name} must be positive")
        lp = tuple(float(v) for v in self.model_log_prior)
        if len(lp) != 3:
            raise DimensionMismatchError("model_log_prior must have three entries")
        object.__setattr__(self, "model_log_prior", lp)


def check_params(panel: LossPanel, model: ModelId, params: ParamVector) -> None:
    """Raise if ``params`` is not a valid point of ``model`` for this panel."""
    m, n = panel.m, panel.n
    for name, vec, size, needed in (
        ("alpha", params.alpha, m, model.has_alpha),
        ("beta", params.beta, n, model.has_beta),
    ):
        if needed:
            if vec is None or vec.shape != (size,):
                got = None if vec is None else vec.shape
                raise DimensionMismatchError(f"{model.name}: {name} must have shape ({size},), got {got}")
            if model.corner and vec[0] != 0.0:
                raise DomainError(f"{model.name}: corner constraint requires {name}[0] == 0")
        elif vec is not None:
            raise DimensionMismatchError(f"{model.name} has no {name} effect")
    if not params.sigma > 0:
        raise DomainError(f"sigma must be positive, got {params.sigma}")
    if model is ModelId.K:
        for name in ("tau_alpha", "tau_beta"):
            val = getattr(params, name)
            if val is None or not val > 0:
                raise DomainError(f"{name} must be positive for the centred model, got {val}")


def fitted(model: ModelId, params: ParamVector, m: int, n: int) -> np.ndarray:
    """The ``(m, n)`` array of cell means."""
    fit = np.zeros((m, n))
    if model is not ModelId.K:
        fit += params.mu
    if params.alpha is not None:
        fit += params.alpha[:, None]
    if params.beta is not None:
        fit += params.beta[None, :]
    return fit


def norm_logpdf(x, mean, precision):
    """Normal log density with the second argument a precision."""
    d = np.asarray(x, dtype=float) - mean
    return 0.5 * (np.log(precision) - LOG_2PI) - 0.5 * precision * d * d


def gamma_logpdf(x: float, shape: float, rate: float) -> float:
    if not x > 0:
        raise DomainError(f"gamma density evaluated at non-positive value {x}")
    return shape * math.log(rate) - math.lgamma(shape) + (shape - 1.0) * math.log(x) - rate * x


def log_likelihood(panel: LossPanel, model: ModelId, params: ParamVector) -> float:
    check_params(panel, model, params)
    return _log_lik(panel, model, params)


def _log_lik(panel: LossPanel, model: ModelId, params: ParamVector) -> float:
    if panel.n_active == 0:
        return 0.0
    fit = fitted(model, params, panel.m, panel.n)
    sigma = params.sigma
    return 0.5 * (panel.n_active * math.log(sigma) + panel._log_norm) - 0.5 * sigma * panel.weighted_ss(fit)


def log_prior(model: ModelId, params: ParamVector, priors: PriorConfig) -> float:
    """Log prior density over the free parameters, normalizing constants included."""
    p = params
    if not p.sigma > 0:
        raise DomainError(f"sigma must be positive, got {p.sigma}")
    lp = gamma_logpdf(p.sigma, priors.a, priors.b)
    if model is ModelId.K:
        if p.alpha is None or p.beta is None:
            raise DimensionMismatchError("centred model needs both alpha and beta")
        lp += gamma_logpdf(p.tau_alpha, priors.a, priors.b)
        lp += gamma_logpdf(p.tau_beta, priors.a, priors.b)
        lp += float(norm_logpdf(p.mu, 0.0, priors.c))
        lp += float(np.sum(norm_logpdf(p.alpha, 0.5 * p.mu, p.tau_alpha)))
        lp += float(np.sum(norm_logpdf(p.beta, 0.5 * p.mu, p.tau_beta)))
        return lp
    lp += _zero_mean_normal(priors.tau_mu, 1, p.mu * p.mu)
    if model.has_alpha:
        a = p.alpha[1:]
        lp += _zero_mean_normal(priors.tau_alpha0, a.size, float(a @ a))
    if model.has_beta:
        b = p.beta[1:]
        lp += _zero_mean_normal(priors.tau_beta0, b.size, float(b @ b))
    return lp


def _zero_mean_normal(precision: float, count: int, sumsq: float) -> float:
    return 0.5 * count * (math.log(precision) - LOG_2PI) - 0.5 * precision * sumsq


def log_posterior(panel: LossPanel, model: ModelId, params: ParamVector, priors: PriorConfig) -> float:
    """Unnormalized log posterior: log-likelihood plus log prior."""
    check_params(panel, model, params)
    return _log_lik(panel, model, params) + log_prior(model, params, priors)


def deviance(panel: LossPanel, model: ModelId, params: ParamVector) -> float:
    """``-2 * log_likelihood``; the standardizing term is taken as 1."""
    return -2.0 * log_likelihood(panel, model, params)


def predictive_mean(model: ModelId, params: ParamVector, i: int, j: int) -> float:
    m = len(params.alpha) if params.alpha is not None else None
    n = len(params.beta) if params.beta is not None else None
    if (m is not None and not 0 <= i < m) or (n is not None and not 0 <= j < n) or i < 0 or j < 0:
        raise IndexError(f"cell ({i}, {j}) out of range")
    value = 0.0 if model is ModelId.K else params.mu
    if model.has_alpha:
        value += params.alpha[i]
    if model.has_beta:
        value += params.beta[j]
    return float(value)


def predictive_variance(params: ParamVector, exposure: float) -> float:
    """Observation variance ``1 / (sigma * E)`` of a new loss ratio given parameters."""
    if not exposure > 0:
        raise DomainError("predictive variance needs positive exposure")
    return 1.0 / (params.sigma * exposure)


# --- corner-point block layout: (mu, alpha[1:], beta[1:]) -------------------


def to_block(model: ModelId, params: ParamVector) -> np.ndarray:
    parts = [np.array([params.mu])]
    if model.has_alpha:
        parts.append(params.alpha[1:])
    if model.has_beta:
        parts.append(params.beta[1:])
    return np.concatenate(parts)


def from_block(model: ModelId, block: np.ndarray, sigma: float, m: int, n: int) -> ParamVector:
    block = np.asarray(block, dtype=float)
    if block.shape != (model.block_size(m, n),):
        raise DimensionMismatchError(
            f"{model.name} block must have length {model.block_size(m, n)}, got {block.shape}"
        )
    alpha = beta = None
    k = 1
    if model.has_alpha:
        alpha = np.concatenate([[0.0], block[k : k + m - 1]])
        k += m - 1
    if model.has_beta:
        beta = np.concatenate([[0.0], block[k : k + n - 1]])
    return ParamVector(mu=block[0], alpha=alpha, beta=beta, sigma=sigma)


def block_labels(model: ModelId, m: int, n: int) -> list[str]:
    labels = ["mu"]
    if model.has_alpha:
        labels += [f"alpha_{i + 1}" for i in range(1, m)]
    if model.has_beta:
        labels += [f"beta_{j + 1}" for j in range(1, n)]
    return labels
