"""Full conditional distributions for the Gibbs samplers.

Everything here returns distribution parameters; drawing happens in
:mod:`credrj.gibbs`. All sums run over active cells only, which the panel's
zero exposures take care of automatically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, DomainError
from .model import LossPanel, ModelId, ParamVector, fitted


@dataclass(frozen=True)
class NormalParams:
    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise DomainError(f"normal variance must be positive, got {self.variance}")

    @property
    def precision(self) -> float:
        return 1.0 / self.variance


@dataclass(frozen=True)
class GammaParams:
    """Gamma distribution with a rate (not scale) parameter."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise DomainError(f"gamma shape and rate must be positive, got {self.shape}, {self.rate}")

    @property
    def mean(self) -> float:
        return self.shape / self.rate


@dataclass(frozen=True)
class MvnDiagParams:
    mean: np.ndarray
    precision_diag: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        prec = np.asarray(self.precision_diag, dtype=float)
        if mean.shape != prec.shape:
            raise DimensionMismatchError("mean and precision_diag lengths differ")
        if np.any(~(prec > 0)):
            raise DomainError("block precisions must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "precision_diag", prec)


def _effect(vec, size):
    return np.zeros(size) if vec is None else np.asarray(vec, dtype=float)


# --- centred (Klugman) model --------------------------------------------------


def alpha_centred_all(panel, mu, beta, tau_alpha, sigma):
    """Conditional means and precisions of every alpha_i at once."""
    beta = np.asarray(beta, dtype=float)
    prec = tau_alpha + sigma * panel.W_row
    mean = (0.5 * tau_alpha * mu + sigma * (panel.S_row - panel.W @ beta)) / prec
    return mean, prec


def beta_centred_all(panel, mu, alpha, tau_beta, sigma):
    alpha = np.asarray(alpha, dtype=float)
    prec = tau_beta + sigma * panel.W_col
    mean = (0.5 * tau_beta * mu + sigma * (panel.S_col - alpha @ panel.W)) / prec
    return mean, prec


def cond_alpha_centred(panel: LossPanel, i: int, mu: float, beta, tau_alpha: float, sigma: float) -> NormalParams:
    if not 0 <= i < panel.m:
        raise IndexError(f"row index {i} out of range")
    mean, prec = alpha_centred_all(panel, mu, beta, tau_alpha, sigma)
    return NormalParams(float(mean[i]), float(1.0 / prec[i]))


def cond_beta_centred(panel: LossPanel, j: int, mu: float, alpha, tau_beta: float, sigma: float) -> NormalParams:
    if not 0 <= j < panel.n:
        raise IndexError(f"column index {j} out of range")
    mean, prec = beta_centred_all(panel, mu, alpha, tau_beta, sigma)
    return NormalParams(float(mean[j]), float(1.0 / prec[j]))


def cond_mu_centred(alpha, beta, tau_alpha: float, tau_beta: float, c: float) -> NormalParams:
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    m, n = alpha.size, beta.size
    if m == 0 or n == 0:
        raise DimensionMismatchError("centred mu conditional needs at least one alpha and one beta")
    prec = c + 0.25 * m * tau_alpha + 0.25 * n * tau_beta
    mean = (0.5 * tau_alpha * alpha.sum() + 0.5 * tau_beta * beta.sum()) / prec
    return NormalParams(float(mean), float(1.0 / prec))


def cond_tau_alpha(alpha, mu: float, a: float, b: float) -> GammaParams:
    d = np.asarray(alpha, dtype=float) - 0.5 * mu
    return GammaParams(a + 0.5 * d.size, b + 0.5 * float(d @ d))


def cond_tau_beta(beta, mu: float, a: float, b: float) -> GammaParams:
    return cond_tau_alpha(beta, mu, a, b)


# --- shared --------------------------------------------------------------------


def cond_sigma(panel: LossPanel, model: ModelId, params: ParamVector, a: float, b: float) -> GammaParams:
    """Observation precision scale given all location parameters."""
    fit = fitted(model, params, panel.m, panel.n)
    return GammaParams(a + 0.5 * panel.n_active, b + 0.5 * panel.weighted_ss(fit))


# --- corner-point (non-centred) models ------------------------------------------


def cond_mu_noncentred(panel: LossPanel, alpha, beta, sigma: float, tau_mu: float) -> NormalParams:
    """Pass ``None`` for an effect the model lacks."""
    alpha = _effect(alpha, panel.m)
    beta = _effect(beta, panel.n)
    prec = tau_mu + sigma * panel.W_row.sum()
    resid = panel.S_row.sum() - alpha @ panel.W_row - panel.W_col @ beta
    return NormalParams(float(sigma * resid / prec), float(1.0 / prec))


def cond_alpha_block(panel: LossPanel, mu: float, beta, sigma: float, tau_alpha0: float) -> MvnDiagParams:
    """Joint conditional of ``alpha[1:]``; the block is diagonal."""
    beta = _effect(beta, panel.n)
    w_row = panel.W_row[1:]
    prec = tau_alpha0 + sigma * w_row
    mean = sigma * (panel.S_row[1:] - mu * w_row - panel.W[1:] @ beta) / prec
    return MvnDiagParams(mean, prec)


def cond_beta_block(panel: LossPanel, mu: float, alpha, sigma: float, tau_beta0: float) -> MvnDiagParams:
    """Joint conditional of ``beta[1:]``."""
    alpha = _effect(alpha, panel.m)
    w_col = panel.W_col[1:]
    prec = tau_beta0 + sigma * w_col
    mean = sigma * (panel.S_col[1:] - mu * w_col - alpha @ panel.W[:, 1:]) / prec
    return MvnDiagParams(mean, prec)
