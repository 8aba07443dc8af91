"""Columnar storage for MCMC output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelId, ParamVector, RJ_MODELS, fitted

_MODEL_CODES = {ModelId.M1: 0, ModelId.M2: 1, ModelId.M3: 2, ModelId.K: 3}
_CODE_MODELS = {v: k for k, v in _MODEL_CODES.items()}


@dataclass
class ChainRecord:
    iteration: int
    model: ModelId
    params: ParamVector
    logpost: float
    deviance: float


class Chain:
    """Post-burn-in draws of a sampler, one row per retained iteration.

    Parameters a model lacks are stored as NaN. Indexing returns a
    :class:`ChainRecord`; the array attributes are meant for vectorized
    post-processing.
    """

    def __init__(self, m: int, n: int, capacity: int = 0):
        self.m, self.n = m, n
        self._size = 0
        self.iteration = np.zeros(capacity, dtype=np.int64)
        self.model_code = np.zeros(capacity, dtype=np.int8)
        self.mu = np.full(capacity, np.nan)
        self.alpha = np.full((capacity, m), np.nan)
        self.beta = np.full((capacity, n), np.nan)
        self.sigma = np.full(capacity, np.nan)
        self.tau_alpha = np.full(capacity, np.nan)
        self.tau_beta = np.full(capacity, np.nan)
        self.logpost = np.full(capacity, np.nan)
        self.deviance = np.full(capacity, np.nan)
        self.info: dict = {}

    _FIELDS = (
        "iteration", "model_code", "mu", "alpha", "beta", "sigma",
        "tau_alpha", "tau_beta", "logpost", "deviance",
    )

    def append(self, iteration: int, model: ModelId, params: ParamVector, logpost: float, dev: float) -> None:
        k = self._size
        if k == len(self.iteration):
            self._grow(max(16, 2 * k))
        self.iteration[k] = iteration
        self.model_code[k] = _MODEL_CODES[model]
        self.mu[k] = params.mu
        self.alpha[k] = np.nan if params.alpha is None else params.alpha
        self.beta[k] = np.nan if params.beta is None else params.beta
        self.sigma[k] = params.sigma
        self.tau_alpha[k] = np.nan if params.tau_alpha is None else params.tau_alpha
        self.tau_beta[k] = np.nan if params.tau_beta is None else params.tau_beta
        self.logpost[k] = logpost
        self.deviance[k] = dev
        self._size += 1

    def _grow(self, capacity: int) -> None:
        for name in self._FIELDS:
            old = getattr(self, name)
            fill = 0 if old.dtype.kind in "iu" else np.nan
            new = np.full((capacity,) + old.shape[1:], fill, dtype=old.dtype)
            new[: len(old)] = old
            setattr(self, name, new)

    def trim(self) -> "Chain":
        for name in self._FIELDS:
            setattr(self, name, getattr(self, name)[: self._size])
        return self

    def __len__(self) -> int:
        return self._size

    def model_at(self, k: int) -> ModelId:
        return _CODE_MODELS[int(self.model_code[k])]

    @property
    def models(self) -> np.ndarray:
        """Model index per draw (M1=0, M2=1, M3=2, centred=3)."""
        return self.model_code[: self._size].astype(np.int64)

    def params_at(self, k: int) -> ParamVector:
        model = self.model_at(k)
        return ParamVector(
            mu=self.mu[k],
            alpha=self.alpha[k].copy() if model.has_alpha else None,
            beta=self.beta[k].copy() if model.has_beta else None,
            sigma=self.sigma[k],
            tau_alpha=None if np.isnan(self.tau_alpha[k]) else float(self.tau_alpha[k]),
            tau_beta=None if np.isnan(self.tau_beta[k]) else float(self.tau_beta[k]),
        )

    def __getitem__(self, k: int) -> ChainRecord:
        if k < 0:
            k += self._size
        if not 0 <= k < self._size:
            raise IndexError(k)
        return ChainRecord(
            int(self.iteration[k]), self.model_at(k), self.params_at(k),
            float(self.logpost[k]), float(self.deviance[k]),
        )

    def __iter__(self):
        for k in range(self._size):
            yield self[k]

    def select(self, mask) -> "Chain":
        """Sub-chain of the rows where ``mask`` is true."""
        mask = np.asarray(mask)
        out = Chain(self.m, self.n)
        for name in self._FIELDS:
            setattr(out, name, getattr(self, name)[: self._size][mask].copy())
        out._size = len(out.iteration)
        out.info = dict(self.info)
        return out

    def for_model(self, model: ModelId) -> "Chain":
        return self.select(self.models == _MODEL_CODES[model])

    def fits(self) -> np.ndarray:
        """``(N, m, n)`` array of cell means for every draw."""
        out = np.empty((self._size, self.m, self.n))
        for k in range(self._size):
            out[k] = fitted(self.model_at(k), self.params_at(k), self.m, self.n)
        return out

    def predictive_mean(self, i: int, j: int) -> float:
        """Chain average of the cell mean ``fit[i, j]``."""
        if not (0 <= i < self.m and 0 <= j < self.n):
            raise IndexError(f"cell ({i}, {j}) out of range")
        if self._size == 0:
            raise ValueError("empty chain")
        total = 0.0
        for k in range(self._size):
            model = self.model_at(k)
            val = 0.0 if model is ModelId.K else self.mu[k]
            if model.has_alpha:
                val += self.alpha[k, i]
            if model.has_beta:
                val += self.beta[k, j]
            total += val
        return total / self._size

    def columns(self) -> tuple[list[str], np.ndarray]:
        """Header and numeric matrix in chain.csv column order."""
        names = ["iteration", "model", "mu"]
        names += [f"alpha_{i + 1}" for i in range(self.m)]
        names += [f"beta_{j + 1}" for j in range(self.n)]
        names += ["sigma", "tau_alpha", "tau_beta", "logpost", "deviance"]
        k = self._size
        data = np.column_stack([
            self.iteration[:k], self.model_code[:k] + 1, self.mu[:k], self.alpha[:k],
            self.beta[:k], self.sigma[:k], self.tau_alpha[:k], self.tau_beta[:k],
            self.logpost[:k], self.deviance[:k],
        ]) if k else np.empty((0, len(names)))
        return names, data


def model_names() -> list[str]:
    return [m.name for m in RJ_MODELS]
