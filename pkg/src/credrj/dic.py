"""Deviance information criterion and effective number of parameters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import Chain
from .model import LossPanel, ModelId, ParamVector, deviance


@dataclass(frozen=True)
class DicReport:
    """DIC summary of one model's chain.

    ``dic = mean_deviance + p_D = deviance_at_mean + 2 * p_D``.
    """

    mean_deviance: float
    deviance_at_mean: float
    p_D: float
    dic: float
    model: ModelId

    def identity_error(self) -> float:
        """Largest departure from the two DIC identities (should be ~0)."""
        return max(abs(self.dic - (self.mean_deviance + self.p_D)),
                   abs(self.dic - (self.deviance_at_mean + 2.0 * self.p_D)))


def point_estimate(chain: Chain, model: ModelId, center: str = "mean") -> ParamVector:
    """Coordinate-wise posterior mean (or median) of a single-model chain."""
    if center == "mean":
        agg = lambda a: np.mean(a, axis=0)  # noqa: E731
    elif center == "median":
        agg = lambda a: np.median(a, axis=0)  # noqa: E731
    else:
        raise ValueError(f"center must be 'mean' or 'median', got {center!r}")
    k = len(chain)
    return ParamVector(
        mu=float(agg(chain.mu[:k])),
        alpha=agg(chain.alpha[:k]) if model.has_alpha else None,
        beta=agg(chain.beta[:k]) if model.has_beta else None,
        sigma=float(agg(chain.sigma[:k])),
        tau_alpha=float(agg(chain.tau_alpha[:k])) if model is ModelId.K else None,
        tau_beta=float(agg(chain.tau_beta[:k])) if model is ModelId.K else None,
    )


def compute_dic(chain: Chain, panel: LossPanel, model: ModelId | str | None = None,
                center: str = "mean") -> DicReport:
    """DIC from recorded per-draw deviances plus one evaluation at the centre.

    Parameters
    ----------
    chain : Chain
        Post-burn-in draws, all from ``model``.
    panel : LossPanel
        The data the chain was fitted to.
    model : ModelId, optional
        Defaults to the chain's (single) model.
    center : {"mean", "median"}
        Point estimate at which ``D(theta_bar)`` is evaluated.
    """
    if len(chain) == 0:
        raise ValueError("cannot compute DIC from an empty chain")
    codes = np.unique(chain.models)
    if codes.size != 1:
        raise ValueError("chain mixes several models; split it with Chain.for_model first")
    found = chain.model_at(0)
    model = found if model is None else ModelId.parse(model)
    if model is not found:
        raise ValueError(f"chain holds {found.name} draws, not {model.name}")

    d_bar = float(np.mean(chain.deviance[: len(chain)]))
    d_hat = deviance(panel, model, point_estimate(chain, model, center))
    p_d = d_bar - d_hat
    return DicReport(d_bar, d_hat, p_d, d_bar + p_d, model)


def rank_models(reports) -> list[DicReport]:
    """Best first: ascending DIC, then smaller p_D, then model index."""
    return sorted(reports, key=lambda r: (r.dic, r.p_D, r.model.index))


def format_table(reports) -> str:
    """Fixed-width text table with the columns D-bar, D(theta-bar), p_D, DIC."""
    lines = [f"{'Model':<10}{'Dbar':>14}{'D(thetabar)':>14}{'pD':>10}{'DIC':>14}"]
    for r in reports:
        lines.append(f"{r.model.name:<10}{r.mean_deviance:>14.2f}{r.deviance_at_mean:>14.2f}"
                     f"{r.p_D:>10.2f}{r.dic:>14.2f}")
    return "\n".join(lines) + "\n"
