"""Bayesian two-way credibility models with Gibbs and reversible-jump samplers.

The loss ratio of state ``i``, occupation ``j`` in year ``t`` is modelled as
``N(fit_ij, 1 / (sigma * E_ijt))`` with exposure ``E``. Four location
structures are available (:class:`ModelId`): the centred hierarchical model and
three corner-point models with both effects, state only, or occupation only.
"""

from .chain import Chain, ChainRecord
from .dic import DicReport, compute_dic, rank_models
from .diagnostics import (
    AcfSeries,
    HpdInterval,
    autocorrelation,
    effective_sample_size,
    hpd_interval,
    multichain_diagnostic,
)
from .gibbs import GibbsConfig, gibbs_run
from .io import ingest, load_example, simulate
from .model import (
    LossPanel,
    ModelId,
    ParamVector,
    PriorConfig,
    deviance,
    log_likelihood,
    log_posterior,
    log_prior,
    predictive_mean,
)
from .rj import (
    RjConfig,
    build_proposal,
    empirical_transition_matrix,
    estimate_model_probs,
    log_accept,
    model_averaged_predict,
    rj_run,
    run_pilots,
)

__version__ = "0.1.0"

__all__ = [
    "AcfSeries", "Chain", "ChainRecord", "DicReport", "GibbsConfig", "HpdInterval",
    "LossPanel", "ModelId", "ParamVector", "PriorConfig", "RjConfig",
    "autocorrelation", "build_proposal", "compute_dic", "deviance",
    "effective_sample_size", "empirical_transition_matrix", "estimate_model_probs",
    "gibbs_run", "hpd_interval", "ingest", "load_example", "log_accept",
    "log_likelihood", "log_posterior", "log_prior", "model_averaged_predict",
    "multichain_diagnostic", "predictive_mean", "rank_models", "rj_run",
    "run_pilots", "simulate",
]
