"""Chain quality metrics: autocorrelation, HPD intervals, ESS, multi-chain checks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class AcfSeries:
    lags: np.ndarray
    values: np.ndarray
    ci_band: float


@dataclass(frozen=True)
class HpdInterval:
    lo: float
    hi: float
    level: float

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _acf_all(x: np.ndarray) -> np.ndarray:
    """Autocorrelations at every lag via FFT, with the 1/N (biased) normalization."""
    n = x.size
    d = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(d, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n]
    if not acov[0] > 0:
        raise ValueError("series has zero variance; autocorrelation is undefined")
    out = acov / acov[0]
    out[0] = 1.0
    return out


def autocorrelation(series, max_lag: int) -> AcfSeries:
    """Sample autocorrelation function up to ``max_lag``.

    The band half-width ``1.96 / sqrt(N)`` is the usual white-noise guide.
    """
    x = np.asarray(series, dtype=float).ravel()
    if max_lag < 0 or x.size <= max_lag:
        raise ValueError(f"need 0 <= max_lag < len(series), got max_lag={max_lag}, N={x.size}")
    if np.ptp(x) == 0:
        raise ValueError("series has zero variance; autocorrelation is undefined")
    values = _acf_all(x)[: max_lag + 1]
    return AcfSeries(np.arange(max_lag + 1), np.clip(values, -1.0, 1.0), 1.96 / math.sqrt(x.size))


def hpd_interval(samples, level: float = 0.95) -> HpdInterval:
    """Shortest window of the sorted sample holding ``ceil(level * N)`` points."""
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < 20:
        raise ValueError(f"need at least 20 samples for an HPD interval, got {n}")
    k = math.ceil(level * n)
    widths = x[k - 1:] - x[: n - k + 1]
    start = int(np.argmin(widths))
    return HpdInterval(float(x[start]), float(x[start + k - 1]), level)


def equal_tailed_interval(samples, level: float = 0.95) -> tuple[float, float]:
    q = (1 - level) / 2
    lo, hi = np.quantile(np.asarray(samples, dtype=float), [q, 1 - q])
    return float(lo), float(hi)


def effective_sample_size(series) -> float:
    """ESS with Geyer's initial positive sequence truncation, clipped to [1, N].

    A constant series carries one sample's worth of information.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise ValueError("empty series")
    if n < 4 or np.ptp(x) == 0:
        return 1.0
    rho = _acf_all(x)
    tau = -1.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    return float(min(max(n / tau, 1.0), n))


@dataclass(frozen=True)
class MultichainResult:
    """Outcome of the visit-count chi-square and log-posterior KS comparisons.

    Statistics are computed on chains thinned by ``ceil(N / ESS)`` so the
    5% reference distributions are approximately valid for correlated draws.
    The KS critical value is Bonferroni-adjusted over chain pairs.
    """

    chi_square: float
    chi_df: int
    chi_critical: float
    chi_pass: bool
    ks: float
    ks_critical: float
    ks_pass: bool
    thin_indicator: int
    thin_logpost: int

    @property
    def passed(self) -> bool:
        return self.chi_pass and self.ks_pass


def _thin_factor(series_list) -> int:
    factor = 1
    for x in series_list:
        x = np.asarray(x, dtype=float)
        if np.ptp(x) == 0:
            continue
        factor = max(factor, math.ceil(x.size / effective_sample_size(x)))
    return factor


def chi_square_homogeneity(tables: np.ndarray) -> tuple[float, int]:
    """Pearson statistic for a chains-by-models count table (empty columns dropped)."""
    t = np.asarray(tables, dtype=float)
    t = t[:, t.sum(axis=0) > 0]
    if t.shape[1] < 2:
        return 0.0, 0
    expected = t.sum(axis=1, keepdims=True) * t.sum(axis=0, keepdims=True) / t.sum()
    stat = float(((t - expected) ** 2 / expected).sum())
    return stat, (t.shape[0] - 1) * (t.shape[1] - 1)


def multichain_diagnostic(indicators, logposts, level: float = 0.05,
                          n_models: int = 3) -> MultichainResult:
    """Compare independent chains of the model indicator and log posterior.

    Parameters
    ----------
    indicators : sequence of int arrays
        Post-burn-in model index per iteration, one array per chain.
    logposts : sequence of float arrays
        Matching log-posterior traces.
    level : float
        Test size for both comparisons.
    """
    ind = [np.asarray(c, dtype=np.int64) for c in indicators]
    lps = [np.asarray(c, dtype=float) for c in logposts]
    if len(ind) < 2 or len(lps) != len(ind):
        raise ValueError("need at least two chains, with one log-posterior trace per chain")
    n = ind[0].size
    if n == 0 or any(c.size != n for c in ind + lps):
        raise ValueError("chains must be non-empty and of equal length")

    onehots = [(c == k).astype(float) for c in ind for k in range(n_models)]
    thin_i = _thin_factor(onehots)
    table = np.array([np.bincount(c[::thin_i], minlength=n_models)[:n_models] for c in ind])
    chi, df = chi_square_homogeneity(table)
    chi_crit = float(stats.chi2.ppf(1 - level, df)) if df > 0 else math.inf

    thin_l = _thin_factor(lps)
    thinned = [c[::thin_l] for c in lps]
    pairs = list(itertools.combinations(range(len(thinned)), 2))
    ks = max(float(stats.ks_2samp(thinned[a], thinned[b]).statistic) for a, b in pairs)
    size = thinned[0].size
    c_alpha = math.sqrt(-0.5 * math.log(level / len(pairs) / 2))
    ks_crit = c_alpha * math.sqrt(2.0 / size)

    return MultichainResult(chi, df, chi_crit, chi < chi_crit, ks, ks_crit, ks < ks_crit, thin_i, thin_l)
