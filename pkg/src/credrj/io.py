"""Panel CSV ingestion, synthetic data, run configuration and report writers."""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DataError, DimensionMismatchError
from .gibbs import GibbsConfig, make_rng
from .model import LossPanel, ModelId, ParamVector, PriorConfig, check_params, fitted
from .rj import RjConfig

log = logging.getLogger(__name__)

HEADER = ("state", "occupation", "year", "loss", "exposure")
EXAMPLE_PANEL = "synthetic_panel.csv"


# --- ingestion -------------------------------------------------------------------


def _parse_float(text: str, what: str, line: int, allow_negative: bool = False) -> float:
    try:
        val = float(text)
    except ValueError:
        raise DataError(f"cannot parse {what} {text!r}", line) from None
    if not math.isfinite(val):
        raise DataError(f"{what} must be finite, got {text!r}", line)
    if val < 0 and not allow_negative:
        raise DataError(f"{what} must be non-negative, got {text!r}", line)
    return val


def read_rows(path, allow_negative_loss: bool = False) -> list[tuple[str, str, int, float, float, int]]:
    """Parse and validate a panel CSV; returns (state, occ, year, loss, exposure, line)."""
    rows = []
    seen: dict[tuple[str, str, int], int] = {}
    with open(path, newline="") as fh:
        # blank out comments rather than dropping them so line numbers stay true
        reader = csv.reader("\n" if line.lstrip().startswith("#") else line for line in fh)
        header = None
        for rec in reader:
            if not rec or all(not c.strip() for c in rec):
                continue
            if header is None:
                header = tuple(c.strip().lower() for c in rec)
                if header != HEADER:
                    raise DataError(f"expected header {','.join(HEADER)}, got {','.join(rec)}", reader.line_num)
                continue
            line = reader.line_num
            if len(rec) != 5:
                raise DataError(f"expected 5 fields, got {len(rec)}", line)
            state, occ = rec[0].strip(), rec[1].strip()
            if not state or not occ:
                raise DataError("empty state or occupation id", line)
            try:
                year = int(rec[2])
            except ValueError:
                raise DataError(f"cannot parse year {rec[2]!r}", line) from None
            loss = _parse_float(rec[3], "loss", line, allow_negative_loss)
            expo = _parse_float(rec[4], "exposure", line)
            key = (state, occ, year)
            if key in seen:
                raise DataError(f"duplicate row for {key} (first seen on line {seen[key]})", line)
            seen[key] = line
            rows.append((state, occ, year, loss, expo, line))
    if header is None:
        raise DataError("empty file: no header found")
    if not rows:
        raise DataError("file has a header but no data rows")
    return rows


def ingest(path, holdout_year: int | None = None,
           allow_negative_loss: bool = False) -> tuple[LossPanel, LossPanel | None]:
    """Build the fit panel (and optional holdout-year panel) from a CSV file.

    States and occupations keep their order of first appearance; years are
    sorted. Missing rows and zero-exposure rows are inactive cells. Occupation
    columns with no active cell in the fit years are dropped from both panels.

    Losses must be non-negative unless ``allow_negative_loss`` is set, which
    Gaussian synthetic panels need.
    """
    rows = read_rows(path, allow_negative_loss)
    states = list(dict.fromkeys(r[0] for r in rows))
    occs = list(dict.fromkeys(r[1] for r in rows))
    years = sorted({r[2] for r in rows})
    si = {k: i for i, k in enumerate(states)}
    oi = {k: j for j, k in enumerate(occs)}
    yi = {k: t for t, k in enumerate(years)}

    L = np.zeros((len(states), len(occs), len(years)))
    E = np.zeros_like(L)
    for state, occ, year, loss, expo, line in rows:
        if expo == 0 and loss > 0:
            log.warning("line %d: positive loss with zero exposure; cell treated as inactive", line)
        L[si[state], oi[occ], yi[year]] = loss
        E[si[state], oi[occ], yi[year]] = expo

    if holdout_year is not None:
        if holdout_year not in yi:
            raise DataError(f"holdout year {holdout_year} not present in the data (years {years})")
        t = yi[holdout_year]
        fit_t = [k for k in range(len(years)) if k != t]
        if not fit_t:
            raise DataError("no years left for fitting after removing the holdout year")
    else:
        fit_t = list(range(len(years)))

    keep = E[:, :, fit_t].sum(axis=(0, 2)) > 0
    for j in np.flatnonzero(~keep):
        log.warning("dropping occupation %s: no exposure in any fitted cell", occs[j])
    L, E = L[:, keep], E[:, keep]
    occs = [o for o, k in zip(occs, keep) if k]

    R = np.divide(L, E, out=np.full_like(L, np.nan), where=E > 0)

    def build(ts):
        return LossPanel(R[:, :, ts], E[:, :, ts], states, occs, [years[k] for k in ts])

    fit = build(fit_t)
    hold = build([yi[holdout_year]]) if holdout_year is not None else None
    return fit, hold


def write_panel_csv(panel: LossPanel, path, comment: str | None = None) -> None:
    """Write one row per cell; losses are stored as ``R * E``."""
    states = panel.states or [f"S{i + 1}" for i in range(panel.m)]
    occs = panel.occupations or [f"O{j + 1}" for j in range(panel.n)]
    years = panel.years or list(range(1, panel.s + 1))
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for i in range(panel.m):
            for j in range(panel.n):
                for t in range(panel.s):
                    e = float(panel.E[i, j, t])
                    loss = float(panel.R[i, j, t] * e) if e > 0 else 0.0
                    w.writerow([states[i], occs[j], years[t], repr(loss), repr(e)])


# --- simulation -------------------------------------------------------------------


@dataclass(frozen=True)
class ExposureLaw:
    """Log-uniform exposures on ``[low, high]``."""

    low: float = 10.0
    high: float = 1e4

    def __post_init__(self):
        if not 0 < self.low <= self.high:
            raise ValueError(f"need 0 < low <= high, got {self.low}, {self.high}")

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        return np.exp(rng.uniform(math.log(self.low), math.log(self.high), size=shape))


@dataclass
class Truth:
    model: ModelId
    params: ParamVector
    seed: int
    exposure: ExposureLaw
    inactive_columns: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        p = self.params
        return {
            "model": self.model.name,
            "mu": p.mu,
            "alpha": None if p.alpha is None else [float(v) for v in p.alpha],
            "beta": None if p.beta is None else [float(v) for v in p.beta],
            "sigma": p.sigma,
            "seed": self.seed,
            "exposure_law": {"kind": "log-uniform", "low": self.exposure.low, "high": self.exposure.high},
            "inactive_columns": list(self.inactive_columns),
        }


def simulate(model: ModelId | str, params: ParamVector, m: int, n: int, s: int,
             exposure: ExposureLaw | None = None, seed: int = 0,
             inactive_columns=()) -> tuple[LossPanel, Truth]:
    """Draw a synthetic panel ``R ~ N(fit, 1 / (sigma * E))``.

    Losses are formed as ``R * E`` and ratios re-derived from them, so writing
    the panel to CSV and reading it back is exact. ``inactive_columns`` lists
    occupation indices whose exposure is set to zero.
    """
    model = ModelId.parse(model)
    if m < 2 or n < 2 or s < 1:
        raise DimensionMismatchError(f"need m >= 2, n >= 2, s >= 1, got {m}, {n}, {s}")
    exposure = exposure or ExposureLaw()
    rng = make_rng(seed)
    E = exposure.sample(rng, (m, n, s))
    for j in inactive_columns:
        E[:, j, :] = 0.0
    # validate params against dims before drawing noise
    check_params(LossPanel(np.zeros((m, n, s)), np.ones((m, n, s))), model, params)
    fit = fitted(model, params, m, n)
    noise = rng.standard_normal((m, n, s))
    active = E > 0
    R = np.full((m, n, s), np.nan)
    R[active] = (fit[:, :, None] + noise / np.sqrt(params.sigma * np.where(active, E, 1.0)))[active]
    # Iterate R -> (R * E) / E to a fixed point so that the loss written to CSV
    # reproduces R exactly on reading; one or two passes suffice in practice.
    R = np.where(active, R, 0.0)
    safe_E = np.where(active, E, 1.0)
    for _ in range(8):
        nxt = (R * safe_E) / safe_E
        if np.array_equal(nxt, R):
            break
        R = nxt
    R = np.where(active, R, np.nan)
    panel = LossPanel(R, E, [f"S{i + 1}" for i in range(m)], [f"O{j + 1}" for j in range(n)],
                      list(range(1, s + 1)))
    return panel, Truth(model, params.copy(), seed, exposure, tuple(int(j) for j in inactive_columns))


# Posterior means reported for the corner-point fit of the workers'
# compensation panel; they generate the bundled synthetic stand-in.
REFERENCE_ALPHA = np.array([
    0.0, 0.0394, 0.0966, 0.0215, -0.0027, 0.0223, 0.0001, 0.1015, -0.0035, 0.0430,
])
REFERENCE_BETA = np.array([
    0.0, 0.0083, -0.0524, -0.1140, -0.0186, 0.1155, 0.0256, -0.0179, -0.0610, -0.0367,
    -0.0522, -0.0419, -0.0333, -0.0208, 0.0094, -0.0421, -0.0518, -0.0581, -0.0471, -0.0587,
    -0.0420, -0.0699, -0.0371, -0.0731,
])
# The corner level: alpha_1 + beta_1 from the centred fit.
REFERENCE_MU = 0.0806


EXAMPLE_SEED = 2006
EXAMPLE_SIGMA = 0.4
EXAMPLE_EMPTY_COLUMN = 12


def make_example_panel() -> tuple[LossPanel, Truth]:
    """Regenerate the bundled synthetic panel.

    Ten states, 25 occupations and seven years drawn from the corner-point
    two-way model at the reference means. Occupation ``O13`` has no exposure
    at all, so ingestion drops it and 24 occupations remain.
    """
    beta = np.insert(REFERENCE_BETA, EXAMPLE_EMPTY_COLUMN, 0.0)
    params = ParamVector(REFERENCE_MU, REFERENCE_ALPHA.copy(), beta, EXAMPLE_SIGMA)
    return simulate(ModelId.M1, params, 10, 25, 7, ExposureLaw(10.0, 1e4), EXAMPLE_SEED,
                    inactive_columns=(EXAMPLE_EMPTY_COLUMN,))


EXAMPLE_COMMENT = ("SYNTHETIC data, not real insurance experience: generated by "
                   "credrj.io.make_example_panel()")


def load_example(holdout_year: int | None = 7) -> tuple[LossPanel, LossPanel | None]:
    """The bundled synthetic 10 x 25 x 7 panel (one empty occupation column)."""
    ref = resources.files("credrj") / "data" / EXAMPLE_PANEL
    with resources.as_file(ref) as path:
        return ingest(path, holdout_year, allow_negative_loss=True)


# --- configuration ------------------------------------------------------------------


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _opt_int(sec, key):
    val = sec.get(key, "").strip()
    return int(val) if val else None


@dataclass
class RunConfig:
    """Everything a subcommand needs, resolved from an INI file."""

    path: Path | None
    text: str
    seed: int
    out: Path
    data: Path | None = None
    holdout_year: int | None = None
    allow_negative_loss: bool = False
    priors: PriorConfig = field(default_factory=PriorConfig)
    gibbs: GibbsConfig = field(default_factory=GibbsConfig)
    fit_model: ModelId = ModelId.M1
    hpd_level: float = 0.95
    rj: RjConfig = field(default_factory=RjConfig)
    pilot_iterations: int = 5000
    pilot_burn_in: int = 1000
    dic_models: tuple[ModelId, ...] = (ModelId.M1, ModelId.M2, ModelId.M3)
    simulate: dict = field(default_factory=dict)
    diagnose: dict = field(default_factory=dict)
    predict_source: str = "averaged"

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    def header(self, command: str) -> str:
        return f"credrj {command} config-sha256={self.sha256} seed={self.seed}"


def resolve_seed(cli_seed: int | None, config_seed: int | None) -> int:
    """``--seed`` beats ``CREDRJ_SEED`` beats the config file; default 0."""
    if cli_seed is not None:
        return int(cli_seed)
    env = os.environ.get("CREDRJ_SEED", "").strip()
    if env:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"CREDRJ_SEED must be an integer, got {env!r}") from None
    return 0 if config_seed is None else int(config_seed)


def _section(cp, name):
    return cp[name] if cp.has_section(name) else {}


def load_config(path, cli_seed: int | None = None, cli_out=None) -> RunConfig:
    """Read an INI run configuration.

    Relative paths inside the file are resolved against the file's directory.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    text = path.read_text()
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read_string(text, source=str(path))
    base = path.parent

    run = _section(cp, "run")
    seed = resolve_seed(cli_seed, _opt_int(run, "seed") if run else None)
    if cli_out is not None:
        out = Path(cli_out)
    else:
        out = base / (run.get("out", "out") if run else "out")
    cfg = RunConfig(path=path, text=text, seed=seed, out=out)

    try:
        data = _section(cp, "data")
        if data and data.get("path", "").strip():
            cfg.data = base / data["path"].strip()
            if not cfg.data.is_file():
                raise FileNotFoundError(f"[data] path does not exist: {cfg.data}")
        if data:
            cfg.holdout_year = _opt_int(data, "holdout_year")
            cfg.allow_negative_loss = data.getboolean("allow_negative_loss", False)

        pr = _section(cp, "priors")
        if pr:
            kw = {k: float(pr[k]) for k in ("a", "b", "c", "tau_mu", "tau_alpha0", "tau_beta0") if k in pr}
            if "model_log_prior" in pr:
                kw["model_log_prior"] = _floats(pr["model_log_prior"])
            cfg.priors = PriorConfig(**kw)

        fit = _section(cp, "fit")
        if fit:
            cfg.fit_model = ModelId.parse(fit.get("model", "M1").strip())
            cfg.hpd_level = float(fit.get("hpd_level", "0.95"))
            cfg.gibbs = GibbsConfig(
                iterations=int(fit.get("iterations", "10000")),
                burn_in=_opt_int(fit, "burn_in"),
                thin=int(fit.get("thin", "1")),
                seed=seed,
            )
        else:
            cfg.gibbs = GibbsConfig(seed=seed)

        rj = _section(cp, "rj")
        kw = {"seed": seed}
        if rj:
            for key in ("iterations", "within_model_sweeps", "thin"):
                if key in rj:
                    kw[key] = int(rj[key])
            kw["burn_in"] = _opt_int(rj, "burn_in")
            if "move_matrix" in rj:
                kw["move_matrix"] = np.array(_floats(rj["move_matrix"])).reshape(3, 3)
            if "log_prior_offsets" in rj:
                kw["log_prior_offsets"] = _floats(rj["log_prior_offsets"])
            if "initial_model" in rj:
                kw["initial_model"] = ModelId.parse(rj["initial_model"].strip())
            cfg.pilot_iterations = int(rj.get("pilot_iterations", "5000"))
            cfg.pilot_burn_in = int(rj.get("pilot_burn_in", "1000"))
        cfg.rj = RjConfig(**kw)

        dic = _section(cp, "dic")
        if dic and "models" in dic:
            cfg.dic_models = tuple(ModelId.parse(v.strip()) for v in dic["models"].split(","))

        cfg.simulate = dict(_section(cp, "simulate"))
        cfg.diagnose = dict(_section(cp, "diagnose"))
        pred = _section(cp, "predict")
        if pred:
            cfg.predict_source = pred.get("source", "averaged").strip()
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: invalid configuration: {exc}") from exc
    return cfg


def simulation_spec(section: dict, seed: int) -> dict:
    """Parse a ``[simulate]`` section into keyword arguments for :func:`simulate`."""
    model = ModelId.parse(section.get("model", "M1").strip())
    m, n, s = (int(section.get(k, d)) for k, d in (("m", "4"), ("n", "6"), ("s", "3")))
    mu = float(section.get("mu", str(REFERENCE_MU)))
    alpha = np.array(_floats(section["alpha"])) if "alpha" in section else REFERENCE_ALPHA[:m].copy()
    beta = np.array(_floats(section["beta"])) if "beta" in section else REFERENCE_BETA[:n].copy()
    if alpha.size != m or beta.size != n:
        raise ValueError(f"[simulate] alpha/beta lengths must equal m={m}, n={n}")
    params = ParamVector(mu, alpha if model.has_alpha else None, beta if model.has_beta else None,
                         float(section.get("sigma", "1.0")))
    law = ExposureLaw(float(section.get("exposure_low", "10")), float(section.get("exposure_high", "1e4")))
    return dict(model=model, params=params, m=m, n=n, s=s, exposure=law, seed=seed,
                inactive_columns=_ints(section.get("inactive_columns", "")))


# --- report writers ------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows, comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_chain_csv(chain, path, comment: str | None = None) -> None:
    names, data = chain.columns()
    rows = ([int(r[0]), int(r[1])] + [float(v) for v in r[2:]] for r in data)
    write_csv(path, names, rows, comment)


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
