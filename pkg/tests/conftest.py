import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from credrj.model import LossPanel, ModelId, ParamVector, PriorConfig  # noqa: E402

ALPHA6 = np.array([0.0, 0.0394, 0.0966, 0.0215])
BETA6 = np.array([0.0, 0.0083, -0.0524, -0.1140, -0.0186, 0.1155])


def random_panel(rng, m=4, n=6, s=3, low=10.0, high=1e4, holes=0.0, level=0.08, effect_sd=0.05):
    E = np.exp(rng.uniform(np.log(low), np.log(high), (m, n, s)))
    if holes:
        E[rng.random((m, n, s)) < holes] = 0.0
    fit = level + rng.normal(0, effect_sd, (m, 1)) + rng.normal(0, effect_sd, (1, n))
    with np.errstate(divide="ignore"):
        R = fit[:, :, None] + rng.standard_normal((m, n, s)) / np.sqrt(np.where(E > 0, E, 1.0))
    return LossPanel(R, E)


def tiny_panel():
    """A 2 x 2 x 2 panel whose three models all keep non-negligible posterior mass.

    Under the default vague priors the evidence oracle gives roughly
    (0.22, 0.71, 0.07) for (M1, M2, M3).
    """
    r = np.random.default_rng(152)
    E = np.exp(r.uniform(0.0, np.log(100.0), (2, 2, 2)))
    a, b = r.normal(0, 0.2), r.normal(0, 0.2)
    fit = np.array([[0.0, b], [a, a + b]]) + 1.0
    R = fit[:, :, None] + r.standard_normal((2, 2, 2)) / np.sqrt(E)
    return LossPanel(R, E)


# log-prior offsets that roughly equalize visits on tiny_panel()
TINY_OFFSETS = (0.0, -1.2, 1.1)


def random_params(rng, model, m, n):
    model = ModelId.parse(model)
    if model is ModelId.K:
        return ParamVector(rng.normal(0, 0.3), rng.normal(0, 0.3, m), rng.normal(0, 0.3, n),
                           rng.gamma(2.0), rng.gamma(2.0), rng.gamma(2.0))
    alpha = np.concatenate([[0.0], rng.normal(0, 0.3, m - 1)]) if model.has_alpha else None
    beta = np.concatenate([[0.0], rng.normal(0, 0.3, n - 1)]) if model.has_beta else None
    return ParamVector(rng.normal(0, 0.3), alpha, beta, rng.gamma(2.0))


def random_priors(rng):
    return PriorConfig(*np.exp(rng.uniform(np.log(1e-3), np.log(10.0), 6)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def panel(rng):
    return random_panel(rng)


@pytest.fixture
def priors():
    return PriorConfig()


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion for the session summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        lines.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
