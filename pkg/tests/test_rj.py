import math

import numpy as np
import pytest
from conftest import TINY_OFFSETS, random_panel, random_params, random_priors, tiny_panel

import oracles
from credrj.chain import Chain
from credrj.errors import DimensionMismatchError, ProposalError
from credrj.gibbs import GibbsConfig, gibbs_run
from credrj.model import RJ_MODELS, ModelId, ParamVector, PriorConfig, from_block, to_block
from credrj.rj import (
    CenteringPoint,
    GaussianProposal,
    ModelProposal,
    QuadraticForm,
    RjConfig,
    SigmaProposal,
    build_proposal,
    empirical_transition_matrix,
    estimate_model_probs,
    fit_sigma_proposal,
    log_accept,
    model_averaged_predict,
    quadratic_form,
    rj_run,
    run_pilots,
    stationary_distribution,
)

TAG = {ModelId.M1: "M1", ModelId.M2: "M2", ModelId.M3: "M3"}


def max_hessian_error(rng, model):
    """Relative gap between the analytic Hessian and finite differences of f."""
    panel = random_panel(rng, m=int(rng.integers(2, 5)), n=int(rng.integers(2, 5)), s=2, low=0.5, high=5.0)
    pr = random_priors(rng)
    sigma = float(rng.gamma(2.0))
    _, H = quadratic_form(model, panel, pr, sigma)
    theta = rng.normal(0, 0.5, H.shape[0])

    def f(x):
        return oracles.quadratic_exponent(TAG[model], panel.R, panel.E, x, sigma,
                                          pr.tau_mu, pr.tau_alpha0, pr.tau_beta0)

    fd = oracles.fd_hessian(f, theta)
    return float(np.abs(2 * H - fd).max() / np.abs(fd).max())


@pytest.mark.parametrize("model", RJ_MODELS)
def test_hessian_matches_finite_differences(rng, model):
    assert max(max_hessian_error(rng, model) for _ in range(5)) < 1e-6


@pytest.mark.parametrize("model", RJ_MODELS)
def test_hessian_prior_only(panel, model):
    pr = PriorConfig(tau_mu=0.5, tau_alpha0=2.0, tau_beta0=3.0)
    _, H = quadratic_form(model, panel, pr, 0.0)
    expect = [0.5] + [2.0] * (panel.m - 1) * model.has_alpha + [3.0] * (panel.n - 1) * model.has_beta
    np.testing.assert_array_equal(H, np.diag(expect))


def test_cross_term_is_shared_exposure(panel, priors):
    _, H = quadratic_form(ModelId.M1, panel, priors, 1.7)
    # d2(f/2)/dmu dalpha_i = sigma * sum_jt E_ijt
    np.testing.assert_allclose(H[0, 1:panel.m], 1.7 * panel.W.sum(axis=1)[1:], rtol=1e-13)
    np.testing.assert_allclose(H[1, panel.m], 1.7 * panel.W[1, 1], rtol=1e-13)


@pytest.mark.parametrize("model", RJ_MODELS)
def test_gradient_vanishes_at_normal_equations_solution(panel, priors, model):
    sigma = 0.8
    cells = [(i, j) for i in range(panel.m) for j in range(panel.n) for _ in range(panel.s)]
    X = oracles.design_matrix(TAG[model], panel.m, panel.n, cells)
    w = panel.E.reshape(-1)
    y = np.where(panel.active, panel.R, 0.0).reshape(-1)
    P0 = np.diag(np.diag(quadratic_form(model, panel, priors, 0.0)[1]))
    theta = np.linalg.solve(P0 + sigma * X.T @ (w[:, None] * X), sigma * X.T @ (w * y))
    grad, _ = quadratic_form(model, panel, priors, sigma)
    assert np.abs(grad(theta)).max() < 1e-9


@pytest.mark.parametrize("model", RJ_MODELS)
def test_proposal_centering_invariance(rng, panel, priors, model):
    qf = QuadraticForm(model, panel, priors)
    a = build_proposal(model, panel, priors, 1.3, CenteringPoint(model, rng.normal(size=qf.size)))
    b = build_proposal(model, panel, priors, 1.3, CenteringPoint(model, 10 * rng.normal(size=qf.size)))
    np.testing.assert_allclose(a.mean, b.mean, atol=1e-9)
    np.testing.assert_allclose(a.precision, b.precision, atol=1e-9)


def test_proposal_at_mode_and_prior(panel, priors):
    qf = QuadraticForm(ModelId.M2, panel, priors)
    mode = qf.mode(2.0)
    prop = build_proposal(ModelId.M2, panel, priors, 2.0, CenteringPoint(ModelId.M2, mode))
    np.testing.assert_allclose(prop.mean, mode, atol=1e-12)
    prior = build_proposal(ModelId.M2, panel, priors, 0.0, CenteringPoint(ModelId.M2, mode))
    np.testing.assert_allclose(prior.mean, 0.0, atol=1e-12)


def test_proposal_layout_checked(panel, priors):
    with pytest.raises(DimensionMismatchError):
        build_proposal(ModelId.M1, panel, priors, 1.0, CenteringPoint(ModelId.M2, np.zeros(panel.m)))
    with pytest.raises(ValueError):
        build_proposal(ModelId.M1, panel, priors, 1.0,
                       CenteringPoint(ModelId.M1, np.zeros(ModelId.M1.block_size(panel.m, panel.n))), order=3)


def test_degraded_orders(rng, panel, priors):
    c = CenteringPoint(ModelId.M3, rng.normal(size=panel.n))
    p0 = build_proposal(ModelId.M3, panel, priors, 1.0, c, order=0)
    np.testing.assert_array_equal(p0.mean, c.block_values)
    p1 = build_proposal(ModelId.M3, panel, priors, 1.0, c, order=1)
    assert np.count_nonzero(p1.precision - np.diag(np.diag(p1.precision))) == 0


def test_non_positive_definite_precision_rejected():
    with pytest.raises(ProposalError):
        GaussianProposal.from_precision(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(ProposalError):
        GaussianProposal.from_precision(np.zeros(2), np.array([[1.0, 0.5], [0.4, 1.0]]))


def test_proposal_draws_match_moments(rng, panel, priors):
    qf = QuadraticForm(ModelId.M1, panel, priors)
    prop = build_proposal(ModelId.M1, panel, priors, 1.0, CenteringPoint(ModelId.M1, np.zeros(qf.size)))
    n = 40000
    draws = np.array([prop.sample(rng) for _ in range(n)])
    cov = prop.covariance
    sd = np.sqrt(np.diag(cov))
    assert np.all(np.abs(draws.mean(axis=0) - prop.mean) < 4 * sd / math.sqrt(n))
    emp = np.cov(draws.T)
    se = np.sqrt((cov ** 2 + np.outer(np.diag(cov), np.diag(cov))) / n)
    assert np.all(np.abs(emp - cov) < 4 * se)


def test_gaussian_logpdf_matches_scipy(rng, panel, priors):
    from scipy import stats

    qf = QuadraticForm(ModelId.M1, panel, priors)
    prop = build_proposal(ModelId.M1, panel, priors, 1.0, CenteringPoint(ModelId.M1, np.zeros(qf.size)))
    x = prop.sample(rng)
    ref = stats.multivariate_normal(prop.mean, prop.covariance, allow_singular=True).logpdf(x)
    assert prop.logpdf(x) == pytest.approx(ref, rel=1e-6)


def test_sigma_proposal_fit():
    rng = np.random.default_rng(8)
    draws = rng.gamma(5.0, 1 / 2.0, 100_000)
    sp = fit_sigma_proposal(draws)
    assert abs(sp.shape - 5.0) < 3 * (5.0 * 2.0 / math.sqrt(draws.size))
    assert sp.shape / sp.rate == pytest.approx(draws.mean(), rel=1e-12)
    with pytest.raises(ValueError):
        fit_sigma_proposal(np.ones(200))
    with pytest.raises(ValueError):
        fit_sigma_proposal(draws[:50])
    with pytest.raises(ValueError):
        fit_sigma_proposal(np.concatenate([draws[:200], [-1.0]]))
    assert SigmaProposal(2.0, 1.0).logpdf(0.0) == -math.inf


@pytest.fixture(scope="module")
def tiny():
    panel = tiny_panel()
    priors = PriorConfig()
    pilots = run_pilots(panel, priors, 3000, 500, seed=21)
    proposals = {m: ModelProposal.from_pilot(m, panel, priors, pilots[m]) for m in RJ_MODELS}
    return panel, priors, pilots, proposals


def test_log_accept_independent_of_block(tiny):
    panel, priors, _, props = tiny
    rng = np.random.default_rng(3)
    rj = RjConfig()
    cur = props[ModelId.M1].draw(rng)
    sigma_new = props[ModelId.M3].sigma_proposal.sample(rng)
    vals = []
    for _ in range(20):
        block = props[ModelId.M3].block(sigma_new).sample(rng)
        cand = from_block(ModelId.M3, block, sigma_new, panel.m, panel.n)
        vals.append(log_accept((ModelId.M1, cur), (ModelId.M3, cand), props, rj, panel, priors))
    assert max(vals) - min(vals) < 1e-8


def test_log_accept_self_move_and_antisymmetry(tiny):
    panel, priors, _, props = tiny
    rng = np.random.default_rng(4)
    rj = RjConfig(log_prior_offsets=(0.3, -0.2, 0.0))
    x = props[ModelId.M2].draw(rng)
    assert log_accept((ModelId.M2, x), (ModelId.M2, x), props, rj, panel, priors) == 0.0
    y = props[ModelId.M3].draw(rng)
    fwd = log_accept((ModelId.M2, x), (ModelId.M3, y), props, rj, panel, priors)
    back = log_accept((ModelId.M3, y), (ModelId.M2, x), props, rj, panel, priors)
    assert fwd == pytest.approx(-back, abs=1e-9)


def test_rj_config_validation():
    with pytest.raises(ValueError):
        RjConfig(move_matrix=np.ones((3, 3)))
    with pytest.raises(ValueError):
        RjConfig(log_prior_offsets=(0.0, 1.0))
    with pytest.raises(ValueError):
        RjConfig(initial_model=ModelId.K)
    assert RjConfig(iterations=1000).burn_in == 100


def test_rj_stays_put_without_moves(tiny):
    panel, priors, pilots, _ = tiny
    chain = rj_run(panel, priors, RjConfig(iterations=300, move_matrix=np.eye(3), initial_model="M3"), pilots)
    assert set(chain.models) == {2}
    assert chain.info["attempts"].sum() == 0


def test_rj_deterministic(tiny):
    panel, priors, pilots, _ = tiny
    cfg = RjConfig(iterations=400, seed=17)
    a = rj_run(panel, priors, cfg, pilots).columns()[1]
    b = rj_run(panel, priors, cfg, pilots).columns()[1]
    np.testing.assert_array_equal(a, b)


def test_rj_matches_oracle_quick(tiny):
    panel, priors, pilots, _ = tiny
    chain = rj_run(panel, priors, RjConfig(iterations=20000, seed=5, log_prior_offsets=TINY_OFFSETS), pilots)
    probs = estimate_model_probs(chain)
    ref = oracles.model_probabilities(panel.R, panel.E, 0.001, 0.001, 0.001, 0.001, 0.001)
    np.testing.assert_allclose(probs.corrected, ref, atol=0.04)


def test_prior_offset_equivariance(tiny):
    panel, priors, pilots, _ = tiny
    base = rj_run(panel, priors, RjConfig(iterations=20000, seed=8, log_prior_offsets=TINY_OFFSETS), pilots)
    shifted = (TINY_OFFSETS[0], TINY_OFFSETS[1] + 0.7, TINY_OFFSETS[2])
    moved = rj_run(panel, priors, RjConfig(iterations=20000, seed=9, log_prior_offsets=shifted), pilots)
    pb, pm = estimate_model_probs(base), estimate_model_probs(moved)
    odds_b = pb.raw[1] / pb.raw[0]
    odds_m = pm.raw[1] / pm.raw[0]
    assert math.log(odds_m / odds_b) == pytest.approx(0.7, abs=0.1)
    np.testing.assert_allclose(pb.corrected, pm.corrected, atol=0.03)


def test_base_model_prior_shifts_posterior(tiny):
    panel, _, pilots, _ = tiny
    pr = PriorConfig(model_log_prior=(0.0, -1.2, 1.1))
    chain = rj_run(panel, pr, RjConfig(iterations=20000, seed=5), pilots)
    probs = estimate_model_probs(chain)
    ref = oracles.model_probabilities(panel.R, panel.E, 0.001, 0.001, 0.001, 0.001, 0.001,
                                      log_prior=(0.0, -1.2, 1.1))
    np.testing.assert_allclose(probs.corrected, ref, atol=0.04)


def _chain_from_models(models):
    chain = Chain(2, 2)
    for k, code in enumerate(models):
        model = RJ_MODELS[code]
        params = ParamVector(0.0, np.zeros(2) if model.has_alpha else None,
                             np.zeros(2) if model.has_beta else None, 1.0)
        chain.append(k + 1, model, params, 0.0, 0.0)
    return chain.trim()


def test_model_probabilities():
    probs = estimate_model_probs(_chain_from_models([0] * 10))
    np.testing.assert_array_equal(probs.raw, [1.0, 0.0, 0.0])
    chain = _chain_from_models([0, 1, 1, 2])
    np.testing.assert_allclose(estimate_model_probs(chain, (2.0, 2.0, 2.0)).corrected, [0.25, 0.5, 0.25])
    corrected = estimate_model_probs(chain, (0.0, math.log(2.0), 0.0)).corrected
    np.testing.assert_allclose(corrected, [1 / 3, 1 / 3, 1 / 3])
    with pytest.raises(ValueError):
        estimate_model_probs(Chain(2, 2))


def test_transition_matrix():
    P = empirical_transition_matrix(np.zeros(10, dtype=int))
    np.testing.assert_array_equal(P[0], [1.0, 0.0, 0.0])
    assert np.isnan(P[1]).all() and np.isnan(P[2]).all()
    P = empirical_transition_matrix(np.array([0, 1] * 20))
    assert P[0, 1] == 1.0 and P[1, 0] == 1.0
    Q = np.array([[0.554, 0.233, 0.213], [0.2, 0.6, 0.2], [0.1, 0.3, 0.6]])
    pi = stationary_distribution(Q)
    np.testing.assert_allclose(pi @ Q, pi, atol=1e-12)
    assert pi.sum() == pytest.approx(1.0)


def test_model_averaged_prediction(tiny):
    panel, priors, pilots, _ = tiny
    chains = pilots
    m1 = chains[ModelId.M1].predictive_mean(1, 0)
    assert model_averaged_predict(chains, (1.0, 0.0, 0.0), 1, 0) == pytest.approx(m1)
    w = np.array([0.2, 0.5, 0.3])
    direct = sum(wk * chains[m].predictive_mean(0, 1) for wk, m in zip(w, RJ_MODELS))
    assert model_averaged_predict(chains, w, 0, 1) == pytest.approx(direct, rel=1e-14)
    same = {m: chains[ModelId.M1] for m in RJ_MODELS}
    assert model_averaged_predict(same, np.full(3, 1 / 3), 1, 1) == pytest.approx(
        chains[ModelId.M1].predictive_mean(1, 1), rel=1e-14)


def test_block_cache_reuses_factorization(tiny):
    panel, priors, _, props = tiny
    p = props[ModelId.M1]
    assert p.block(1.5) is p.block(1.5)
    x = random_params(np.random.default_rng(0), ModelId.M1, 2, 2)
    assert np.isfinite(p.logq(x))
    assert to_block(ModelId.M1, x).size == 3
