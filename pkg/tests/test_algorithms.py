import dataclasses

import numpy as np
import pytest

from ocolc.algorithms import (
    AlgoConfig,
    RunError,
    doubling_epochs,
    doubling_run,
    make_algorithm,
    projected_ogd_run,
    run,
    theorem1_params,
    tradeoff_eta,
)
from ocolc.core import ConvexFn
from ocolc.metrics import summarize
from ocolc.oracle import offline_value
from ocolc.problems import toy_problem, doubly_stochastic_problem, dispatch_problem

from conftest import make_problem


def _one_d_problem(R=1.0, G=1.0, slope=1.0, H1=None):
    """f(x) = slope * x, g(x) = x - 0.5 in one dimension."""
    g = ConvexFn(lambda x: float(x[0] - 0.5), lambda x: np.array([1.0]))

    def make_loss(seed, t):
        return ConvexFn(lambda x: float(slope * x[0]), lambda x: np.array([slope]))

    return make_problem(1, [g], R=R, G=G, H1=H1, make_loss=make_loss)


# ----------------------------------------------------------- parameters


def test_theorem1_params_example():
    sigma, eta = theorem1_params(m=1, G=1.0, R=1.0, alpha=0.5, T=10000)
    assert sigma == pytest.approx(2.0)
    assert eta == pytest.approx(7.0711e-3, rel=1e-4)


def test_theorem1_params_rejects_alpha_one():
    with pytest.raises(ValueError):
        theorem1_params(m=1, G=1.0, R=1.0, alpha=1.0, T=100)
    with pytest.raises(ValueError):
        theorem1_params(m=1, G=1.0, R=1.0, alpha=0.0, T=100)


def test_tradeoff_eta_matches_theorem1_at_half():
    _, eta1 = theorem1_params(m=1, G=1.0, R=1.0, alpha=0.5, T=10000)
    assert tradeoff_eta(m=1, G=1.0, R=1.0, beta=0.5, T=10000) == pytest.approx(eta1)


def test_config_validation():
    with pytest.raises(ValueError):
        AlgoConfig("clipped-ogd", T=0)
    with pytest.raises(ValueError):
        AlgoConfig("clipped-ogd", T=10, beta=1.0)
    with pytest.raises(ValueError):
        AlgoConfig("clipped-ogd", T=10, alpha=0.0)
    with pytest.raises(ValueError):
        AlgoConfig("nope", T=10)
    with pytest.raises(ValueError):
        AlgoConfig("clipped-ogd", T=10, lagrangian="plain")
    with pytest.raises(ValueError):
        AlgoConfig("a-ogd", T=10, aggregation="per_constraint")
    # aliases resolve
    assert AlgoConfig("ogd", T=10).variant == "mahdavi-ogd"
    assert AlgoConfig("strong", T=10).variant == "strong-clipped-ogd"


# ----------------------------------------------------------- hand steps


def test_clipped_ogd_hand_step():
    # f = x, g = x - 0.5, x_t = 0, lam = 0, eta = 0.1, sigma = 2
    p = _one_d_problem()
    cfg = AlgoConfig("clipped-ogd", T=10, eta_override=0.1, sigma_override=2.0)
    algo = make_algorithm(p, cfg)
    state = algo.init_state()
    assert state.x[0] == 0.0 and state.lam[0] == 0.0
    nxt = algo.step(state, p.loss_stream(0, 0))
    assert nxt.x[0] == pytest.approx(-0.1, abs=1e-15)
    assert nxt.lam[0] == 0.0  # g(-0.1) = -0.6 < 0


def test_clipped_ogd_constant_loss_fixed_point():
    p = make_problem(
        2,
        [ConvexFn(lambda x: float(x[0] - 0.5), lambda x: np.array([1.0, 0.0]))],
        make_loss=lambda s, t: ConvexFn(lambda x: 1.0, lambda x: np.zeros(2)),
    )
    cfg = AlgoConfig("clipped-ogd", T=5)
    tr = run(p, cfg, seed=0)
    assert np.array_equal(tr.x, np.zeros((5, 2)))


def test_strong_schedule_values():
    # H1 = 1, m = 1, G = 2: eta_3 = 0.25, theta_3 = 0.25 * 2 * 4 = 2.0
    p = _one_d_problem(G=2.0, H1=1.0)
    algo = make_algorithm(p, AlgoConfig("strong", T=10))
    assert algo.eta_t(1) == pytest.approx(0.5)  # 1/(2 H1)
    assert algo.eta_t(3) == pytest.approx(0.25)
    assert algo.theta_t(3) == pytest.approx(2.0)
    etas = [algo.eta_t(t) for t in range(1, 20)]
    assert all(b < a for a, b in zip(etas, etas[1:]))  # strictly decreasing


def test_strong_requires_H1():
    with pytest.raises(ValueError, match="H1"):
        make_algorithm(toy_problem(), AlgoConfig("strong", T=10))


def test_strong_feasible_iterate_zero_dual():
    p = _one_d_problem(H1=1.0, slope=0.0)
    algo = make_algorithm(p, AlgoConfig("strong", T=10))
    state = algo.init_state()
    nxt = algo.step(state, p.loss_stream(0, 0))
    assert nxt.lam[0] == 0.0


def test_mahdavi_hand_step():
    # g = x - 0.5, x_t = 1, lam = 0, eta = 0.1, sigma = 2, plain Lagrangian:
    # lam' = Pi_{>=0}(0 + 0.1 * (0.5 - 0)) = 0.05
    p = _one_d_problem(R=2.0, slope=0.0)
    cfg = AlgoConfig("mahdavi-ogd", T=10, eta_override=0.1, sigma_override=2.0)
    algo = make_algorithm(p, cfg)
    state = algo.init_state(np.array([1.0]))
    nxt = algo.step(state, p.loss_stream(0, 0))
    assert nxt.lam[0] == pytest.approx(0.05, abs=1e-15)
    assert nxt.x[0] == pytest.approx(1.0)  # zero loss, zero dual: x unchanged


def test_mahdavi_feasible_duals_stay_zero():
    for lag in ("plain", "clipped"):
        p = _one_d_problem(slope=0.0)
        cfg = AlgoConfig("mahdavi-ogd", T=10, lagrangian=lag)
        tr = run(p, cfg, seed=0)
        assert np.all(tr.lam == 0.0)


def test_aogd_hand_step_frozen():
    # schedule arithmetic done by hand: G=1, R=2, m_eff=1, alpha=.5, beta=.5,
    # T=16 -> eta0 = 1/sqrt(4) = 0.5, eta_x = eta0/T^.5 = 0.125,
    # sigma = 2 G^2 = 2, theta_1 = sigma*eta0 = 1, mu_1 = eta0 = 0.5;
    # from x=1 (g=0.5, lam=0, plain): lam' = 0.5*(0.5 - 1*0) = 0.25
    p = _one_d_problem(R=2.0, slope=0.0)
    cfg = AlgoConfig("a-ogd", T=16)
    algo = make_algorithm(p, cfg)
    assert algo.eta0 == pytest.approx(0.5)
    assert algo.eta == pytest.approx(0.125)
    assert algo.theta_t(1) == pytest.approx(1.0)
    assert algo.mu_t(1) == pytest.approx(0.5)
    state = algo.init_state(np.array([1.0]))
    nxt = algo.step(state, p.loss_stream(0, 0))
    assert nxt.lam[0] == pytest.approx(0.25, abs=1e-15)


def test_aogd_feasible_trajectory_keeps_zero_dual():
    p = _one_d_problem(slope=0.0)
    tr = run(p, AlgoConfig("a-ogd", T=20), seed=0)
    assert np.all(tr.lam == 0.0)


def test_aogd_clipped_dual_nonneg_without_projection(rng):
    # with the clipped Lagrangian: lam_t >= 0 and violation => ascent keeps
    # lam >= 0 before the projection even applies
    p = toy_problem()
    cfg = AlgoConfig("a-ogd", T=300, lagrangian="clipped")
    algo = make_algorithm(p, cfg)
    state = algo.init_state()
    losses = p.losses(7, 300)
    for t, f in enumerate(losses):
        raw = state.lam + algo.mu_t(state.t) * algo._dual_residual(state, algo.theta_t(state.t))
        assert np.all(raw >= -1e-15)
        state = algo.step(state, f)


# ------------------------------------------------------------- run loop


def test_run_single_step():
    p = toy_problem()
    tr = run(p, AlgoConfig("clipped-ogd", T=1), seed=0)
    assert tr.T == 1
    assert np.array_equal(tr.x[0], np.zeros(2))
    assert np.all(tr.lam[0] == 0.0)


def test_run_deterministic_bitwise():
    p = toy_problem()
    cfg = AlgoConfig("clipped-ogd", T=400)
    a, b = run(p, cfg, seed=9), run(p, cfg, seed=9)
    for field in ("x", "fx", "g", "lam"):
        assert np.array_equal(getattr(a, field), getattr(b, field))


def test_run_lambda_identity_and_bounds():
    p = toy_problem()
    cfg = AlgoConfig("clipped-ogd", T=1000)
    tr = run(p, cfg, seed=3)
    # lambda identity on every row
    lhs = tr.lam[:, 0] * tr.sigma * tr.eta
    rhs = np.maximum(tr.g_agg[:, 0], 0.0)
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)
    # ball feasibility and dual nonnegativity
    assert np.linalg.norm(tr.x, axis=1).max() <= p.dom.radius * (1 + 1e-12)
    assert tr.lam.min() >= 0.0


def test_run_all_variants_respect_bounds():
    p = toy_problem()
    for variant in ("clipped-ogd", "mahdavi-ogd", "a-ogd"):
        tr = run(p, AlgoConfig(variant, T=500), seed=5)
        assert np.linalg.norm(tr.x, axis=1).max() <= p.dom.radius * (1 + 1e-12)
        assert tr.lam.min() >= 0.0
    ds = doubly_stochastic_problem(d=3)
    tr = run(ds, AlgoConfig("strong", T=500), seed=5)
    assert np.linalg.norm(tr.x, axis=1).max() <= ds.dom.radius * (1 + 1e-12)
    assert tr.lam.min() >= 0.0


def test_run_toy_follows_constraint_tightly():
    # qualitative check: after a burn-in of T/10 steps the per-step violation
    # of the l1 constraint stays small
    p = toy_problem()
    T = 8000
    tr = run(p, AlgoConfig("clipped-ogd", T=T, beta=0.5), seed=1)
    viol = np.maximum(tr.g_agg[T // 10 :, 0], 0.0)
    assert viol.max() <= 0.05


def test_run_abort_carries_step_index():
    def make_loss(seed, t):
        def sg(x):
            if t == 2:
                return np.array([np.nan])
            return np.array([1.0])

        return ConvexFn(lambda x: 0.0, sg)

    p = make_problem(
        1,
        [ConvexFn(lambda x: float(x[0] - 10.0), lambda x: np.array([1.0]))],
        make_loss=make_loss,
    )
    with pytest.raises(RunError) as ei:
        run(p, AlgoConfig("clipped-ogd", T=5), seed=0)
    assert ei.value.step == 3  # t is 1-based; loss index 2 is step 3


def test_per_constraint_duals_on_dispatch():
    p = dispatch_problem()
    cfg = AlgoConfig("clipped-ogd", T=50, aggregation="per_constraint")
    tr = run(p, cfg, seed=0)
    assert tr.lam.shape == (50, p.m)
    lhs = tr.lam * tr.sigma * tr.eta
    np.testing.assert_allclose(lhs, np.maximum(tr.g, 0.0), atol=1e-12)


def test_logsumexp_mode_scales_G():
    p = dispatch_problem()
    algo = make_algorithm(p, AlgoConfig("clipped-ogd", T=50, aggregation="logsumexp"))
    assert algo.G_eff == pytest.approx(np.sqrt(p.m) * p.G)
    tr = run(p, AlgoConfig("clipped-ogd", T=50, aggregation="logsumexp"), seed=0)
    assert tr.meta["g_bar_x1"] == pytest.approx(
        np.log(np.sum(np.exp(p.constraint_values(np.zeros(3)))))
    )


def test_degenerates_to_projected_ogd_bitwise():
    # slack constraint that never binds inside the ball: the clipped
    # algorithm must reproduce plain projected OGD exactly
    p = toy_problem()
    slack = ConvexFn(lambda x: float(np.abs(x).sum() - 10.0), lambda x: np.sign(x))
    p_slack = dataclasses.replace(
        p, gs=[slack], constraint_values=lambda x: np.array([np.abs(x).sum() - 10.0])
    )
    cfg = AlgoConfig("clipped-ogd", T=300)
    tr = run(p_slack, cfg, seed=4)
    assert np.all(tr.lam == 0.0)
    ref = projected_ogd_run(p_slack, seed=4, T=300, eta=tr.eta)
    assert np.array_equal(tr.x, ref)


# ------------------------------------------------------------- doubling


def test_doubling_epochs_schedule():
    assert doubling_epochs(7) == [1, 2, 4]
    assert doubling_epochs(1) == [1]
    assert doubling_epochs(10) == [1, 2, 4, 3]
    with pytest.raises(ValueError):
        doubling_epochs(0)


def test_doubling_single_epoch_equals_run():
    p = toy_problem()
    factory = lambda h: AlgoConfig("clipped-ogd", T=h)
    tr_d = doubling_run(p, factory, total=1, seed=2)
    tr_r = run(p, AlgoConfig("clipped-ogd", T=1), seed=2)
    assert np.array_equal(tr_d.x, tr_r.x)
    assert np.array_equal(tr_d.lam, tr_r.lam)


def test_doubling_factory_must_match_horizon():
    p = toy_problem()
    with pytest.raises(ValueError):
        doubling_run(p, lambda h: AlgoConfig("clipped-ogd", T=h + 1), total=3, seed=0)


def test_doubling_regret_within_worsening_factor():
    # the doubling trick pays at most sqrt(2)/(sqrt(2)-1) over the fixed-T
    # tuning; allow a 1.5x empirical margin on the toy problem
    p = toy_problem()
    T = 4095  # epochs 1..2048 complete
    seed = 6
    factory = lambda h: AlgoConfig("clipped-ogd", T=h)
    tr_dbl = doubling_run(p, factory, total=T, seed=seed)
    tr_fix = run(p, AlgoConfig("clipped-ogd", T=T), seed=seed)
    ov = offline_value(p, seed, T).value
    r_dbl = summarize(tr_dbl, ov).regret
    r_fix = summarize(tr_fix, ov).regret
    assert r_fix > 0
    factor = np.sqrt(2.0) / (np.sqrt(2.0) - 1.0)
    assert r_dbl <= factor * 1.5 * r_fix


def test_doubling_lambda_resets_and_x_carries():
    p = toy_problem()
    factory = lambda h: AlgoConfig("clipped-ogd", T=h)
    tr = doubling_run(p, factory, total=15, seed=3)
    # epoch starts at rows 0, 1, 3, 7 (0-based): lambda is freshly zero there
    for start in (0, 1, 3, 7):
        assert np.all(tr.lam[start] == 0.0)
    assert len(tr.meta["epochs"]) == 4
