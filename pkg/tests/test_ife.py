"""Interactive-effects estimators: within, iterated, projected, IV, penalized."""

import numpy as np
import pytest

import panelfx as p
from panelfx.errors import (
    InvalidGrid,
    InvalidM,
    LagTooLarge,
    RankDeficientDesign,
    RequiresConvergedILS,
    TooManyCsaColumns,
    WeakInstrument,
)
from panelfx.panel import DemeanMode

from conftest import (
    dummy_ols_slope,
    make_ccep_exact,
    make_noiseless_ife,
    make_tsiv_exact,
    panel_from_arrays,
)


def noisy_panel(seed, n=20, t=15, k=2):
    gen = np.random.default_rng(seed)
    x = gen.standard_normal((n, t, k))
    alpha = gen.standard_normal(n)
    gtime = gen.standard_normal(t)
    y = x @ np.array([1.0, -0.5])[:k] + alpha[:, None] + gtime[None, :] \
        + 0.5 * gen.standard_normal((n, t))
    return panel_from_arrays(y, x)


# ---------------------------------------------------------------- fe_estimate

def test_fe_pooled_matches_lstsq(rng):
    panel = noisy_panel(0)
    res = p.fe_estimate(panel, DemeanMode.NONE)
    x_flat, y_flat = panel.flat()
    np.testing.assert_allclose(
        res.beta, np.linalg.lstsq(x_flat, y_flat, rcond=None)[0], atol=1e-10)
    assert res.method == "pooled_ols"


def test_fe_unit_matches_dummy_ols():
    panel = noisy_panel(1)
    res = p.fe_estimate(panel, DemeanMode.UNIT)
    oracle = dummy_ols_slope(panel, unit_dummies=np.arange(panel.n_units))
    np.testing.assert_allclose(res.beta, oracle, atol=1e-8)
    assert res.method == "fe"


def test_fe_two_way_matches_dummy_ols():
    panel = noisy_panel(2)
    res = p.fe_estimate(panel)
    oracle = dummy_ols_slope(panel, unit_dummies=np.arange(panel.n_units),
                             time_dummies=np.arange(panel.n_periods))
    np.testing.assert_allclose(res.beta, oracle, atol=1e-8)
    assert res.method == "twfe"
    assert res.residuals.shape == panel.y.shape


def test_fe_rejects_collinear_design(rng):
    # a regressor constant within units dies under unit demeaning
    gen = np.random.default_rng(3)
    n, t = 10, 8
    x = np.empty((n, t, 2))
    x[:, :, 0] = gen.standard_normal((n, t))
    x[:, :, 1] = gen.standard_normal(n)[:, None]
    panel = panel_from_arrays(gen.standard_normal((n, t)), x)
    with pytest.raises(RankDeficientDesign):
        p.fe_estimate(panel, DemeanMode.UNIT)


# ---------------------------------------------------------------- ils

def test_ils_m0_is_pooled():
    panel = noisy_panel(4)
    res, fm = p.ils_estimate(panel, p.IlsOptions(m=0))
    pooled = p.fe_estimate(panel, DemeanMode.NONE)
    np.testing.assert_allclose(res.beta, pooled.beta, atol=1e-12)
    assert fm.m == 0 and res.m_used == 0


def test_ils_exact_recovery_noiseless():
    panel, beta = make_noiseless_ife(40, 35, 2, 2, seed=5)
    res, fm = p.ils_estimate(panel, p.IlsOptions(m=2))
    np.testing.assert_allclose(res.beta, beta, atol=1e-8)
    assert res.converged
    assert res.ssr == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(fm.common_component(), panel.y - panel.X @ beta, atol=1e-6)


def test_ils_ssr_path_non_increasing():
    for seed in range(8):
        gen = np.random.default_rng(seed)
        x = gen.standard_normal((15, 12, 2))
        f = gen.standard_normal((12, 2))
        z = gen.standard_normal((15, 2))
        y = x @ np.array([1.0, 2.0]) + z @ f.T + 0.4 * gen.standard_normal((15, 12))
        res, _ = p.ils_estimate(panel_from_arrays(y, x), p.IlsOptions(m=2))
        path = np.asarray(res.ssr_path)
        assert path.size >= 1
        assert np.all(np.diff(path) <= 1e-9), seed
        assert res.ssr == path[-1]


def test_ils_max_iter_flags_not_converged():
    panel = noisy_panel(6)
    res, _ = p.ils_estimate(panel, p.IlsOptions(m=1, max_iter=1))
    assert not res.converged
    assert "not_converged" in res.flags
    assert res.iterations == 1


def test_ils_init_modes_agree():
    panel, beta = make_noiseless_ife(25, 20, 1, 1, seed=7)
    for init in ("two_way_within", "pooled_ols"):
        res, _ = p.ils_estimate(panel, p.IlsOptions(m=1, init=init))
        np.testing.assert_allclose(res.beta, beta, atol=1e-7, err_msg=init)
    res, _ = p.ils_estimate(
        panel, p.IlsOptions(m=1, init="user", init_beta=beta + 0.1))
    np.testing.assert_allclose(res.beta, beta, atol=1e-7)


def test_ils_options_validation():
    with pytest.raises(InvalidM):
        p.IlsOptions(m=-1)
    with pytest.raises(ValueError):
        p.IlsOptions(m=1, init="quux")
    with pytest.raises(ValueError):
        p.IlsOptions(m=1, init="user")
    panel = noisy_panel(8, n=6, t=5)
    with pytest.raises(InvalidM):
        p.ils_estimate(panel, p.IlsOptions(m=5))


# ---------------------------------------------------------------- bias correction

def test_bias_correct_noop_cases():
    panel, beta = make_noiseless_ife(30, 25, 2, 1, seed=9)
    res, _ = p.ils_estimate(panel, p.IlsOptions(m=1))

    same = p.ils_bias_correct(res, panel, correction_set=())
    np.testing.assert_array_equal(same.beta, res.beta)

    # zero residuals mean every correction term vanishes
    bc = p.ils_bias_correct(res, panel)
    np.testing.assert_allclose(bc.beta, res.beta, atol=1e-7)
    assert bc.method.endswith("_bc")
    np.testing.assert_array_equal(bc.stderr, res.stderr)


def test_bias_correct_requires_convergence():
    panel = noisy_panel(10)
    res, _ = p.ils_estimate(panel, p.IlsOptions(m=1, max_iter=1))
    with pytest.raises(RequiresConvergedILS):
        p.ils_bias_correct(res, panel)


def test_bias_correct_rejects_unknown_terms():
    panel, _ = make_noiseless_ife(20, 15, 1, 1, seed=11)
    res, _ = p.ils_estimate(panel, p.IlsOptions(m=1))
    with pytest.raises(ValueError):
        p.ils_bias_correct(res, panel, correction_set=("B9",))


def test_bias_correct_via_options_flag():
    panel = noisy_panel(12)
    res, _ = p.ils_estimate(panel, p.IlsOptions(m=1, bias_correct=True))
    assert res.method == "ils_bc"


def test_bias_correct_shrinks_dynamic_bias():
    # a constant factor plus a lagged outcome gives the textbook
    # downward 1/T bias; the serial-correlation term must push back up
    biases, corrected, shifts = [], [], []
    for r in range(60):
        spec = p.DGPSpec(N=50, T=20, K=1, beta=(1.0,), heterogeneity="additive",
                         lag_y_coef=0.5, seed=4000 + r)
        panel, truth = p.simulate(spec)
        res, _ = p.ils_estimate(panel, p.IlsOptions(m=2))
        if not res.converged:
            continue
        bc = p.ils_bias_correct(res, panel, ("B1",))
        biases.append(res.beta[0] - truth.beta[0])
        corrected.append(bc.beta[0] - truth.beta[0])
        shifts.append(bc.details["bias_correction"][0])
    assert len(biases) >= 50
    raw = np.mean(biases)
    assert raw < -0.02                           # the bias is really there
    assert np.mean(shifts) > 0.0
    assert abs(np.mean(corrected)) < 0.6 * abs(raw)


# ---------------------------------------------------------------- ccep

def test_ccep_exact_recovery():
    panel, beta = make_ccep_exact(50, 40, seed=13)
    res = p.ccep_estimate(panel)
    np.testing.assert_allclose(res.beta, beta, atol=1e-8)
    # averages of y and x are collinear here; the projector must cope
    assert "csa_rank_deficient" in res.flags


def test_ccep_noisy_consistency():
    panel, beta = make_ccep_exact(200, 60, seed=14)
    gen = np.random.default_rng(99)
    y = panel.y + 0.3 * gen.standard_normal(panel.y.shape)
    noisy = panel_from_arrays(y, panel.X)
    res = p.ccep_estimate(noisy)
    np.testing.assert_allclose(res.beta, beta, atol=0.05)
    assert res.stderr[0] > 0


def test_ccep_too_many_csa_columns():
    gen = np.random.default_rng(15)
    panel = panel_from_arrays(gen.standard_normal((12, 4)), gen.standard_normal((12, 4, 3)))
    with pytest.raises(TooManyCsaColumns):
        p.ccep_estimate(panel)


def test_ccep_dynamic_needs_depth():
    gen = np.random.default_rng(16)
    panel = panel_from_arrays(gen.standard_normal((12, 5)), gen.standard_normal((12, 5, 1)))
    with pytest.raises(LagTooLarge):
        p.ccep_estimate(panel, dynamic=True)


def test_ccep_absorbed_regressor_zeroed():
    gen = np.random.default_rng(17)
    n, t = 30, 20
    x = np.empty((n, t, 2))
    x[:, :, 0] = gen.standard_normal((n, t))
    x[:, :, 1] = gen.standard_normal(t)[None, :]    # common across units
    y = x[:, :, 0] - 2.0 * x[:, :, 1] + 0.1 * gen.standard_normal((n, t))
    res = p.ccep_estimate(panel_from_arrays(y, x))
    assert res.beta[1] == 0.0
    assert any(f.startswith("csa_absorbed:") for f in res.flags)
    assert res.vcov[1, 1] == 0.0


def test_ccep_small_n_vcov_fallback():
    gen = np.random.default_rng(18)
    panel = panel_from_arrays(gen.standard_normal((6, 25)), gen.standard_normal((6, 25, 1)))
    res = p.ccep_estimate(panel)
    assert "vcov_fallback" in res.flags
    assert res.stderr[0] > 0


def test_ccep_observed_factors():
    gen = np.random.default_rng(19)
    n, t = 25, 15
    x = gen.standard_normal((n, t, 1))
    y = 2.0 * x[:, :, 0] + 5.0 + 0.2 * gen.standard_normal((n, t))
    res = p.ccep_estimate(panel_from_arrays(y, x),
                          observed_factors=np.ones((t, 1)))
    np.testing.assert_allclose(res.beta, [2.0], atol=0.05)


# ---------------------------------------------------------------- tsiv

def test_tsiv_exact_recovery():
    panel, beta = make_tsiv_exact(60, 50, 2, seed=20)
    res = p.tsiv_estimate(panel)
    np.testing.assert_allclose(res.beta, beta, atol=1e-8)
    assert res.details["m_x"] >= 1 and res.m_used >= 1
    assert "beta_first_stage" in res.details


def test_tsiv_weak_instrument():
    gen = np.random.default_rng(21)
    n, t = 20, 12
    f = gen.standard_normal(t)
    x = (gen.standard_normal(n)[:, None] * f[None, :])[:, :, None]   # pure factor
    y = 1.0 * x[:, :, 0] + gen.standard_normal((n, t))
    with pytest.raises(WeakInstrument):
        p.tsiv_estimate(panel_from_arrays(y, x), m_x=1, m=1)


# ---------------------------------------------------------------- pnnr

def test_pnnr_exact_recovery_and_post():
    panel, beta = make_noiseless_ife(40, 35, 2, 2, seed=22)
    res, fm = p.pnnr_estimate(panel)
    np.testing.assert_allclose(res.beta, beta, atol=1e-8)
    assert res.m_used == 2 and fm.m == 2


def test_pnnr_first_grid_point_is_pooled():
    panel = noisy_panel(23)
    res, _ = p.pnnr_estimate(panel, psi_grid=[1e12], post_iterations=2)
    # a huge penalty forces the low-rank block to zero: pooled OLS
    prelim = res.details["beta_preliminary"]
    pooled = p.fe_estimate(panel, DemeanMode.NONE)
    np.testing.assert_allclose(prelim, pooled.beta, atol=1e-10)


def test_pnnr_objective_paths_non_increasing():
    panel = noisy_panel(24)
    res, _ = p.pnnr_estimate(panel)
    for path in res.details["objective_paths"]:
        path = np.asarray(path)
        assert np.all(np.diff(path) <= 1e-9)


def test_pnnr_matches_ils_on_clean_dgp():
    spec = p.DGPSpec(N=50, T=40, K=2, beta=(1.0, -0.5), heterogeneity="ife", m=2,
                     loading_regressor_correlation=0.5, sigma=0.5, seed=25)
    panel, _ = p.simulate(spec)
    res_p, _ = p.pnnr_estimate(panel)
    res_i, _ = p.ils_estimate(panel, p.IlsOptions(m=res_p.m_used))
    np.testing.assert_allclose(res_p.beta, res_i.beta, atol=1e-4)


def test_pnnr_grid_validation():
    panel = noisy_panel(26)
    with pytest.raises(InvalidGrid):
        p.pnnr_estimate(panel, psi_grid=[])
    with pytest.raises(InvalidGrid):
        p.pnnr_estimate(panel, psi_grid=[-1.0])
    with pytest.raises(InvalidGrid):
        p.pnnr_estimate(panel, post_iterations=1)


# ---------------------------------------------------------------- result container

def test_estimate_result_validates_vcov():
    with pytest.raises(p.PanelError):
        p.EstimateResult(
            beta=np.ones(2), stderr=np.ones(2),
            vcov=np.array([[1.0, 0.5], [0.0, 1.0]]),    # not symmetric
            residuals=np.zeros((3, 4)), method="x")


def test_estimate_result_read_only():
    res = p.EstimateResult(beta=np.ones(1), stderr=np.ones(1), vcov=np.eye(1),
                           residuals=np.zeros((2, 2)), method="x")
    with pytest.raises(ValueError):
        res.beta[0] = 2.0
