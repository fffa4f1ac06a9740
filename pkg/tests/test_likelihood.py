"""
联合似然、内层求解、Laplace 目标函数与直接边际似然
"""
import math

import numpy as np
import pytest
from scipy import linalg, stats

from conftest import ANOVA_FORMULA, FULL_FORMULA, NO_D_FORMULA, random_params
from services.data_service import Dataset, Factor
from services.design_service import ROLE_A, ROLE_B, ROLE_D, ParamVector, build_layout, simulate_dataset
from services.errors import OracleSizeError
from services.formula_service import parse_formula
from services.likelihood_service import (
    GMatrix,
    direct_marginal_nll,
    inner_solve,
    joint_nll,
    laplace_nll,
    marginal_covariance,
)

FORMULAS = [FULL_FORMULA, NO_D_FORMULA, ANOVA_FORMULA]


def _random_instance(rng, formula):
    I, J, K = int(rng.integers(2, 6)), int(rng.integers(2, 7)), int(rng.integers(1, 4))
    beta = rng.normal(5.0, 2.0, J)
    ds = simulate_dataset(beta, sigma=rng.uniform(0.3, 1.5), sigma_a=rng.uniform(0.3, 2.0),
                          sigma_b=rng.uniform(0.1, 1.0), sigma_d=rng.uniform(0.1, 1.0),
                          rho=rng.uniform(-0.7, 0.7), I=I, K=K, seed=int(rng.integers(1 << 30)))
    layout = build_layout(parse_formula(formula), ds)
    return ds, layout, random_params(layout, rng)


def test_laplace_equals_direct_marginal():
    rng = np.random.default_rng(1)
    for k in range(210):
        ds, layout, pv = _random_instance(rng, FORMULAS[k % len(FORMULAS)])
        la = laplace_nll(pv, layout, ds)
        direct = direct_marginal_nll(pv, layout, ds)
        assert abs(la - direct) < 1e-8 * max(1.0, abs(direct)), (k, la, direct)


def test_laplace_equals_direct_unbalanced(unbalanced_data, rng):
    layout = build_layout(parse_formula(FULL_FORMULA), unbalanced_data)
    for _ in range(10):
        pv = random_params(layout, rng)
        la = laplace_nll(pv, layout)
        assert la == pytest.approx(direct_marginal_nll(pv, layout), rel=1e-10)


def test_raw_covariate_equals_direct(small_data, rng):
    layout = build_layout(parse_formula(FULL_FORMULA), small_data, centered=False)
    pv = random_params(layout, rng)
    assert laplace_nll(pv, layout) == pytest.approx(direct_marginal_nll(pv, layout), rel=1e-10)


def test_joint_nll_single_observation():
    ds = Dataset([0.0], {}, response_name="y")
    layout = build_layout(parse_formula("y ~ 1"), ds)
    pv = ParamVector([0.0], 0.0)
    assert joint_nll(pv, np.zeros(0), layout) == pytest.approx(0.5 * math.log(2 * math.pi))
    assert laplace_nll(pv, layout) == pytest.approx(0.9189385332, abs=1e-9)


def _naive_joint_nll(pv, w, layout, y):
    """逐项写出的联合负对数似然"""
    s = pv.sigma
    a_comp, b_comp, d_comp = (layout.component(r) for r in (ROLE_A, ROLE_B, ROLE_D))
    nu = pv.beta - pv.beta.mean()
    total = 0.0
    for o in range(layout.n_obs):
        i, j = layout.obs_index[o]
        mean = pv.beta[j] + w[a_comp.level_columns[i]] + w[b_comp.level_columns[i]] * nu[j]
        mean += w[d_comp.level_columns[i * layout.J + j]]
        total -= stats.norm.logpdf(y[o], loc=mean, scale=s)
    sa, sb, sd, rho = pv.sd(a_comp.label), pv.sd(b_comp.label), pv.sd(d_comp.label), pv.rho
    cov = np.array([[sa * sa, rho * sa * sb], [rho * sa * sb, sb * sb]])
    for i in range(layout.I):
        pair = [w[a_comp.level_columns[i]], w[b_comp.level_columns[i]]]
        total -= stats.multivariate_normal.logpdf(pair, mean=np.zeros(2), cov=cov)
    for col in d_comp.level_columns:
        total -= stats.norm.logpdf(w[col], scale=sd)
    return total


def test_joint_nll_matches_naive_density(rng):
    ds = simulate_dataset([1.0, 2.0, 4.0], sigma=0.7, sigma_a=1.0, sigma_b=0.5, sigma_d=0.4,
                          rho=0.3, I=2, K=1, seed=3)
    layout = build_layout(parse_formula(FULL_FORMULA), ds)
    for _ in range(5):
        pv = random_params(layout, rng)
        w = rng.normal(0.0, 1.0, layout.q)
        assert joint_nll(pv, w, layout) == pytest.approx(_naive_joint_nll(pv, w, layout, ds.response), rel=1e-10)


def test_joint_nll_at_zero_random_effects(small_data, rng):
    layout = build_layout(parse_formula(FULL_FORMULA), small_data)
    pv = random_params(layout, rng)
    G = GMatrix(layout, pv)
    r = small_data.response - pv.beta[layout.fixed_codes]
    expected = (-np.sum(stats.norm.logpdf(r, scale=pv.sigma))
                + 0.5 * (layout.q * math.log(2 * math.pi) + G.log_det()))
    assert joint_nll(pv, np.zeros(layout.q), layout) == pytest.approx(expected, rel=1e-12)


def test_inner_solve_zero_residuals(small_data):
    layout = build_layout(parse_formula(FULL_FORMULA), small_data)
    beta = np.array([3.0, 4.0, 5.5, 6.0, 8.0])
    exact = small_data.with_response(beta[layout.fixed_codes])
    pv = ParamVector.from_natural(layout, beta, 0.5, {"a": 1.0, "b": 0.4, "d": 0.3}, rho=0.3)
    inner = inner_solve(pv, layout, exact)
    np.testing.assert_allclose(inner.w_tilde, 0.0, atol=1e-12)


def test_inner_solve_scaling_modes_vanish(small_data):
    layout = build_layout(parse_formula(FULL_FORMULA), small_data)
    pv = ParamVector.from_natural(layout, [3.0, 4.0, 5.5, 6.0, 8.0], 0.5,
                                  {"a": 1.0, "b": 1e-8, "d": 0.3}, rho=0.0)
    inner = inner_solve(pv, layout)
    b_cols = layout.component(ROLE_B).level_columns
    assert np.max(np.abs(inner.w_tilde[b_cols])) < 1e-10


def test_inner_solution_is_exact_minimum(small_data, rng):
    layout = build_layout(parse_formula(FULL_FORMULA), small_data)
    pv = random_params(layout, rng)
    inner = inner_solve(pv, layout)
    Z = layout.random_matrix(pv.beta - pv.beta.mean())
    r = small_data.response - pv.beta[layout.fixed_codes] - Z @ inner.w_tilde
    grad_h = -(Z.T @ r) / pv.sigma ** 2 + GMatrix(layout, pv).inverse() @ inner.w_tilde
    step = linalg.solve(inner.hessian, grad_h, assume_a="pos")
    assert np.max(np.abs(step)) < 1e-10
    base = joint_nll(pv, inner.w_tilde, layout)
    for _ in range(5):
        direction = rng.normal(size=layout.q) * 1e-3
        assert joint_nll(pv, inner.w_tilde + direction, layout) > base


def test_log_det_consistent_with_hessian(small_data, rng):
    layout = build_layout(parse_formula(FULL_FORMULA), small_data)
    inner = inner_solve(random_params(layout, rng), layout)
    sign, log_det = np.linalg.slogdet(inner.hessian)
    assert sign > 0
    assert inner.log_det == pytest.approx(log_det, rel=1e-10)
    assert inner.log_det == pytest.approx(2.0 * np.sum(np.log(np.diag(inner.cholesky))), rel=1e-12)


def test_no_random_terms_is_gaussian_regression(small_data):
    layout = build_layout(parse_formula("y ~ 1 + Product"), small_data)
    assert layout.q == 0
    beta = np.array([3.0, 4.0, 5.5, 6.0, 8.0])
    pv = ParamVector(beta, math.log(0.8))
    expected = -np.sum(stats.norm.logpdf(small_data.response, loc=beta[layout.fixed_codes], scale=0.8))
    assert laplace_nll(pv, layout) == pytest.approx(expected, rel=1e-12)
    assert direct_marginal_nll(pv, layout) == pytest.approx(expected, rel=1e-12)
    np.testing.assert_allclose(marginal_covariance(pv, layout), 0.64 * np.eye(layout.n_obs))


def test_direct_nll_monotone_along_residual_ray(small_data, rng):
    layout = build_layout(parse_formula(FULL_FORMULA), small_data)
    pv = random_params(layout, rng)
    resid = small_data.response - pv.beta[layout.fixed_codes]
    values = [
        direct_marginal_nll(pv, layout, small_data.with_response(pv.beta[layout.fixed_codes] + t * resid))
        for t in (0.5, 1.0, 1.5, 3.0)
    ]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_oracle_size_cap(balanced_data, rng):
    layout = build_layout(parse_formula(FULL_FORMULA), balanced_data)
    with pytest.raises(OracleSizeError):
        direct_marginal_nll(random_params(layout, rng), layout, cap=100)


def test_permutation_invariance(small_data, rng):
    ms = parse_formula(FULL_FORMULA)
    layout = build_layout(ms, small_data)
    pv = random_params(layout, rng)
    order = rng.permutation(small_data.n_obs)
    permuted = build_layout(ms, small_data.take(order))
    assert laplace_nll(pv, permuted) == pytest.approx(laplace_nll(pv, layout), rel=1e-12)


def test_level_shift_identity(small_data, rng):
    layout = build_layout(parse_formula(FULL_FORMULA), small_data)
    pv = random_params(layout, rng)
    shifted = pv.copy()
    shifted.beta = pv.beta + 2.5
    moved = small_data.with_response(small_data.response + 2.5)
    assert laplace_nll(shifted, layout, moved) == pytest.approx(laplace_nll(pv, layout), rel=1e-12)
