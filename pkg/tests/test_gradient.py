"""
解析梯度与中心差分
"""
import numpy as np
import pytest

from conftest import ANOVA_FORMULA, FULL_FORMULA, NO_D_FORMULA, random_params
from services.data_service import Dataset, Factor
from services.design_service import ParamVector, build_layout, simulate_dataset
from services.formula_service import parse_formula
from services.likelihood_service import laplace_nll, laplace_value_and_gradient, nll_gradient

FD_STEP = 1e-5


def central_differences(pv, layout):
    x = pv.to_array(layout)
    grad = np.zeros_like(x)
    for k in range(x.shape[0]):
        xp, xm = x.copy(), x.copy()
        xp[k] += FD_STEP
        xm[k] -= FD_STEP
        grad[k] = (laplace_nll(ParamVector.from_array(layout, xp), layout)
                   - laplace_nll(ParamVector.from_array(layout, xm), layout)) / (2 * FD_STEP)
    return grad


def _assert_close(analytic, numeric):
    tol = np.maximum(1e-4 * np.abs(numeric), 1e-6)
    bad = np.abs(analytic - numeric) > tol
    assert not bad.any(), (analytic[bad], numeric[bad])


@pytest.mark.parametrize("formula, centered, seed", [
    (FULL_FORMULA, True, 1),
    (FULL_FORMULA, False, 2),
    (NO_D_FORMULA, True, 3),
    (ANOVA_FORMULA, True, 4),
])
def test_gradient_matches_finite_differences(formula, centered, seed):
    rng = np.random.default_rng(seed)
    for _ in range(13):
        I, J, K = int(rng.integers(2, 5)), int(rng.integers(2, 6)), int(rng.integers(1, 3))
        ds = simulate_dataset(rng.normal(5.0, 2.0, J), sigma=0.8, sigma_a=1.2, sigma_b=0.5,
                              sigma_d=0.4, rho=0.4, I=I, K=K, seed=int(rng.integers(1 << 30)))
        layout = build_layout(parse_formula(formula), ds, centered=centered)
        pv = random_params(layout, rng, sd_range=(0.4, 1.6), rho_max=0.7)
        _assert_close(nll_gradient(pv, layout), central_differences(pv, layout))


def test_value_and_gradient_agree(small_data, rng):
    layout = build_layout(parse_formula(FULL_FORMULA), small_data)
    pv = random_params(layout, rng)
    value, grad, inner = laplace_value_and_gradient(pv, layout)
    assert value == pytest.approx(laplace_nll(pv, layout), rel=1e-14)
    np.testing.assert_allclose(grad, nll_gradient(pv, layout))
    assert inner.q == layout.q


def test_symmetric_levels_have_equal_gradient():
    # 两个产品的数据完全相同（每个评价员内），交换标签不改变似然
    I, reps = 4, 2
    rng = np.random.default_rng(3)
    base = rng.normal(5.0, 1.0, (I, reps))
    third = rng.normal(8.0, 1.0, (I, reps))
    y, g, f = [], [], []
    for i in range(I):
        for j, values in enumerate((base[i], base[i], third[i])):
            y.extend(values)
            g.extend([i] * reps)
            f.extend([j] * reps)
    ds = Dataset(y, {
        "Assessor": Factor("Assessor", g, [f"A{k}" for k in range(I)]),
        "Product": Factor("Product", f, ["P1", "P2", "P3"]),
    })
    layout = build_layout(parse_formula(FULL_FORMULA), ds)
    pv = ParamVector.from_natural(layout, [5.0, 5.0, 8.0], 0.7, {"a": 1.0, "b": 0.3, "d": 0.4}, rho=0.2)
    grad = nll_gradient(pv, layout)
    assert grad[0] == pytest.approx(grad[1], rel=1e-9, abs=1e-10)
