"""
固定效应对比的方差：乘法模型的解析公式、MAM 公式以及观测信息矩阵给出的 Wald 标准误
"""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, stats

from services.design_service import DesignLayout, ParamVector
from services.errors import NumericalError, UnknownFactorError, UnsupportedModelError
from services.likelihood_service import nll_gradient
from services.optimize_service import FitResult, numerical_hessian, parameter_bounds

logger = logging.getLogger(__name__)


def replicate_count(counts: np.ndarray, what: str = "") -> Tuple[float, bool]:
    """
    单元重复数：平衡时为公共值，否则取调和平均并给出警告
    Args:
        counts: I x J 的单元观测数（必须全为正）
        what: 日志中的上下文
    Returns:
        Tuple[float, bool]: (K, 是否平衡)
    """
    counts = np.asarray(counts, dtype=float)
    if np.all(counts == counts.flat[0]):
        return float(counts.flat[0]), True
    K = float(stats.hmean(counts.ravel()))
    logger.warning(f"{what}单元重复数不相等，使用调和平均 K = {K:.4f}")
    return K, False


def _layout_replicates(layout: DesignLayout) -> float:
    counts = layout.cell_counts()
    if counts is None:
        raise UnsupportedModelError("对比方差公式需要含 mp() 项的两因子模型")
    return replicate_count(counts[counts > 0], "对比方差: ")[0]


def contrast_variance_mam(sigma_d: float, sigma: float, I: int, K: float) -> float:
    """MAM 下两个产品均值之差的方差：2 sigma_d^2 / I + 2 sigma^2 / (K I)"""
    return 2.0 * sigma_d ** 2 / I + 2.0 * sigma ** 2 / (K * I)


def contrast_variance_mmm(fit: FitResult, j1: int, j2: int) -> float:
    """
    乘法模型下两个产品均值之差的方差
    sigma_b^2 (nu_1 - nu_2)^2 / I + 2 sigma_d^2 / I + 2 sigma^2 / (K I)
    Args:
        fit: 含 mp() 项的拟合
        j1, j2: 固定因子水平序号
    Returns:
        float: 方差
    """
    layout = fit.layout
    for j in (j1, j2):
        if not 0 <= j < layout.J:
            raise UnknownFactorError(f"{layout.spec.fixed_factor}[{j}]")
    I = layout.I
    K = _layout_replicates(layout)
    nu = fit.nu
    return fit.sigma_b ** 2 * (nu[j1] - nu[j2]) ** 2 / I + contrast_variance_mam(fit.sigma_d, fit.sigma, I, K)


def pairwise_contrast(layout: DesignLayout, level1: Optional[str] = None, level2: Optional[str] = None,
                      beta: Optional[np.ndarray] = None) -> Tuple[np.ndarray, str]:
    """
    两个水平之差的对比系数 e_1 - e_2
    Args:
        layout: 设计结构
        level1, level2: 水平标签；都为空时取估计最大与最小的单元均值
        beta: 单元均值估计（默认对比时需要）
    Returns:
        Tuple[np.ndarray, str]: (系数, 文字描述)
    """
    levels = layout.fixed_levels
    if level1 is None and level2 is None:
        if beta is None:
            raise ValueError("默认对比需要单元均值估计")
        j1, j2 = int(np.argmax(beta)), int(np.argmin(beta))
    else:
        try:
            j1, j2 = levels.index(str(level1)), levels.index(str(level2))
        except ValueError:
            missing = level1 if str(level1) not in levels else level2
            raise UnknownFactorError(f"{layout.spec.fixed_factor}={missing}")
    if j1 == j2:
        raise UnsupportedModelError("对比的两个水平相同")
    c = np.zeros(layout.p)
    c[j1], c[j2] = 1.0, -1.0
    return c, f"{levels[j1]} - {levels[j2]}"


def observed_information(fit: FitResult, step: float = 1e-4) -> np.ndarray:
    """
    Laplace 目标函数在最优点处的 Hessian（解析梯度的中心差分，对称化）
    边界上的参数不做扰动，对应行列只保留对角
    """
    layout = fit.layout
    x = fit.params.to_array(layout)
    bounds = parameter_bounds(layout)
    n = x.shape[0]
    interior = []
    for k, (lo, hi) in enumerate(bounds):
        h = step * max(1.0, abs(x[k]))
        if not ((lo is not None and x[k] - h < lo) or (hi is not None and x[k] + h > hi)):
            interior.append(k)
    interior = np.asarray(interior, dtype=int)
    hess = np.eye(n)

    def gradient(z):
        return nll_gradient(ParamVector.from_array(layout, z), layout, fit.dataset)

    hess[np.ix_(interior, interior)] = numerical_hessian(gradient, x, interior, step)
    return hess


def wald_se(fit: FitResult, contrast: Sequence[float]) -> float:
    """
    对比 c'beta 的 Wald 标准误
    Args:
        fit: 拟合结果
        contrast: 长度 p 的系数
    Returns:
        float: 标准误；信息矩阵奇异时返回 nan
    """
    c = np.zeros(fit.layout.n_params)
    c[:fit.layout.p] = np.asarray(contrast, dtype=float)
    hess = observed_information(fit)
    try:
        chol = linalg.cho_factor(hess, lower=True)
        var = float(c @ linalg.cho_solve(chol, c))
    except (linalg.LinAlgError, NumericalError) as e:
        logger.warning(f"观测信息矩阵不是正定的 ({e})，Wald 标准误不可用")
        return float("nan")
    return float(np.sqrt(var)) if var > 0 else float("nan")
