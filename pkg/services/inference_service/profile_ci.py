"""
固定效应对比的轮廓似然置信区间
固定 delta = c'beta（消去 |c_m| 最大的 beta_m），对其余参数重新优化
"""
import logging
import math
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, stats

from config import settings
from services.data_service import Dataset
from services.design_service import ParamVector
from services.errors import NumericalError
from services.formula_service import ModelSpec
from services.likelihood_service import laplace_value_and_gradient
from services.optimize_service import FitOptions, FitResult, fit as fit_model, minimize_nll, parameter_bounds
from .contrast_variance import pairwise_contrast, wald_se
from .inference_models import ProfileCi

logger = logging.getLogger(__name__)

GRID_POINTS = 41
MONOTONE_TOL = 1e-6


class ContrastProfile:
    """
    对比 delta 的轮廓负对数似然
    """

    def __init__(self, fit: FitResult, contrast: Sequence[float], opts: Optional[FitOptions] = None):
        self.fit = fit
        self.layout = fit.layout
        self.opts = opts or FitOptions()
        p = self.layout.p
        self.c = np.asarray(contrast, dtype=float)
        if self.c.shape != (p,) or not np.any(self.c):
            raise ValueError(f"对比系数必须是长度 {p} 的非零向量")
        self.m = int(np.argmax(np.abs(self.c)))
        self.c_ext = np.zeros(self.layout.n_params)
        self.c_ext[:p] = self.c
        self.free = np.array([k for k in range(self.layout.n_params) if k != self.m])
        all_bounds = parameter_bounds(self.layout)
        self.bounds = [all_bounds[k] for k in self.free]
        self.x_hat = fit.params.to_array(self.layout)
        self.estimate = float(self.c @ fit.params.beta)
        self.solutions: Dict[float, Tuple[np.ndarray, float]] = {}
        self.n_evals = 0

    def expand(self, z: np.ndarray, delta: float) -> np.ndarray:
        """自由参数加上 delta 还原为完整参数向量"""
        x = np.empty(self.layout.n_params)
        x[self.free] = z
        x[self.m] = 0.0
        x[self.m] = (delta - float(self.c @ x[:self.layout.p])) / self.c[self.m]
        return x

    def _objective(self, delta: float):
        best = [math.inf]

        def objective(z: np.ndarray):
            x = self.expand(z, delta)
            try:
                value, grad, _ = laplace_value_and_gradient(
                    ParamVector.from_array(self.layout, x), self.layout, self.fit.dataset
                )
            except NumericalError:
                return (best[0] if math.isfinite(best[0]) else 0.0) + 1e10, np.zeros_like(z)
            best[0] = min(best[0], value)
            # 链式法则：d beta_m / d beta_k = -c_k / c_m
            adjusted = grad - grad[self.m] * self.c_ext / self.c[self.m]
            return value, adjusted[self.free]

        return objective

    def value(self, delta: float) -> float:
        """固定 delta 时的最小负对数似然（从最近的已解点热启动）"""
        delta = float(delta)
        if delta in self.solutions:
            return self.solutions[delta][1]
        if self.solutions:
            nearest = min(self.solutions, key=lambda d: abs(d - delta))
            z0 = self.solutions[nearest][0]
        else:
            z0 = self.x_hat[self.free]
        res = minimize_nll(self.layout, z0, self.opts, self._objective(delta), self.bounds)
        self.n_evals += 1
        self.solutions[delta] = (np.asarray(res.x, dtype=float), float(res.fun))
        logger.debug(f"轮廓: delta={delta:.6f}, nll={res.fun:.8f}")
        return float(res.fun)

    def deviance(self, delta: float) -> float:
        """2 (NLL(delta) - NLL_min)，不小于0"""
        return max(0.0, 2.0 * (self.value(delta) - self.fit.nll))


def _search_side(profile: ContrastProfile, sign: int, step: float, threshold: float) -> Tuple[float, bool, bool]:
    """
    在一侧寻找轮廓偏差等于阈值的点
    Returns:
        Tuple[float, bool, bool]: (端点, 是否开放, 是否不单调)
    """
    est = profile.estimate
    max_dist = settings.profile_max_se * step
    dist = step
    inner, dev_prev = est, 0.0
    monotone = True
    while True:
        outer = est + sign * dist
        dev = profile.deviance(outer)
        if dev < dev_prev - MONOTONE_TOL:
            monotone = False
        if dev >= threshold:
            break
        if dist >= max_dist:
            logger.warning(f"轮廓区间在 {settings.profile_max_se:g} 个标准误内没有到达阈值，"
                           f"{'上' if sign > 0 else '下'}侧开放")
            return sign * math.inf, True, not monotone
        inner, dev_prev = outer, dev
        dist = min(2.0 * dist, max_dist)

    xtol = settings.profile_xtol * max(1.0, step)
    if monotone:
        root = optimize.bisect(lambda d: profile.deviance(d) - threshold, inner, outer, xtol=xtol)
        return float(root), False, False

    logger.warning("轮廓似然不单调，使用网格搜索交点")
    grid = np.linspace(est, outer, GRID_POINTS)
    devs = np.array([profile.deviance(d) for d in grid])
    k = int(np.argmax(devs >= threshold))
    d0, d1, v0, v1 = grid[k - 1], grid[k], devs[k - 1], devs[k]
    root = d0 + (threshold - v0) * (d1 - d0) / (v1 - v0) if v1 != v0 else d1
    return float(root), False, True


def profile_ci(ms: ModelSpec,
               ds: Dataset,
               fit: Optional[FitResult] = None,
               contrast: Optional[Sequence[float]] = None,
               level: Optional[float] = None,
               opts: Optional[FitOptions] = None) -> ProfileCi:
    """
    对比 c'beta 的轮廓似然置信区间
    Args:
        ms: 模型结构
        ds: 数据集
        fit: 已收敛的拟合（为空时重新拟合）
        contrast: 长度 p 的系数，默认为估计最大与最小单元均值之差
        level: 置信水平，默认 settings.default_level
        opts: 优化选项
    Returns:
        ProfileCi: 区间；区间在点估计两侧可以不对称
    """
    level = settings.default_level if level is None else level
    opts = opts or FitOptions()
    fit = fit or fit_model(ms, ds, opts=opts)
    if not fit.converged:
        logger.warning("拟合未收敛，轮廓区间可能不可靠")
    layout = fit.layout
    if contrast is None:
        contrast, label = pairwise_contrast(layout, beta=fit.params.beta)
    else:
        contrast = np.asarray(contrast, dtype=float)
        label = " + ".join(f"{v:g}*{lvl}" for v, lvl in zip(contrast, layout.fixed_levels) if v != 0)

    profile = ContrastProfile(fit, contrast, opts)
    se = wald_se(fit, contrast)
    step = se if math.isfinite(se) and se > 0 else 0.1 * max(1.0, abs(profile.estimate))
    threshold = float(stats.chi2.ppf(level, 1))

    lower, lower_open, nm_lower = _search_side(profile, -1, step, threshold)
    upper, upper_open, nm_upper = _search_side(profile, +1, step, threshold)
    result = ProfileCi(
        contrast=contrast,
        level=level,
        estimate=profile.estimate,
        lower=lower,
        upper=upper,
        se=se,
        label=label,
        lower_open=lower_open,
        upper_open=upper_open,
        non_monotone=nm_lower or nm_upper,
        n_evals=profile.n_evals,
    )
    logger.info(f"轮廓区间 {label}: {profile.estimate:.4f} [{lower:.4f}, {upper:.4f}] ({profile.n_evals} 次优化)")
    return result
