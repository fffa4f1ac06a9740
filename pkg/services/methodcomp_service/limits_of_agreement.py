"""
一致性界限
加法模型:   0 +/- z sqrt(2 (sigma_a^2 + sigma^2))
乘法模型:   0 +/- z sqrt(2 (sigma_a^2 + nu^2 sigma_b^2 + 2 nu rho sigma_a sigma_b + sigma^2))
"""
import logging
import math
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from config import settings
from services.design_service import ROLE_A, ROLE_B
from services.errors import CovarianceInconsistencyError, UnsupportedModelError
from services.optimize_service import FitResult
from .methodcomp_models import ADDITIVE, MULTIPLICATIVE, LoaInterval, RandomMethodsParams, VarianceComponents

logger = logging.getLogger(__name__)

LOA_COLUMNS = ["item_effect", "lower_add", "upper_add", "lower_mult", "upper_mult"]

ComponentsLike = Union[FitResult, VarianceComponents]


def normal_quantile(level: Optional[float] = None) -> float:
    """双侧区间的标准正态分位数，0.95 时为 1.959964"""
    level = settings.default_level if level is None else level
    return float(stats.norm.ppf(1.0 - (1.0 - level) / 2.0))


def components_of(source: ComponentsLike) -> VarianceComponents:
    """从拟合结果取出方差分量（本身已是分量时原样返回）"""
    if isinstance(source, VarianceComponents):
        return source
    return VarianceComponents(sigma=source.sigma, sigma_a=source.sigma_a,
                              sigma_b=source.sigma_b, rho=source.rho)


def loa_additive(source: ComponentsLike, level: Optional[float] = None) -> LoaInterval:
    """
    加法模型的一致性界限，宽度与项目效应无关
    Args:
        source: 拟合结果或方差分量
        level: 置信水平
    Returns:
        LoaInterval: 以0为中心的区间
    """
    comp = components_of(source)
    z = normal_quantile(level)
    half = z * math.sqrt(2.0 * (comp.sigma_a ** 2 + comp.sigma ** 2))
    return LoaInterval(0.0, -half, half, ADDITIVE, z)


def loa_multiplicative(source: ComponentsLike, nu_j: float, level: Optional[float] = None) -> LoaInterval:
    """
    乘法模型的一致性界限（“喇叭形”）
    Args:
        source: 拟合结果或方差分量
        nu_j: 项目效应
        level: 置信水平
    Returns:
        LoaInterval: 在 nu_j 处以0为中心的区间
    """
    comp = components_of(source)
    z = normal_quantile(level)
    radicand = (comp.sigma_a ** 2 + nu_j ** 2 * comp.sigma_b ** 2
                + 2.0 * nu_j * comp.rho * comp.sigma_a * comp.sigma_b + comp.sigma ** 2)
    if radicand < 0:
        raise CovarianceInconsistencyError(f"nu = {nu_j} 处方差为负 ({radicand:.3e})")
    half = z * math.sqrt(2.0 * radicand)
    return LoaInterval(float(nu_j), -half, half, MULTIPLICATIVE, z)


def item_effects(fit: FitResult) -> np.ndarray:
    """拟合中与乘法项配对的项目效应（中心化时为 nu_j，否则为 mu_j）"""
    return fit.nu if fit.layout.centered else fit.params.beta.copy()


def loa_grid(source: ComponentsLike,
             n: int = 200,
             level: Optional[float] = None,
             span: Optional[Tuple[float, float]] = None) -> pd.DataFrame:
    """
    在等间距的项目效应网格上计算两种界限
    Args:
        source: 拟合结果或方差分量
        n: 网格点数
        level: 置信水平
        span: 网格范围，默认取拟合的项目效应范围（方差分量时必须给出）
    Returns:
        pd.DataFrame: 列为 item_effect, lower_add, upper_add, lower_mult, upper_mult
    """
    if span is None:
        if isinstance(source, VarianceComponents):
            raise UnsupportedModelError("只有方差分量时需要给出网格范围")
        effects = item_effects(source)
        span = (float(effects.min()), float(effects.max()))
    grid = np.linspace(span[0], span[1], n)
    additive = loa_additive(source, level)
    rows = []
    for nu in grid:
        mult = loa_multiplicative(source, float(nu), level)
        rows.append((float(nu), additive.lower, additive.upper, mult.lower, mult.upper))
    return pd.DataFrame(rows, columns=LOA_COLUMNS)


def to_random_methods(fit: FitResult) -> RandomMethodsParams:
    """
    换成随机方法参数化：mu_j = mu + nu_j, a~_i = a_i - b_i mu
    var(a~) = sigma_a^2 - 2 mu rho sigma_a sigma_b + mu^2 sigma_b^2
    cov(a~, b) = rho sigma_a sigma_b - mu sigma_b^2
    Args:
        fit: 含 mp() 项的拟合
    Returns:
        RandomMethodsParams: 随机方法参数化下的估计
    """
    layout = fit.layout
    if not layout.has_mult:
        raise UnsupportedModelError("随机方法参数化需要含 mp() 项的模型")
    a = fit.random_effects(ROLE_A)
    b = fit.random_effects(ROLE_B)
    mu_j = fit.params.beta.copy()
    if not layout.centered:
        comps = components_of(fit)
        return RandomMethodsParams(fit.mu, mu_j, a, b, comps, layout.fixed_levels, layout.random_levels)

    mu = fit.mu
    sa, sb, rho = fit.sigma_a, fit.sigma_b, fit.rho
    var_a = sa ** 2 - 2.0 * mu * rho * sa * sb + mu ** 2 * sb ** 2
    cov_ab = rho * sa * sb - mu * sb ** 2
    sd_a = math.sqrt(max(var_a, 0.0))
    rho_tilde = cov_ab / (sd_a * sb) if sd_a > 0 and sb > 0 else 0.0
    rho_tilde = float(np.clip(rho_tilde, -1.0, 1.0))
    comps = VarianceComponents(sigma=fit.sigma, sigma_a=sd_a, sigma_b=sb, rho=rho_tilde)
    return RandomMethodsParams(mu, mu_j, a - b * mu, b, comps, layout.fixed_levels, layout.random_levels)
