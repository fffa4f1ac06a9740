"""
构建模型的数值结构
w 的块顺序: (a_1,b_1),...,(a_I,b_I)，然后 d_11...d_IJ，然后其余随机截距与交互
"""
import logging
from typing import Dict, Optional, Tuple

import numpy as np

from services.data_service import Dataset
from services.formula_service import ModelSpec, validate_against
from .design_models import (
    ROLE_A,
    ROLE_B,
    ROLE_D,
    ROLE_INTERACTION,
    ROLE_INTERCEPT,
    DesignLayout,
    VarianceComponent,
)

logger = logging.getLogger(__name__)

INTERCEPT_LEVEL = "(Intercept)"


def build_layout(ms: ModelSpec, ds: Dataset, centered: bool = True) -> DesignLayout:
    """
    构建设计结构
    Args:
        ms: 模型结构
        ds: 数据集
        centered: 乘法协变量是否中心化（False 为随机方法参数化，协变量取 mu_j）
    Returns:
        DesignLayout: 设计结构
    """
    binding = validate_against(ms, ds)
    n = ds.n_obs

    if ms.fixed_factor:
        fixed = binding.factors[ms.fixed_factor]
        fixed_codes = fixed.codes
        fixed_levels = list(fixed.levels)
    else:
        fixed_codes = np.zeros(n, dtype=np.int64)
        fixed_levels = [INTERCEPT_LEVEL]

    components = []
    offset = 0
    random_codes = None
    random_levels = None

    if ms.mult_term:
        random = binding.factors[ms.random_factor]
        random_codes = random.codes
        random_levels = list(random.levels)
        n_groups = random.n_levels
        if ms.has_scaling_intercept:
            a_cols = offset + 2 * np.arange(n_groups)
            b_cols = a_cols + 1
            components.append(VarianceComponent(
                ms.random_factor, ROLE_A, (ms.random_factor,),
                a_cols, a_cols[random_codes], random_levels,
            ))
            offset += 2 * n_groups
        else:
            b_cols = offset + np.arange(n_groups)
            offset += n_groups
        components.append(VarianceComponent(
            f"mp({ms.random_factor},{ms.fixed_factor})", ROLE_B, ms.mult_term,
            b_cols, b_cols[random_codes], random_levels,
        ))
        pair = ms.disagreement_term
        if pair is not None:
            J = len(fixed_levels)
            d_cols = offset + np.arange(n_groups * J)
            labels = [f"{g}:{f}" for g in random_levels for f in fixed_levels]
            components.append(VarianceComponent(
                f"{pair[0]}:{pair[1]}", ROLE_D, (ms.random_factor, ms.fixed_factor),
                d_cols, d_cols[random_codes * J + fixed_codes], labels,
            ))
            offset += n_groups * J

    for group in ms.random_intercepts:
        if ms.mult_term and group == ms.random_factor:
            continue
        factor = binding.factors[group]
        cols = offset + np.arange(factor.n_levels)
        components.append(VarianceComponent(
            group, ROLE_INTERCEPT, (group,), cols, cols[factor.codes], list(factor.levels),
        ))
        offset += factor.n_levels

    for pair in ms.random_interactions:
        if pair == ms.disagreement_term:
            continue
        g, h = binding.factors[pair[0]], binding.factors[pair[1]]
        cols = offset + np.arange(g.n_levels * h.n_levels)
        labels = [f"{gl}:{hl}" for gl in g.levels for hl in h.levels]
        components.append(VarianceComponent(
            f"{pair[0]}:{pair[1]}", ROLE_INTERACTION, pair,
            cols, cols[g.codes * h.n_levels + h.codes], labels,
        ))
        offset += g.n_levels * h.n_levels

    layout = DesignLayout(
        spec=ms,
        response=ds.response,
        fixed_codes=fixed_codes,
        fixed_levels=fixed_levels,
        components=components,
        q=offset,
        random_codes=random_codes,
        random_levels=random_levels,
        centered=centered,
    )
    logger.debug(f"设计结构: n={layout.n_obs}, p={layout.p}, q={layout.q}")
    return layout


def grand_mean(beta: np.ndarray) -> float:
    """总均值 mu：单元均值的不加权平均"""
    return float(np.mean(beta))


def mult_covariate(beta: np.ndarray, centered: bool = True) -> np.ndarray:
    """
    乘法项的协变量
    Args:
        beta: 单元均值
        centered: True 时 nu_j = beta_j - mean(beta)，False 时直接取 beta_j
    Returns:
        np.ndarray: 长度 J 的协变量
    """
    beta = np.asarray(beta, dtype=float)
    if not centered:
        return beta.copy()
    return beta - beta.mean()


def covariate_jacobian(p: int, centered: bool = True) -> np.ndarray:
    """d nu / d beta，p x p"""
    jac = np.eye(p)
    if centered:
        jac -= 1.0 / p
    return jac


def loading_row(layout: DesignLayout, obs: int, nu: Optional[np.ndarray]) -> Dict[int, float]:
    """
    Z(beta) 的一行（稀疏表示）
    Args:
        layout: 设计结构
        obs: 观测序号
        nu: 乘法协变量
    Returns:
        Dict[int, float]: 列号 -> 值
    """
    row = {}
    for comp in layout.components:
        col = int(comp.obs_columns[obs])
        if comp.role == ROLE_B:
            row[col] = float(nu[layout.fixed_codes[obs]])
        else:
            row[col] = 1.0
    return row


def regression_lines(a: np.ndarray, b: np.ndarray, mu: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    每个分组相对于共识值 mu + nu_j 的回归线
    y = (a_i - mu b_i) + (1 + b_i) (mu + nu_j)
    Returns:
        Tuple[np.ndarray, np.ndarray]: (斜率, 截距)
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return 1.0 + b, a - mu * b
