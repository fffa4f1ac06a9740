"""
一致性界限的模拟研究
每个病人的真值 mu_j 上用两种随机方法测量，y = mu_j + a~ + b mu_j + e，记录两者之差
每个病人使用 SeedSequence(seed).spawn 得到的独立随机流，结果与执行顺序无关
"""
import logging
import math
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd

from config import settings
from services.errors import ParameterError
from services.optimize_service import FitResult
from .limits_of_agreement import loa_additive, loa_multiplicative, to_random_methods
from .methodcomp_models import ADDITIVE, MULTIPLICATIVE, VarianceComponents

logger = logging.getLogger(__name__)

SIMULATION_COLUMNS = ["patient", "true_value", "method1_value", "method2_value", "difference"]
SPACINGS = ("even", "random")

DEFAULT_PATIENTS = 120
DEFAULT_REPS = 100
DEFAULT_RANGE = (0.1, 12.0)


def method_cholesky(comp: VarianceComponents) -> np.ndarray:
    """(a~, b) 协方差的 2x2 Cholesky 因子"""
    if abs(comp.rho) >= 1:
        raise ParameterError(f"模拟需要 |rho| < 1，实际为 {comp.rho}", "rho")
    return np.array([
        [comp.sigma_a, 0.0],
        [comp.rho * comp.sigma_b, comp.sigma_b * math.sqrt(1.0 - comp.rho ** 2)],
    ])


def random_methods_components(source: Union[FitResult, VarianceComponents]) -> VarianceComponents:
    """随机方法参数化下的方差分量，项目效应取真值 mu_j"""
    if isinstance(source, VarianceComponents):
        return source
    return to_random_methods(source).components


def true_values(n_patients: int, value_range: Tuple[float, float], spacing: str = "even",
                seed: Optional[int] = None) -> np.ndarray:
    """
    病人的真值
    Args:
        n_patients: 病人数
        value_range: (下限, 上限)
        spacing: even 为等间距，random 为均匀分布抽样（排序后）
        seed: 随机种子（random 时使用）
    """
    lo, hi = value_range
    if not lo < hi:
        raise ParameterError(f"真值范围必须满足 lo < hi，实际为 {value_range}", "range")
    if spacing == "even":
        return np.linspace(lo, hi, n_patients)
    if spacing == "random":
        return np.sort(np.random.default_rng(seed).uniform(lo, hi, n_patients))
    raise ParameterError(f"未知的取值方式 '{spacing}'，可选: {', '.join(SPACINGS)}", "spacing")


def simulate_loa_study(source: Union[FitResult, VarianceComponents],
                       n_patients: int = DEFAULT_PATIENTS,
                       n_reps: int = DEFAULT_REPS,
                       value_range: Tuple[float, float] = DEFAULT_RANGE,
                       seed: Optional[int] = None,
                       spacing: str = "even") -> pd.DataFrame:
    """
    模拟两种随机方法的测量差
    Args:
        source: 拟合结果（先换成随机方法参数化）或随机方法参数化下的方差分量
        n_patients: 病人数
        n_reps: 每个病人的模拟次数
        value_range: 真值范围
        seed: 随机种子，默认 settings.default_seed
        spacing: 真值取法
    Returns:
        pd.DataFrame: 列为 patient, true_value, method1_value, method2_value, difference，
                      按 (patient, 重复) 排序
    """
    if n_patients < 1 or n_reps < 1:
        raise ParameterError("病人数和模拟次数必须为正")
    seed = settings.default_seed if seed is None else seed
    comp = random_methods_components(source)
    L = method_cholesky(comp)
    values = true_values(n_patients, value_range, spacing, seed)

    streams = np.random.SeedSequence(seed).spawn(n_patients)
    frames = []
    for patient, (mu_j, stream) in enumerate(zip(values, streams), start=1):
        rng = np.random.default_rng(stream)
        effects = rng.standard_normal((n_reps, 2, 2)) @ L.T
        noise = comp.sigma * rng.standard_normal((n_reps, 2))
        measured = mu_j + effects[:, :, 0] + effects[:, :, 1] * mu_j + noise
        frames.append(pd.DataFrame({
            "patient": patient,
            "true_value": mu_j,
            "method1_value": measured[:, 0],
            "method2_value": measured[:, 1],
            "difference": measured[:, 0] - measured[:, 1],
        }))
    table = pd.concat(frames, ignore_index=True)[SIMULATION_COLUMNS]
    logger.info(f"模拟完成: {n_patients} 个病人 x {n_reps} 次, seed={seed}")
    return table


def band_coverage(table: pd.DataFrame,
                  source: Union[FitResult, VarianceComponents],
                  level: Optional[float] = None,
                  model: str = MULTIPLICATIVE) -> float:
    """
    模拟的测量差落在一致性界限内的比例（项目效应取 true_value）
    Args:
        table: simulate_loa_study 的输出
        source: 拟合结果或随机方法参数化下的方差分量
        level: 置信水平
        model: additive 或 multiplicative
    Returns:
        float: 覆盖比例
    """
    source = random_methods_components(source)
    if model == ADDITIVE:
        band = loa_additive(source, level)
        inside = band.contains(table["difference"].to_numpy())
    elif model == MULTIPLICATIVE:
        inside = np.zeros(len(table), dtype=bool)
        for value, rows in table.groupby("true_value").indices.items():
            band = loa_multiplicative(source, float(value), level)
            inside[rows] = band.contains(table["difference"].to_numpy()[rows])
    else:
        raise ParameterError(f"未知的模型 '{model}'", "model")
    return float(np.mean(inside))
