"""
推断服务的数据模型
"""
import math
from fractions import Fraction
from typing import Any, Dict, List, Optional

import numpy as np
from scipy import stats


def _finite_or_none(value: float) -> Optional[float]:
    return float(value) if value is not None and math.isfinite(value) else None


class LrtResult:
    """
    似然比检验的一行：效应名称、chi2 = 2 (NLL_null - NLL_full)、自由度（可为分数）和 p 值
    """

    def __init__(self,
                 effect: str,
                 chi2: float,
                 df: Fraction,
                 p_value: float,
                 method: str = "fractional",
                 null_model: str = "",
                 converged: bool = True,
                 note: str = ""):
        self.effect = effect
        self.chi2 = chi2
        self.df = Fraction(df)
        self.p_value = p_value
        self.method = method
        self.null_model = null_model
        self.converged = converged
        self.note = note

    def to_dict(self) -> Dict[str, Any]:
        return {
            'effect': self.effect,
            'chi2': self.chi2,
            'df': float(self.df),
            'df_text': str(self.df),
            'p_value': self.p_value,
            'method': self.method,
            'null_model': self.null_model,
            'converged': self.converged,
            'note': self.note,
        }

    def __repr__(self) -> str:
        return f"LrtResult({self.effect!r}, chi2={self.chi2:.4f}, df={self.df}, p={self.p_value:.3g})"


class ProfileCi:
    """
    固定效应对比 c'beta 的轮廓似然置信区间
    """

    def __init__(self,
                 contrast: np.ndarray,
                 level: float,
                 estimate: float,
                 lower: float,
                 upper: float,
                 se: float,
                 label: str = "",
                 lower_open: bool = False,
                 upper_open: bool = False,
                 non_monotone: bool = False,
                 n_evals: int = 0):
        """
        初始化区间
        Args:
            contrast: 对比系数（长度 p）
            level: 置信水平
            estimate: 点估计 c'beta
            lower, upper: 区间端点，未找到交点的一侧为 -inf/+inf
            se: Wald 标准误
            label: 对比的文字描述
            lower_open, upper_open: 在搜索范围内没有找到交点
            non_monotone: 轮廓不单调，使用了网格回退
            n_evals: 轮廓似然评估次数
        """
        self.contrast = np.asarray(contrast, dtype=float)
        self.level = level
        self.estimate = estimate
        self.lower = lower
        self.upper = upper
        self.se = se
        self.label = label
        self.lower_open = lower_open
        self.upper_open = upper_open
        self.non_monotone = non_monotone
        self.n_evals = n_evals

    @property
    def asymmetry(self) -> float:
        """上半宽减下半宽；正值表示区间向上偏"""
        return (self.upper - self.estimate) - (self.estimate - self.lower)

    @property
    def asymmetric(self) -> bool:
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            return True
        return abs(self.asymmetry) > 1e-3 * (self.upper - self.lower)

    @property
    def wald_lower(self) -> float:
        return self.estimate - stats.norm.ppf(0.5 + self.level / 2) * self.se

    @property
    def wald_upper(self) -> float:
        return self.estimate + stats.norm.ppf(0.5 + self.level / 2) * self.se

    def to_dict(self) -> Dict[str, Any]:
        return {
            'contrast': self.label,
            'coefficients': self.contrast.tolist(),
            'level': self.level,
            'estimate': self.estimate,
            'lower': _finite_or_none(self.lower),
            'upper': _finite_or_none(self.upper),
            'se': _finite_or_none(self.se),
            'wald_lower': _finite_or_none(self.wald_lower),
            'wald_upper': _finite_or_none(self.wald_upper),
            'asymmetric': self.asymmetric,
            'lower_open': self.lower_open,
            'upper_open': self.upper_open,
            'non_monotone': self.non_monotone,
        }


class AnovaRow:
    """方差分析表的一行"""

    def __init__(self, source: str, ss: float, df: int, f: Optional[float] = None, p_value: Optional[float] = None):
        self.source = source
        self.ss = ss
        self.df = df
        self.f = f
        self.p_value = p_value

    @property
    def ms(self) -> float:
        return self.ss / self.df if self.df > 0 else math.nan

    def to_dict(self) -> Dict[str, Any]:
        return {
            'source': self.source,
            'ss': self.ss,
            'df': self.df,
            'ms': _finite_or_none(self.ms),
            'f': _finite_or_none(self.f),
            'p_value': _finite_or_none(self.p_value),
        }


class FTestResult:
    """F 检验：统计量、两个自由度和上尾 p 值"""

    def __init__(self, name: str, f: float, df1: int, df2: int, p_value: float):
        self.name = name
        self.f = f
        self.df1 = df1
        self.df2 = df2
        self.p_value = p_value

    def to_dict(self) -> Dict[str, Any]:
        return {'test': self.name, 'f': self.f, 'df1': self.df1, 'df2': self.df2, 'p_value': self.p_value}

    def __iter__(self):
        return iter((self.f, self.df1, self.df2, self.p_value))


class MamSummary:
    """
    MAM 的分解结果：产品效应 x_j、每个分组的尺度系数 beta_i 以及方差分析表
    """

    def __init__(self,
                 grouping: str,
                 fixed: str,
                 I: int,
                 J: int,
                 K: float,
                 balanced: bool,
                 x: np.ndarray,
                 beta: np.ndarray,
                 rows: List[AnovaRow],
                 group_levels: List[str],
                 fixed_levels: List[str]):
        self.grouping = grouping
        self.fixed = fixed
        self.I = I
        self.J = J
        self.K = K
        self.balanced = balanced
        self.x = x
        self.beta = beta
        self.rows = rows
        self.group_levels = group_levels
        self.fixed_levels = fixed_levels

    def row(self, source: str) -> AnovaRow:
        for r in self.rows:
            if r.source == source:
                return r
        raise KeyError(source)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'grouping': self.grouping,
            'fixed': self.fixed,
            'I': self.I,
            'J': self.J,
            'K': self.K,
            'balanced': self.balanced,
            'product_effects': dict(zip(self.fixed_levels, map(float, self.x))),
            'scaling': dict(zip(self.group_levels, map(float, self.beta))),
            'anova': [r.to_dict() for r in self.rows],
        }
