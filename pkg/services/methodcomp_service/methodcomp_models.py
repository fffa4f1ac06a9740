"""
方法比较服务的数据模型
"""
from typing import Any, Dict, List

import numpy as np
from pydantic import BaseModel, Field, field_validator

ADDITIVE = "additive"
MULTIPLICATIVE = "multiplicative"


class VarianceComponents(BaseModel):
    """
    两种随机方法之差的方差分量
    sigma_a 与 rho 对应的截距和 item_effect 的取法要一致（a 配 nu_j，a~ 配 mu_j）
    """
    sigma: float = Field(..., ge=0, description="残差标准差")
    sigma_a: float = Field(default=0.0, ge=0, description="方法截距标准差")
    sigma_b: float = Field(default=0.0, ge=0, description="方法斜率标准差")
    rho: float = Field(default=0.0, description="截距与斜率的相关系数")

    @field_validator("rho")
    @classmethod
    def _check_rho(cls, value: float) -> float:
        if not -1.0 <= value <= 1.0:
            raise ValueError(f"相关系数必须在 [-1, 1] 内，实际为 {value}")
        return value


class LoaInterval:
    """
    一致性界限：两种方法测量之差的预测区间
    """

    def __init__(self, item_effect: float, lower: float, upper: float, model: str, z: float):
        """
        Args:
            item_effect: 项目效应（nu_j 或 mu_j，取决于参数化）
            lower, upper: 区间端点
            model: additive 或 multiplicative
            z: 标准正态分位数
        """
        self.item_effect = item_effect
        self.lower = lower
        self.upper = upper
        self.model = model
        self.z = z

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value) -> np.ndarray:
        value = np.asarray(value, dtype=float)
        return (value >= self.lower) & (value <= self.upper)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'item_effect': self.item_effect,
            'lower': self.lower,
            'upper': self.upper,
            'model': self.model,
            'z': self.z,
        }

    def __repr__(self) -> str:
        return f"LoaInterval({self.model}, item_effect={self.item_effect:.4f}, [{self.lower:.4f}, {self.upper:.4f}])"


class RandomMethodsParams:
    """
    随机方法参数化 y_ij = mu_j + a~_i + b_i mu_j + e_ij 下的估计
    """

    def __init__(self,
                 mu: float,
                 mu_j: np.ndarray,
                 a_tilde: np.ndarray,
                 b: np.ndarray,
                 components: VarianceComponents,
                 item_levels: List[str],
                 method_levels: List[str]):
        self.mu = mu
        self.mu_j = mu_j
        self.a_tilde = a_tilde
        self.b = b
        self.components = components
        self.item_levels = item_levels
        self.method_levels = method_levels

    @property
    def sigma_a_tilde(self) -> float:
        return self.components.sigma_a

    @property
    def rho_tilde(self) -> float:
        return self.components.rho

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mu': self.mu,
            'mu_j': dict(zip(self.item_levels, map(float, self.mu_j))),
            'a_tilde': dict(zip(self.method_levels, map(float, self.a_tilde))),
            'b': dict(zip(self.method_levels, map(float, self.b))),
            'sigma': self.components.sigma,
            'sigma_a_tilde': self.sigma_a_tilde,
            'sigma_b': self.components.sigma_b,
            'rho_tilde': self.rho_tilde,
        }
