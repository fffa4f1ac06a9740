"""
拟合服务的数据模型
"""
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field

from config import settings
from services.data_service import Dataset
from services.design_service import (
    ROLE_A,
    ROLE_B,
    ROLE_D,
    ROLE_INTERACTION,
    ROLE_INTERCEPT,
    DesignLayout,
    ParamVector,
    grand_mean,
    regression_lines,
)
from services.errors import UnsupportedModelError
from services.formula_service import ModelSpec
from services.likelihood_service import InnerSolution


class FitOptions(BaseModel):
    """外层优化选项，默认值来自 settings"""
    max_iter: int = Field(default_factory=lambda: settings.max_iter, ge=1, description="最大迭代次数")
    grad_tol: float = Field(default_factory=lambda: settings.grad_tol, gt=0, description="投影梯度最大范数")
    rel_tol: float = Field(default_factory=lambda: settings.rel_tol, gt=0, description="目标函数相对变化")
    accept_tol: float = Field(default_factory=lambda: settings.accept_tol, gt=0, description="判定收敛的梯度最大范数")
    polish_steps: int = Field(default_factory=lambda: settings.polish_steps, ge=0, description="Newton 修正步数上限")
    init: Dict[str, float] = Field(default_factory=dict, description="初值覆盖 (mu/sigma/sigma_a/sigma_b/sigma_d/rho)")
    centered: bool = Field(default=True, description="乘法协变量是否中心化")


class FitResult:
    """
    一次最大似然拟合的结果
    """

    def __init__(self,
                 params: ParamVector,
                 nll: float,
                 inner: InnerSolution,
                 n_iter: int,
                 grad_norm: float,
                 converged: bool,
                 model: ModelSpec,
                 layout: DesignLayout,
                 dataset: Dataset,
                 warnings: Optional[List[str]] = None,
                 elapsed: float = 0.0,
                 message: str = ""):
        """
        初始化拟合结果
        Args:
            params: 最优点的参数向量
            nll: 最小化后的负对数似然
            inner: 最优点的内层解（随机效应估计）
            n_iter: 迭代次数
            grad_norm: 最优点的投影梯度最大范数
            converged: 是否收敛
            model: 模型结构
            layout: 设计结构
            dataset: 数据集
            warnings: 诊断信息
            elapsed: 耗时（秒）
            message: 优化器的停止原因
        """
        self.params = params
        self.nll = nll
        self.inner = inner
        self.n_iter = n_iter
        self.grad_norm = grad_norm
        self.converged = converged
        self.model = model
        self.layout = layout
        self.dataset = dataset
        self.warnings = warnings or []
        self.elapsed = elapsed
        self.message = message

    # ===== 自然尺度 =====

    @property
    def beta(self) -> np.ndarray:
        return self.params.beta

    @property
    def mu(self) -> float:
        return grand_mean(self.params.beta)

    @property
    def nu(self) -> np.ndarray:
        return self.params.beta - self.mu

    @property
    def sigma(self) -> float:
        return self.params.sigma

    def _sd(self, role: str, fallback: str) -> float:
        # 没有乘法项时 a、d 以普通随机截距、交互的形式出现
        comp = self.layout.component(role) or self.layout.component(fallback)
        return self.params.sd(comp.label) if comp is not None else 0.0

    @property
    def sigma_a(self) -> float:
        return self._sd(ROLE_A, ROLE_INTERCEPT)

    @property
    def sigma_b(self) -> float:
        return self.params.sd_by_role(self.layout, ROLE_B)

    @property
    def sigma_d(self) -> float:
        return self._sd(ROLE_D, ROLE_INTERACTION)

    @property
    def rho(self) -> float:
        return self.params.rho if self.layout.has_rho else 0.0

    def natural(self) -> Dict[str, Any]:
        return self.params.natural(self.layout)

    # ===== 随机效应 =====

    def modes(self) -> Dict[str, Dict[str, float]]:
        return self.inner.modes(self.layout)

    def random_effects(self, role: str) -> np.ndarray:
        """某个角色的随机效应众数（按水平顺序），不在模型中时为全0"""
        comp = self.layout.component(role)
        if comp is None:
            return np.zeros(self.layout.I)
        return self.inner.w_tilde[comp.level_columns]

    def lines(self) -> List[Dict[str, Any]]:
        """
        每个分组的回归线：斜率 b_i + 1，截距 a_i - mu b_i
        Returns:
            List[Dict[str, Any]]: 每行包含 group、slope、intercept
        """
        if not self.layout.has_mult:
            raise UnsupportedModelError("回归线只对含 mp() 项的模型有定义")
        # 非中心化时 a 已经是相对于 mu_j 的截距
        mu = self.mu if self.layout.centered else 0.0
        slopes, intercepts = regression_lines(
            self.random_effects(ROLE_A), self.random_effects(ROLE_B), mu
        )
        return [
            {'group': g, 'slope': float(s), 'intercept': float(c)}
            for g, s, c in zip(self.layout.random_levels, slopes, intercepts)
        ]

    def to_dict(self) -> Dict[str, Any]:
        """转为字典格式（JSON 输出的唯一来源）"""
        return {
            'model': self.model.to_formula(),
            'nll': self.nll,
            'converged': self.converged,
            'n_iter': self.n_iter,
            'grad_norm': self.grad_norm,
            'elapsed': self.elapsed,
            'message': self.message,
            'parameters': self.natural(),
            'random_effects': self.modes(),
            'warnings': list(self.warnings),
            'design': self.layout.to_dict(),
        }

    def __repr__(self) -> str:
        return (f"FitResult(nll={self.nll:.6f}, converged={self.converged}, "
                f"n_iter={self.n_iter}, model='{self.model}')")
