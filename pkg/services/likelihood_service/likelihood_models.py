"""
似然服务的数据模型
"""
import math
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from services.design_service import ROLE_A, ROLE_B, DesignLayout, ParamVector


class InnerSolution:
    """
    内层问题的解：随机效应众数、曲率矩阵 -H 及其对数行列式
    """

    def __init__(self,
                 w_tilde: np.ndarray,
                 hessian: np.ndarray,
                 log_det: float,
                 cholesky: Optional[np.ndarray] = None):
        """
        初始化内层解
        Args:
            w_tilde: 随机效应众数（长度 q）
            hessian: 曲率矩阵 Z'Z/sigma^2 + G^-1（q x q，对称正定）
            log_det: log|-H|
            cholesky: 曲率矩阵的下三角 Cholesky 因子
        """
        self.w_tilde = w_tilde
        self.hessian = hessian
        self.log_det = log_det
        self.cholesky = cholesky

    @property
    def q(self) -> int:
        return int(self.w_tilde.shape[0])

    def modes(self, layout: DesignLayout) -> Dict[str, Dict[str, float]]:
        """按分量名称和水平标签整理的众数"""
        result = {}
        for comp in layout.components:
            values = self.w_tilde[comp.level_columns]
            result[comp.label] = {label: float(v) for label, v in zip(comp.level_labels, values)}
        return result

    def to_dict(self) -> Dict[str, Any]:
        return {'q': self.q, 'log_det': self.log_det}


class GMatrix:
    """
    随机效应协方差 G：每个分组一个 (a_i, b_i) 的 2x2 块，其余分量为对角
    """

    def __init__(self, layout: DesignLayout, pv: ParamVector):
        self.q = layout.q
        self.pair: Optional[Tuple[np.ndarray, np.ndarray]] = None
        self.block = None
        self.diagonal: List[Tuple[int, np.ndarray, float]] = []

        if layout.has_rho:
            a_comp, b_comp = layout.component(ROLE_A), layout.component(ROLE_B)
            sa, sb, rho = pv.sd(a_comp.label), pv.sd(b_comp.label), pv.rho
            self.pair = (a_comp.level_columns, b_comp.level_columns)
            self.sa, self.sb, self.rho = sa, sb, rho
            cov = rho * sa * sb
            self.block = np.array([[sa * sa, cov], [cov, sb * sb]])

        for k, comp in enumerate(layout.components):
            if self.pair is not None and comp.role in (ROLE_A, ROLE_B):
                continue
            self.diagonal.append((k, comp.level_columns, pv.sd(comp.label)))

    @property
    def n_groups(self) -> int:
        return 0 if self.pair is None else int(self.pair[0].shape[0])

    def block_inverse(self) -> np.ndarray:
        det = self.block[0, 0] * self.block[1, 1] - self.block[0, 1] ** 2
        return np.array([[self.block[1, 1], -self.block[0, 1]],
                         [-self.block[0, 1], self.block[0, 0]]]) / det

    def is_positive_definite(self) -> bool:
        if any(s <= 0 or not np.isfinite(s) for _, _, s in self.diagonal):
            return False
        if self.block is not None:
            return self.sa > 0 and self.sb > 0 and abs(self.rho) < 1
        return True

    def dense(self) -> np.ndarray:
        """稠密的 G（q x q）"""
        G = np.zeros((self.q, self.q))
        for _, cols, s in self.diagonal:
            G[cols, cols] = s * s
        if self.pair is not None:
            a, b = self.pair
            G[a, a] = self.block[0, 0]
            G[b, b] = self.block[1, 1]
            G[a, b] = self.block[0, 1]
            G[b, a] = self.block[0, 1]
        return G

    def inverse(self) -> np.ndarray:
        """稠密的 G^-1（q x q）"""
        Ginv = np.zeros((self.q, self.q))
        for _, cols, s in self.diagonal:
            Ginv[cols, cols] = 1.0 / (s * s)
        if self.pair is not None:
            a, b = self.pair
            inv = self.block_inverse()
            Ginv[a, a] = inv[0, 0]
            Ginv[b, b] = inv[1, 1]
            Ginv[a, b] = inv[0, 1]
            Ginv[b, a] = inv[0, 1]
        return Ginv

    def log_det(self) -> float:
        """log|G|"""
        total = sum(cols.shape[0] * 2.0 * math.log(s) for _, cols, s in self.diagonal)
        if self.pair is not None:
            det = self.block[0, 0] * self.block[1, 1] - self.block[0, 1] ** 2
            total += self.n_groups * math.log(det)
        return total

    def block_derivatives(self) -> List[np.ndarray]:
        """2x2 块对 (log sigma_a, log sigma_b, z_rho) 的导数"""
        sa, sb, rho = self.sa, self.sb, self.rho
        cov = rho * sa * sb
        return [
            np.array([[2 * sa * sa, cov], [cov, 0.0]]),
            np.array([[0.0, cov], [cov, 2 * sb * sb]]),
            np.array([[0.0, (1 - rho * rho) * sa * sb], [(1 - rho * rho) * sa * sb, 0.0]]),
        ]
