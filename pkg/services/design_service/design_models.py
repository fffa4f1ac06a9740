"""
设计服务的数据模型
DesignLayout 描述 y = X beta + Z(beta) w + e 中的固定结构，ParamVector 是外层优化的无约束参数
"""
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from services.formula_service import ModelSpec

# 方差分量角色
ROLE_A = "a"                # 乘法项随机因子的随机截距
ROLE_B = "b"                # 乘法项的随机斜率（尺度效应）
ROLE_D = "d"                # 与乘法项对应的随机交互（分歧效应）
ROLE_INTERCEPT = "intercept"
ROLE_INTERACTION = "interaction"


class VarianceComponent:
    """
    一个随机效应块：每个水平占用 w 中的一列
    """

    def __init__(self,
                 label: str,
                 role: str,
                 factors: Tuple[str, ...],
                 level_columns: np.ndarray,
                 obs_columns: np.ndarray,
                 level_labels: List[str]):
        """
        初始化方差分量
        Args:
            label: 分量名称（例如 "Assessor"、"Assessor:Product"）
            role: 分量角色，取值见 ROLE_*
            factors: 涉及的因子
            level_columns: 每个水平在 w 中的列号
            obs_columns: 每个观测对应的列号
            level_labels: 每个水平的标签
        """
        self.label = label
        self.role = role
        self.factors = factors
        self.level_columns = np.asarray(level_columns, dtype=np.int64)
        self.obs_columns = np.asarray(obs_columns, dtype=np.int64)
        self.level_labels = list(level_labels)

    @property
    def size(self) -> int:
        return int(self.level_columns.shape[0])

    @property
    def natural_name(self) -> str:
        """自然尺度参数名称"""
        if self.role in (ROLE_A, ROLE_B, ROLE_D):
            return f"sigma_{self.role}"
        return f"sigma[{self.label}]"

    def __repr__(self) -> str:
        return f"VarianceComponent({self.label!r}, role={self.role}, size={self.size})"


class DesignLayout:
    """
    模型的数值结构：固定效应编码、随机效应块布局和乘法项的载荷位置
    """

    def __init__(self,
                 spec: ModelSpec,
                 response: np.ndarray,
                 fixed_codes: np.ndarray,
                 fixed_levels: List[str],
                 components: List[VarianceComponent],
                 q: int,
                 random_codes: Optional[np.ndarray] = None,
                 random_levels: Optional[List[str]] = None,
                 centered: bool = True):
        self.spec = spec
        self.y = response
        self.fixed_codes = fixed_codes
        self.fixed_levels = fixed_levels
        self.components = components
        self.q = q
        self.random_codes = random_codes
        self.random_levels = random_levels or []
        self.centered = centered
        self._X = None

    # ===== 维度 =====

    @property
    def n_obs(self) -> int:
        return int(self.y.shape[0])

    @property
    def p(self) -> int:
        return len(self.fixed_levels)

    @property
    def J(self) -> int:
        return self.p

    @property
    def I(self) -> int:
        return len(self.random_levels)

    @property
    def has_mult(self) -> bool:
        return self.component(ROLE_B) is not None

    @property
    def has_rho(self) -> bool:
        return self.component(ROLE_A) is not None and self.component(ROLE_B) is not None

    @property
    def obs_index(self) -> np.ndarray:
        """每个观测的 (i, j) 水平对；没有乘法项时 i = -1"""
        i = self.random_codes if self.random_codes is not None else np.full(self.n_obs, -1)
        return np.column_stack([i, self.fixed_codes])

    def component(self, role: str) -> Optional[VarianceComponent]:
        """按角色查找方差分量（a/b/d 各最多一个）"""
        for comp in self.components:
            if comp.role == role:
                return comp
        return None

    def cell_counts(self) -> Optional[np.ndarray]:
        """I x J 的单元观测数（只在有乘法项时定义）"""
        if self.random_codes is None:
            return None
        counts = np.zeros((self.I, self.J), dtype=np.int64)
        np.add.at(counts, (self.random_codes, self.fixed_codes), 1)
        return counts

    # ===== 矩阵 =====

    def fixed_matrix(self) -> sparse.csr_matrix:
        """n x p 的单元均值编码矩阵，每行恰好一个1"""
        if self._X is None:
            n = self.n_obs
            self._X = sparse.csr_matrix(
                (np.ones(n), (np.arange(n), self.fixed_codes)), shape=(n, self.p)
            )
        return self._X

    def random_matrix(self, nu: Optional[np.ndarray]) -> sparse.csr_matrix:
        """
        n x q 的 Z(beta)
        Args:
            nu: 乘法协变量（长度 J），没有乘法项时可以为 None
        Returns:
            sparse.csr_matrix: 随机效应设计矩阵
        """
        n = self.n_obs
        rows, cols, vals = [], [], []
        for comp in self.components:
            rows.append(np.arange(n))
            cols.append(comp.obs_columns)
            if comp.role == ROLE_B:
                vals.append(np.asarray(nu, dtype=float)[self.fixed_codes])
            else:
                vals.append(np.ones(n))
        if not rows:
            return sparse.csr_matrix((n, 0))
        return sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, self.q),
        )

    def param_names(self) -> List[str]:
        """无约束参数向量中各分量的名称"""
        names = [f"beta[{level}]" for level in self.fixed_levels]
        names.append("log_sigma")
        names.extend(f"log_{comp.natural_name}" for comp in self.components)
        if self.has_rho:
            names.append("z_rho")
        return names

    @property
    def n_params(self) -> int:
        return self.p + 1 + len(self.components) + (1 if self.has_rho else 0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n_obs': self.n_obs,
            'p': self.p,
            'q': self.q,
            'I': self.I,
            'J': self.J,
            'components': [
                {'label': c.label, 'role': c.role, 'size': c.size} for c in self.components
            ],
        }


class ParamVector:
    """
    外层优化的无约束参数：单元均值、对数标准差、Fisher-z 变换后的相关系数
    """

    def __init__(self,
                 beta: Sequence[float],
                 log_sigma: float,
                 log_sds: Optional[Dict[str, float]] = None,
                 z_rho: Optional[float] = None):
        """
        初始化参数向量
        Args:
            beta: 单元均值 mu + nu_j
            log_sigma: log(sigma)
            log_sds: 方差分量名称 -> log 标准差
            z_rho: atanh(rho)，只有 a 与 b 同时存在时才有
        """
        self.beta = np.asarray(beta, dtype=float).copy()
        self.log_sigma = float(log_sigma)
        self.log_sds = {k: float(v) for k, v in (log_sds or {}).items()}
        self.z_rho = None if z_rho is None else float(z_rho)

    # ===== 自然尺度 =====

    @property
    def sigma(self) -> float:
        return math.exp(self.log_sigma)

    @property
    def rho(self) -> float:
        return 0.0 if self.z_rho is None else math.tanh(self.z_rho)

    def sd(self, label: str) -> float:
        """某个方差分量的标准差，不在模型中时为0"""
        return math.exp(self.log_sds[label]) if label in self.log_sds else 0.0

    def sd_by_role(self, layout: DesignLayout, role: str) -> float:
        comp = layout.component(role)
        return self.sd(comp.label) if comp is not None else 0.0

    # ===== 向量互转 =====

    def to_array(self, layout: DesignLayout) -> np.ndarray:
        """按 layout.param_names() 的顺序展开"""
        values = list(self.beta)
        values.append(self.log_sigma)
        values.extend(self.log_sds[comp.label] for comp in layout.components)
        if layout.has_rho:
            values.append(self.z_rho if self.z_rho is not None else 0.0)
        return np.asarray(values, dtype=float)

    @classmethod
    def from_array(cls, layout: DesignLayout, x: Sequence[float]) -> "ParamVector":
        x = np.asarray(x, dtype=float)
        if x.shape[0] != layout.n_params:
            raise ValueError(f"参数向量长度应为 {layout.n_params}，实际为 {x.shape[0]}")
        p = layout.p
        log_sds = {comp.label: x[p + 1 + k] for k, comp in enumerate(layout.components)}
        z_rho = x[-1] if layout.has_rho else None
        return cls(x[:p], x[p], log_sds, z_rho)

    @classmethod
    def from_natural(cls,
                     layout: DesignLayout,
                     beta: Sequence[float],
                     sigma: float,
                     sds: Optional[Dict[str, float]] = None,
                     rho: float = 0.0) -> "ParamVector":
        """
        从自然尺度构造
        Args:
            layout: 设计结构
            beta: 单元均值
            sigma: 残差标准差
            sds: 角色 ('a'/'b'/'d') 或分量名称 -> 标准差
            rho: a 与 b 的相关系数
        Returns:
            ParamVector: 参数向量
        """
        sds = sds or {}
        log_sds = {}
        for comp in layout.components:
            value = sds.get(comp.role, sds.get(comp.label))
            if value is None:
                raise ValueError(f"缺少方差分量 '{comp.label}' 的标准差")
            log_sds[comp.label] = math.log(value)
        z_rho = math.atanh(rho) if layout.has_rho else None
        return cls(beta, math.log(sigma), log_sds, z_rho)

    def copy(self) -> "ParamVector":
        return ParamVector(self.beta, self.log_sigma, self.log_sds, self.z_rho)

    def is_finite(self) -> bool:
        values = list(self.beta) + [self.log_sigma] + list(self.log_sds.values())
        if self.z_rho is not None:
            values.append(self.z_rho)
        return bool(np.all(np.isfinite(values)))

    def natural(self, layout: DesignLayout) -> Dict[str, Any]:
        """自然尺度视图：beta、sigma、各分量标准差和 rho"""
        result = {
            'beta': {level: float(b) for level, b in zip(layout.fixed_levels, self.beta)},
            'sigma': self.sigma,
        }
        for comp in layout.components:
            result[comp.natural_name] = self.sd(comp.label)
        if layout.has_rho:
            result['rho'] = self.rho
        return result

    def __repr__(self) -> str:
        return (f"ParamVector(beta={np.round(self.beta, 4).tolist()}, "
                f"log_sigma={self.log_sigma:.4f}, log_sds={self.log_sds}, z_rho={self.z_rho})")
