"""
联合负对数似然、内层求解和 Laplace 近似
统一采用最小化约定：h 取负的联合对数似然，w~ 是 h 的最小点

    h(w)  = sum_o [0.5 log(2 pi s^2) + r_o^2 / (2 s^2)] + 0.5 log|2 pi G| + 0.5 w' G^-1 w
    l_LA  = h(w~) + 0.5 log|-H| - (q/2) log(2 pi)

模型对 w 是高斯的，h 对 w 精确二次，所以一次线性求解即得 w~，l_LA 等于边际似然
"""
import logging
import math
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from services.data_service import Dataset
from services.design_service import (
    ROLE_A,
    ROLE_B,
    DesignLayout,
    ParamVector,
    covariate_jacobian,
    mult_covariate,
)
from services.errors import (
    GradientOverflowError,
    IndefiniteCurvatureError,
    ParameterOverflowError,
)
from .likelihood_models import GMatrix, InnerSolution

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


def _response(layout: DesignLayout, ds: Optional[Dataset]) -> np.ndarray:
    if ds is None:
        return layout.y
    if ds.n_obs != layout.n_obs:
        raise ValueError(f"数据集观测数 {ds.n_obs} 与设计结构 {layout.n_obs} 不一致")
    return ds.response


def _covariate(pv: ParamVector, layout: DesignLayout) -> Optional[np.ndarray]:
    return mult_covariate(pv.beta, layout.centered) if layout.has_mult else None


def joint_nll(pv: ParamVector, w: np.ndarray, layout: DesignLayout, ds: Optional[Dataset] = None) -> float:
    """
    联合负对数似然 -log p(y|w) - log p(w)
    Args:
        pv: 参数向量
        w: 随机效应（长度 q）
        layout: 设计结构
        ds: 数据集（默认使用构建 layout 时的响应）
    Returns:
        float: h(w)
    """
    y = _response(layout, ds)
    w = np.asarray(w, dtype=float)
    sigma2 = math.exp(2.0 * pv.log_sigma)
    Z = layout.random_matrix(_covariate(pv, layout))
    r = y - pv.beta[layout.fixed_codes] - Z @ w
    value = 0.5 * layout.n_obs * (LOG_2PI + math.log(sigma2)) + 0.5 * float(r @ r) / sigma2
    if layout.q:
        G = GMatrix(layout, pv)
        value += 0.5 * (layout.q * LOG_2PI + G.log_det()) + 0.5 * float(w @ G.inverse() @ w)
    if not np.isfinite(value):
        raise ParameterOverflowError(f"联合似然不是有限值: {pv}")
    return value


def inner_solve(pv: ParamVector, layout: DesignLayout, ds: Optional[Dataset] = None) -> InnerSolution:
    """
    内层问题：(Z'Z/s^2 + G^-1) w~ = Z'(y - X beta)/s^2
    Args:
        pv: 参数向量
        layout: 设计结构
        ds: 数据集
    Returns:
        InnerSolution: 众数、曲率矩阵和对数行列式
    """
    return _InnerState(pv, layout, _response(layout, ds)).solution()


class _InnerState:
    """一次评估中共享的中间量"""

    def __init__(self, pv: ParamVector, layout: DesignLayout, y: np.ndarray):
        self.pv = pv
        self.layout = layout
        self.sigma2 = math.exp(2.0 * pv.log_sigma)
        self.nu = _covariate(pv, layout)
        self.Z = layout.random_matrix(self.nu)
        self.resid0 = y - pv.beta[layout.fixed_codes]
        q = layout.q
        if q == 0:
            self.G = None
            self.w = np.zeros(0)
            self.H = np.zeros((0, 0))
            self.chol = np.zeros((0, 0))
            self.log_det_H = 0.0
            self.r = self.resid0
            return

        self.G = GMatrix(layout, pv)
        if not self.G.is_positive_definite():
            raise IndefiniteCurvatureError(f"G 不是正定的: {pv}")
        self.Ginv = self.G.inverse()
        self.ZtZ = (self.Z.T @ self.Z).toarray()
        self.H = self.ZtZ / self.sigma2 + self.Ginv
        try:
            chol, lower = linalg.cho_factor(self.H, lower=True, check_finite=True)
        except (linalg.LinAlgError, ValueError) as e:
            raise IndefiniteCurvatureError(f"曲率矩阵 Cholesky 分解失败 ({e})，sigma 或 |rho| 可能退化")
        self.chol = chol
        self.log_det_H = 2.0 * float(np.sum(np.log(np.diag(chol))))
        rhs = self.Z.T @ self.resid0 / self.sigma2
        self.w = linalg.cho_solve((chol, lower), rhs)
        self.r = self.resid0 - self.Z @ self.w

    def solution(self) -> InnerSolution:
        return InnerSolution(self.w, self.H, self.log_det_H, np.tril(self.chol))

    def nll(self) -> float:
        layout = self.layout
        value = 0.5 * layout.n_obs * (LOG_2PI + math.log(self.sigma2))
        value += 0.5 * float(self.r @ self.r) / self.sigma2
        if layout.q:
            value += 0.5 * self.G.log_det() + 0.5 * float(self.w @ self.Ginv @ self.w)
            value += 0.5 * self.log_det_H
        if not np.isfinite(value):
            raise ParameterOverflowError(f"Laplace 目标函数不是有限值: {self.pv}")
        return value

    def gradient(self) -> np.ndarray:
        layout, pv = self.layout, self.pv
        p, sigma2 = layout.p, self.sigma2
        grad = np.zeros(layout.n_params)
        codes = layout.fixed_codes
        r = self.r

        if layout.q:
            Hinv = linalg.cho_solve((self.chol, True), np.eye(layout.q))
        s = np.bincount(codes, weights=r, minlength=p)
        grad_beta = -s
        if layout.has_mult:
            b_comp = layout.component(ROLE_B)
            jac = covariate_jacobian(p, layout.centered)
            b_obs = self.w[b_comp.obs_columns]
            t = np.bincount(codes, weights=r * b_obs, minlength=p)
            # P[o, b(o)] = (Z H^-1)[o, b(o)]
            Pb = np.asarray(self.Z.multiply(Hinv[b_comp.obs_columns, :]).sum(axis=1)).ravel()
            u = np.bincount(codes, weights=Pb, minlength=p)
            grad_beta = grad_beta + jac.T @ (u - t)
        grad[:p] = grad_beta / sigma2

        trace = float(np.sum(Hinv * self.ZtZ)) if layout.q else 0.0
        grad[p] = layout.n_obs - float(r @ r) / sigma2 - trace / sigma2

        if layout.q:
            w = self.w
            diag_H = np.diag(Hinv)
            for k, cols, sd in self.G.diagonal:
                grad[p + 1 + k] = cols.shape[0] - float(np.sum(diag_H[cols] + w[cols] ** 2)) / (sd * sd)
            if self.G.pair is not None:
                a, b = self.G.pair
                acc = np.array([
                    [np.sum(Hinv[a, a] + w[a] * w[a]), np.sum(Hinv[a, b] + w[a] * w[b])],
                    [np.sum(Hinv[b, a] + w[b] * w[a]), np.sum(Hinv[b, b] + w[b] * w[b])],
                ])
                M = 0.5 * (acc - self.G.n_groups * self.G.block)
                Sinv = self.G.block_inverse()
                derivs = [-Sinv @ dS @ Sinv for dS in self.G.block_derivatives()]
                k_a = layout.components.index(layout.component(ROLE_A))
                k_b = layout.components.index(layout.component(ROLE_B))
                grad[p + 1 + k_a] = float(np.sum(M * derivs[0]))
                grad[p + 1 + k_b] = float(np.sum(M * derivs[1]))
                grad[-1] = float(np.sum(M * derivs[2]))

        if not np.all(np.isfinite(grad)):
            raise GradientOverflowError(f"梯度出现非有限分量: {pv}")
        return grad


def laplace_nll(pv: ParamVector, layout: DesignLayout, ds: Optional[Dataset] = None) -> float:
    """
    Laplace 近似的边际负对数似然（高斯模型下精确）
    Args:
        pv: 参数向量
        layout: 设计结构
        ds: 数据集
    Returns:
        float: l_LA
    """
    return _InnerState(pv, layout, _response(layout, ds)).nll()


def nll_gradient(pv: ParamVector, layout: DesignLayout, ds: Optional[Dataset] = None) -> np.ndarray:
    """
    laplace_nll 对无约束参数向量的解析梯度
    在 w~ 处 dh/dw = 0，所以 d l_LA = dh/d(theta) + 0.5 tr(H^-1 dH/d(theta))
    Args:
        pv: 参数向量
        layout: 设计结构
        ds: 数据集
    Returns:
        np.ndarray: 与 layout.param_names() 同序的梯度
    """
    return _InnerState(pv, layout, _response(layout, ds)).gradient()


def laplace_value_and_gradient(pv: ParamVector,
                               layout: DesignLayout,
                               ds: Optional[Dataset] = None) -> Tuple[float, np.ndarray, InnerSolution]:
    """一次分解同时得到目标函数值、梯度和内层解"""
    state = _InnerState(pv, layout, _response(layout, ds))
    return state.nll(), state.gradient(), state.solution()
