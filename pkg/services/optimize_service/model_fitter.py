"""
外层最大似然优化
在无约束参数 (beta, log sigma, log sd, atanh rho) 上用 L-BFGS-B 最小化 Laplace 目标函数
"""
import logging
import math
import time
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg, optimize

from config import settings
from services.data_service import Dataset
from services.design_service import (
    ROLE_A,
    ROLE_B,
    ROLE_D,
    DesignLayout,
    ParamVector,
    build_layout,
)
from services.errors import (
    BadStartError,
    ConfigError,
    NumericalError,
    TermNotInModelError,
)
from services.formula_service import ModelSpec
from services.likelihood_service import laplace_value_and_gradient
from .fit_models import FitOptions, FitResult

logger = logging.getLogger(__name__)

SD_FLOOR_INIT = 1e-3
SIGMA_B_INIT = 0.1

INIT_KEYS = ("mu", "sigma", "sigma_a", "sigma_b", "sigma_d", "rho")

# 检验项的键及别名
TERM_ALIASES = {
    "d": "d", "disagreement": "d", "interaction": "d",
    "b": "b", "scaling": "b", "sensitivity": "b",
    "a": "a", "assessor": "a", "genotype": "a", "method": "a",
    "nu": "nu", "product": "nu", "environment": "nu", "item": "nu",
}


def default_init(ms: ModelSpec,
                 ds: Dataset,
                 centered: bool = True,
                 layout: Optional[DesignLayout] = None) -> ParamVector:
    """
    默认初值
    beta 取观测单元均值；sigma 取相对单元均值的残差标准差；sigma_a 取残差分组均值的标准差；
    sigma_b = 0.1；其余方差分量取 sigma/2；rho = 0
    Args:
        ms: 模型结构
        ds: 数据集
        centered: 乘法协变量是否中心化
        layout: 已构建的设计结构（可选）
    Returns:
        ParamVector: 初值
    """
    layout = layout or build_layout(ms, ds, centered)
    y, codes, p = layout.y, layout.fixed_codes, layout.p

    counts = np.bincount(codes, minlength=p)
    sums = np.bincount(codes, weights=y, minlength=p)
    overall = float(np.mean(y))
    beta = np.where(counts > 0, sums / np.maximum(counts, 1), overall)

    resid = y - beta[codes]
    dof = max(layout.n_obs - 1, 1)
    sigma = max(math.sqrt(float(resid @ resid) / dof), SD_FLOOR_INIT)

    sigma_a = SD_FLOOR_INIT
    group_comp = layout.component(ROLE_A)
    if group_comp is None:
        group_comp = next((c for c in layout.components if c.role not in (ROLE_B, ROLE_D)
                           and len(c.factors) == 1), None)
    if group_comp is not None:
        cols = group_comp.obs_columns
        n_cols = layout.q
        g_counts = np.bincount(cols, minlength=n_cols)[group_comp.level_columns]
        g_sums = np.bincount(cols, weights=resid, minlength=n_cols)[group_comp.level_columns]
        g_means = g_sums / np.maximum(g_counts, 1)
        if g_means.shape[0] > 1:
            sigma_a = max(float(np.std(g_means, ddof=1)), SD_FLOOR_INIT)

    log_sds = {}
    for comp in layout.components:
        if comp is group_comp:
            value = sigma_a
        elif comp.role == ROLE_B:
            value = SIGMA_B_INIT
        else:
            value = max(sigma / 2.0, SD_FLOOR_INIT)
        log_sds[comp.label] = math.log(value)
    z_rho = 0.0 if layout.has_rho else None
    return ParamVector(beta, math.log(sigma), log_sds, z_rho)


def apply_init_overrides(pv: ParamVector, layout: DesignLayout, overrides: Dict[str, float]) -> ParamVector:
    """
    按用户给定的初值覆盖默认初值
    Args:
        pv: 默认初值
        layout: 设计结构
        overrides: mu/sigma/sigma_a/sigma_b/sigma_d/rho -> 值；mu 将所有单元均值设为同一值
    Returns:
        ParamVector: 新的初值
    """
    pv = pv.copy()
    roles = {"sigma_a": ROLE_A, "sigma_b": ROLE_B, "sigma_d": ROLE_D}
    for key, value in (overrides or {}).items():
        if key not in INIT_KEYS:
            raise ConfigError(f"未知的初值参数 '{key}'，可选: {', '.join(INIT_KEYS)}")
        value = float(value)
        if key == "mu":
            pv.beta[:] = value
        elif key == "rho":
            if abs(value) >= 1:
                raise ConfigError(f"rho 的初值必须满足 |rho| < 1，实际为 {value}")
            if layout.has_rho:
                pv.z_rho = math.atanh(value)
        else:
            if value <= 0:
                raise ConfigError(f"{key} 的初值必须为正，实际为 {value}")
            if key == "sigma":
                pv.log_sigma = math.log(value)
                continue
            comp = layout.component(roles[key])
            if comp is None:
                logger.debug(f"模型中没有 {key}，忽略其初值")
                continue
            pv.log_sds[comp.label] = math.log(value)
    return pv


def parameter_bounds(layout: DesignLayout) -> List[Tuple[Optional[float], Optional[float]]]:
    """L-BFGS-B 的边界：对数标准差有下限，atanh(rho) 截断"""
    floor = math.log(settings.variance_floor)
    bounds = [(None, None)] * layout.p
    bounds.append((floor, None))
    bounds.extend([(floor, None)] * len(layout.components))
    if layout.has_rho:
        bounds.append((-settings.rho_clamp, settings.rho_clamp))
    return bounds


def projected_gradient(x: np.ndarray, grad: np.ndarray, bounds) -> np.ndarray:
    """边界上指向可行域外的梯度分量置0"""
    pg = np.array(grad, dtype=float)
    for k, (lo, hi) in enumerate(bounds):
        if lo is not None and x[k] <= lo + 1e-12 and pg[k] > 0:
            pg[k] = 0.0
        if hi is not None and x[k] >= hi - 1e-12 and pg[k] < 0:
            pg[k] = 0.0
    return pg


def _clip(x: np.ndarray, bounds) -> np.ndarray:
    return np.array([
        min(max(v, lo if lo is not None else v), hi if hi is not None else v)
        for v, (lo, hi) in zip(x, bounds)
    ])


def numerical_hessian(gradient, x: np.ndarray, free: Optional[np.ndarray] = None,
                      step: float = 1e-5) -> np.ndarray:
    """
    解析梯度的中心差分 Hessian，只对 free 中的坐标求导
    Args:
        gradient: x -> 梯度 的可调用对象
        x: 求导点
        free: 参与求导的坐标（默认全部）
        step: 相对步长
    Returns:
        np.ndarray: len(free) x len(free) 的对称矩阵
    """
    x = np.asarray(x, dtype=float)
    free = np.arange(x.shape[0]) if free is None else np.asarray(free, dtype=int)
    hess = np.zeros((free.shape[0], free.shape[0]))
    for col, k in enumerate(free):
        h = step * max(1.0, abs(x[k]))
        up, down = x.copy(), x.copy()
        up[k] += h
        down[k] -= h
        hess[:, col] = (np.asarray(gradient(up))[free] - np.asarray(gradient(down))[free]) / (2.0 * h)
    return 0.5 * (hess + hess.T)


def newton_polish(objective, x: np.ndarray, bounds, max_steps: int,
                  tol: float) -> Tuple[np.ndarray, int]:
    """
    在 L-BFGS-B 的终点上做带阻尼和回溯的 Newton 修正
    活动边界上的坐标保持不动。只接受目标值不升且投影梯度下降的步。
    Args:
        objective: 返回 (值, 梯度) 的可调用对象
        x: 起点
        bounds: 变量边界
        max_steps: 最多修正步数
        tol: 投影梯度最大范数达到该值即停止
    Returns:
        Tuple[np.ndarray, int]: (修正后的点, 接受的步数)
    """
    x = np.array(x, dtype=float)
    value, grad = objective(x)
    pg = projected_gradient(x, grad, bounds)
    taken = 0
    for _ in range(max_steps):
        pg_norm = float(np.max(np.abs(pg))) if pg.size else 0.0
        if pg_norm < tol:
            break
        free = np.array([k for k in range(x.shape[0]) if pg[k] != 0.0 or grad[k] == 0.0])
        if free.size == 0:
            break
        hess = numerical_hessian(lambda z: objective(z)[1], x, free)
        if not np.all(np.isfinite(hess)):
            break
        lam, direction = 0.0, None
        scale = max(float(np.max(np.abs(np.diag(hess)))), 1e-8)
        while lam < 1e8 * scale:
            try:
                factor = linalg.cho_factor(hess + lam * np.eye(free.size))
                direction = -linalg.cho_solve(factor, grad[free])
                break
            except linalg.LinAlgError:
                lam = max(2.0 * lam, 1e-8 * scale)
        if direction is None:
            break

        accepted = False
        t = 1.0
        while t > 1e-4:
            trial = x.copy()
            trial[free] += t * direction
            trial = _clip(trial, bounds)
            t_value, t_grad = objective(trial)
            t_pg = projected_gradient(trial, t_grad, bounds)
            slack = 1e-12 * max(1.0, abs(value))
            if t_value <= value + slack and float(np.max(np.abs(t_pg))) < pg_norm:
                x, value, grad, pg = trial, t_value, t_grad, t_pg
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        taken += 1
    logger.debug(f"Newton 修正 {taken} 步，投影梯度 {float(np.max(np.abs(pg))) if pg.size else 0.0:.2e}")
    return x, taken


class _Objective:
    """记录评估次数和最好的点，供 scipy 调用"""

    def __init__(self, layout: DesignLayout, ds: Optional[Dataset]):
        self.layout = layout
        self.ds = ds
        self.n_eval = 0
        self.best_value = math.inf
        self.best_x = None

    def __call__(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        self.n_eval += 1
        pv = ParamVector.from_array(self.layout, x)
        try:
            value, grad, _ = laplace_value_and_gradient(pv, self.layout, self.ds)
        except NumericalError as e:
            logger.debug(f"目标函数评估失败，按惩罚值处理: {e}")
            penalty = (self.best_value if math.isfinite(self.best_value) else 0.0) + 1e10
            return penalty, np.zeros_like(x)
        if value < self.best_value:
            self.best_value = value
            self.best_x = np.array(x, dtype=float)
        logger.debug(f"第 {self.n_eval} 次评估: nll={value:.10f}")
        return value, grad


def minimize_nll(layout: DesignLayout,
                 x0: np.ndarray,
                 opts: FitOptions,
                 objective=None,
                 bounds=None) -> optimize.OptimizeResult:
    """
    对给定目标函数运行 L-BFGS-B
    Args:
        layout: 设计结构
        x0: 初始点
        opts: 优化选项
        objective: 返回 (值, 梯度) 的可调用对象，默认为 Laplace 目标函数
        bounds: 变量边界，默认 parameter_bounds(layout)
    Returns:
        optimize.OptimizeResult: scipy 的优化结果
    """
    objective = objective or _Objective(layout, None)
    bounds = bounds if bounds is not None else parameter_bounds(layout)
    return optimize.minimize(
        objective,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={
            "maxiter": opts.max_iter,
            "maxfun": 20 * opts.max_iter,
            "gtol": opts.grad_tol,
            "ftol": opts.rel_tol,
        },
    )


def _diagnostics(pv: ParamVector, layout: DesignLayout) -> List[str]:
    messages = []
    floor = math.log(settings.variance_floor)
    for comp in layout.components:
        if pv.log_sds[comp.label] <= floor + 1e-8:
            messages.append(f"{comp.natural_name} ({comp.label}) 停在下限 {settings.variance_floor:g}")
    if layout.has_rho and abs(pv.z_rho) >= settings.rho_clamp - 1e-8:
        messages.append(f"rho 到达边界 ({pv.rho:+.6f})，相关系数按 ±1 报告")
    sigma_b = pv.sd_by_role(layout, ROLE_B)
    if layout.has_mult and sigma_b < settings.sigma_b_warn:
        messages.append(f"sigma_b = {sigma_b:.2e} 很小，可以考虑不含乘法项的模型")
    return messages


def fit(ms: ModelSpec,
        ds: Dataset,
        init: Optional[ParamVector] = None,
        opts: Optional[FitOptions] = None) -> FitResult:
    """
    最大似然拟合
    Args:
        ms: 模型结构
        ds: 数据集
        init: 初值，默认 default_init
        opts: 优化选项
    Returns:
        FitResult: 拟合结果；不收敛时 converged=False 而不是抛出异常
    """
    opts = opts or FitOptions()
    started = time.perf_counter()
    layout = build_layout(ms, ds, opts.centered)
    if init is None:
        init = default_init(ms, ds, opts.centered, layout)
    init = apply_init_overrides(init, layout, opts.init)
    if not init.is_finite():
        raise BadStartError(f"初值含有非有限值: {init}")

    bounds = parameter_bounds(layout)
    x0 = _clip(init.to_array(layout), bounds)
    objective = _Objective(layout, ds)
    try:
        value0, _, _ = laplace_value_and_gradient(ParamVector.from_array(layout, x0), layout, ds)
    except NumericalError as e:
        raise BadStartError(f"初值处目标函数无法计算: {e}")
    if not math.isfinite(value0):
        raise BadStartError("初值处目标函数不是有限值")

    logger.info(f"开始拟合 {ms.to_formula()} (n={layout.n_obs}, p={layout.p}, q={layout.q})")
    res = minimize_nll(layout, x0, opts, objective, bounds)

    x = np.asarray(res.x, dtype=float)
    if objective.best_x is not None and objective.best_value < res.fun - 1e-12:
        x = objective.best_x
    polished = 0
    if res.status != 1 and opts.polish_steps > 0:
        x, polished = newton_polish(objective, x, bounds, opts.polish_steps, settings.polish_tol)
    pv = ParamVector.from_array(layout, x)
    nll, grad, inner = laplace_value_and_gradient(pv, layout, ds)
    grad_norm = float(np.max(np.abs(projected_gradient(x, grad, bounds)))) if grad.size else 0.0
    converged = res.status != 1 and grad_norm < opts.accept_tol

    warnings = _diagnostics(pv, layout)
    if not converged:
        warnings.append(f"未收敛: {res.message} (梯度范数 {grad_norm:.2e})")
    for message in warnings:
        logger.warning(message)

    elapsed = time.perf_counter() - started
    logger.info(f"拟合完成: nll={nll:.6f}, 迭代 {res.nit} 次 (Newton {polished} 步), 收敛={converged}, 耗时 {elapsed:.3f}s")
    return FitResult(
        params=pv,
        nll=nll,
        inner=inner,
        n_iter=int(res.nit) + polished,
        grad_norm=grad_norm,
        converged=converged,
        model=ms,
        layout=layout,
        dataset=ds,
        warnings=warnings,
        elapsed=elapsed,
        message=str(res.message),
    )


def resolve_term(term: str) -> str:
    """把检验项名称（含别名）映射到 d/b/a/nu"""
    key = TERM_ALIASES.get(str(term).strip().lower())
    if key is None:
        raise TermNotInModelError(f"未知的检验项 '{term}'，可选: {', '.join(sorted(TERM_ALIASES))}")
    return key


def reduce_spec(ms: ModelSpec, term: str) -> ModelSpec:
    """
    去掉一个模型项后的零模型
    d: 去掉分歧交互；b: 去掉乘法项（同时去掉 rho）；a: 去掉随机截距（同时去掉 rho）；
    nu: 去掉固定因子及乘法项
    Args:
        ms: 完整模型
        term: 检验项
    Returns:
        ModelSpec: 零模型
    """
    key = resolve_term(term)
    if key == "d":
        pair = ms.disagreement_term
        if pair is None:
            raise TermNotInModelError("模型中没有与乘法项对应的随机交互项 d")
        return ms.model_copy(update={
            'random_interactions': tuple(p for p in ms.random_interactions if p != pair)
        })
    if key == "b":
        if ms.mult_term is None:
            raise TermNotInModelError("模型中没有乘法项 mp(...)")
        return ms.model_copy(update={'mult_term': None})
    if key == "a":
        group = ms.random_factor or (ms.random_intercepts[0] if len(ms.random_intercepts) == 1 else None)
        if group is None or group not in ms.random_intercepts:
            raise TermNotInModelError("模型中没有可检验的随机截距 a")
        return ms.model_copy(update={
            'random_intercepts': tuple(g for g in ms.random_intercepts if g != group)
        })
    if ms.fixed_factor is None:
        raise TermNotInModelError("模型中没有固定因子")
    return ms.model_copy(update={'fixed_factors': (), 'mult_term': None})


def warm_start(full: FitResult, layout: DesignLayout) -> ParamVector:
    """用完整模型的估计作为零模型的初值（同名分量沿用，其余取默认）"""
    pv = default_init(layout.spec, full.dataset, layout.centered, layout)
    if layout.p == full.layout.p:
        pv.beta = full.params.beta.copy()
    pv.log_sigma = full.params.log_sigma
    for comp in layout.components:
        if comp.label in full.params.log_sds:
            pv.log_sds[comp.label] = full.params.log_sds[comp.label]
    if layout.has_rho and full.layout.has_rho:
        pv.z_rho = full.params.z_rho
    return pv


def fit_reduced(ms: ModelSpec,
                ds: Dataset,
                drop: Optional[str] = None,
                opts: Optional[FitOptions] = None,
                full: Optional[FitResult] = None) -> FitResult:
    """
    拟合去掉一个模型项的零模型
    Args:
        ms: 完整模型
        ds: 数据集
        drop: 检验项（d/b/a/nu 或别名），为空时拟合完整模型
        opts: 优化选项
        full: 完整模型的拟合结果，给定时用于热启动
    Returns:
        FitResult: 零模型的拟合结果
    """
    opts = opts or FitOptions()
    if not drop:
        return fit(ms, ds, opts=opts)
    reduced = reduce_spec(ms, drop)
    logger.info(f"零模型 (去掉 {resolve_term(drop)}): {reduced.to_formula()}")
    init = None
    if full is not None:
        init = warm_start(full, build_layout(reduced, ds, opts.centered))
    return fit(reduced, ds, init=init, opts=opts.model_copy(update={'init': {}}) if init is not None else opts)
