"""
拟合服务
初值、外层最大似然优化和零模型
"""
from .fit_models import FitOptions, FitResult
from .model_fitter import (
    INIT_KEYS,
    TERM_ALIASES,
    apply_init_overrides,
    default_init,
    fit,
    fit_reduced,
    minimize_nll,
    newton_polish,
    numerical_hessian,
    parameter_bounds,
    projected_gradient,
    reduce_spec,
    resolve_term,
    warm_start,
)

__all__ = [
    'FitOptions',
    'FitResult',
    'INIT_KEYS',
    'TERM_ALIASES',
    'apply_init_overrides',
    'default_init',
    'fit',
    'fit_reduced',
    'minimize_nll',
    'newton_polish',
    'numerical_hessian',
    'parameter_bounds',
    'projected_gradient',
    'reduce_spec',
    'resolve_term',
    'warm_start',
]
