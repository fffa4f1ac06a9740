"""
设计服务
固定效应编码、随机效应块布局和乘法项载荷
"""
from .design_builder import (
    INTERCEPT_LEVEL,
    build_layout,
    covariate_jacobian,
    grand_mean,
    loading_row,
    mult_covariate,
    regression_lines,
)
from .design_models import (
    ROLE_A,
    ROLE_B,
    ROLE_D,
    ROLE_INTERACTION,
    ROLE_INTERCEPT,
    DesignLayout,
    ParamVector,
    VarianceComponent,
)
from .design_simulator import simulate_dataset

__all__ = [
    'INTERCEPT_LEVEL',
    'ROLE_A',
    'ROLE_B',
    'ROLE_D',
    'ROLE_INTERACTION',
    'ROLE_INTERCEPT',
    'DesignLayout',
    'ParamVector',
    'VarianceComponent',
    'build_layout',
    'covariate_jacobian',
    'grand_mean',
    'loading_row',
    'mult_covariate',
    'regression_lines',
    'simulate_dataset',
]
