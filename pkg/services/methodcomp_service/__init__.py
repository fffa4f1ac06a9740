"""
方法比较服务
随机方法参数化、一致性界限和模拟研究
"""
from .limits_of_agreement import (
    LOA_COLUMNS,
    components_of,
    item_effects,
    loa_additive,
    loa_grid,
    loa_multiplicative,
    normal_quantile,
    to_random_methods,
)
from .loa_simulation import (
    DEFAULT_PATIENTS,
    DEFAULT_RANGE,
    DEFAULT_REPS,
    SIMULATION_COLUMNS,
    SPACINGS,
    band_coverage,
    method_cholesky,
    random_methods_components,
    simulate_loa_study,
    true_values,
)
from .methodcomp_models import ADDITIVE, MULTIPLICATIVE, LoaInterval, RandomMethodsParams, VarianceComponents

__all__ = [
    'ADDITIVE',
    'DEFAULT_PATIENTS',
    'DEFAULT_RANGE',
    'DEFAULT_REPS',
    'LOA_COLUMNS',
    'LoaInterval',
    'MULTIPLICATIVE',
    'RandomMethodsParams',
    'SIMULATION_COLUMNS',
    'SPACINGS',
    'VarianceComponents',
    'band_coverage',
    'components_of',
    'item_effects',
    'loa_additive',
    'loa_grid',
    'loa_multiplicative',
    'method_cholesky',
    'normal_quantile',
    'random_methods_components',
    'simulate_loa_study',
    'to_random_methods',
]
