"""
推断服务
似然比检验、轮廓似然区间、对比方差和 MAM F 检验
"""
from .contrast_variance import (
    contrast_variance_mam,
    contrast_variance_mmm,
    observed_information,
    pairwise_contrast,
    replicate_count,
    wald_se,
)
from .inference_models import AnovaRow, FTestResult, LrtResult, MamSummary, ProfileCi
from .lrt_tests import (
    EFFECT_NAMES,
    P_VALUE_METHODS,
    available_terms,
    chi2_survival,
    compare_p_values,
    lrt,
    lrt_table,
    term_df,
)
from .mam_anova import anova_ftest, ftest_table, mam_fit, mam_ftest, scaling_ftest
from .profile_ci import ContrastProfile, profile_ci

__all__ = [
    'AnovaRow',
    'ContrastProfile',
    'EFFECT_NAMES',
    'FTestResult',
    'LrtResult',
    'MamSummary',
    'P_VALUE_METHODS',
    'ProfileCi',
    'anova_ftest',
    'available_terms',
    'chi2_survival',
    'compare_p_values',
    'contrast_variance_mam',
    'contrast_variance_mmm',
    'ftest_table',
    'lrt',
    'lrt_table',
    'mam_fit',
    'mam_ftest',
    'observed_information',
    'pairwise_contrast',
    'profile_ci',
    'replicate_count',
    'scaling_ftest',
    'term_df',
    'wald_se',
]
