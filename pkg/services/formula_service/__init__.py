"""
模型公式服务
lmer 风格的公式，外加乘法项 mp(随机因子, 固定因子)
"""
from .formula_models import ModelBinding, ModelSpec
from .formula_parser import parse_formula, tokenize, validate_against

__all__ = [
    'ModelBinding',
    'ModelSpec',
    'parse_formula',
    'tokenize',
    'validate_against',
]
