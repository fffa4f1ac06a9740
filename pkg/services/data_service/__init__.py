"""
数据读取服务
"""
from .data_models import Dataset, Factor
from .data_reader import MISSING_MARKERS, level_counts, parse_combine, read_csv

__all__ = [
    'Dataset',
    'Factor',
    'MISSING_MARKERS',
    'level_counts',
    'parse_combine',
    'read_csv',
]
