"""
输出服务
文本表格、JSON 和 CSV
"""
from .report_renderer import (
    TEXT_DECIMALS,
    ci_frame,
    ci_text,
    fit_frame,
    fit_text,
    format_number,
    format_p,
    frame_csv,
    frame_records,
    frame_text,
    tests_frame,
    tests_text,
    text_table,
    to_json,
)

__all__ = [
    'TEXT_DECIMALS',
    'ci_frame',
    'ci_text',
    'fit_frame',
    'fit_text',
    'format_number',
    'format_p',
    'frame_csv',
    'frame_records',
    'frame_text',
    'tests_frame',
    'tests_text',
    'text_table',
    'to_json',
]
