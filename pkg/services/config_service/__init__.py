"""
配置服务模块
提供运行配置的读取、解析与合并
"""

from .config_models import Command, OutputFormat, RunConfig
from .config_service import ConfigService, config_service, parse_init, parse_pair

__all__ = [
    'Command',
    'ConfigService',
    'OutputFormat',
    'RunConfig',
    'config_service',
    'parse_init',
    'parse_pair',
]
