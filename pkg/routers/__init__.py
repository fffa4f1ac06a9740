"""
路由器包初始化文件
每个子命令一个模块
"""

from . import (
    fit_router,
    test_router,
    ci_router,
    lines_router,
    loa_router,
    simulate_router
)

__all__ = [
    'fit_router',
    'test_router',
    'ci_router',
    'lines_router',
    'loa_router',
    'simulate_router'
]
