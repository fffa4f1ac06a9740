"""
multmixed 命令行主程序
子命令: fit, test, ci, lines, loa, simulate
"""

import argparse
import logging
import sys
from typing import List, Optional

from config import settings, setup_logging
from routers import (
    fit_router,
    test_router,
    ci_router,
    lines_router,
    loa_router,
    simulate_router
)
from routers.command_router import EXIT_INPUT_ERROR, EXIT_NOT_CONVERGED
from services.config_service import config_service
from services.errors import InputError, NumericalError

logger = logging.getLogger(__name__)

# 不属于运行配置的命令行参数
_CONTROL_KEYS = ("command", "router", "config", "log_level", "log_json")


class CliArgumentParser(argparse.ArgumentParser):
    """参数错误时以退出码 1 结束（argparse 默认为 2，与未收敛冲突）"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_INPUT_ERROR)


def create_parser() -> argparse.ArgumentParser:
    """创建命令行解析器"""
    parser = CliArgumentParser(
        prog=settings.app_name,
        description="乘法混合模型：最大似然拟合、似然比检验、轮廓置信区间与一致性界限",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.app_version}")
    parser.add_argument("--log-level", dest="log_level", help="日志级别（默认 INFO）")
    parser.add_argument("--log-json", dest="log_json", action="store_true", help="输出JSON格式日志")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=CliArgumentParser)
    subparsers.required = True
    register_routers(subparsers)
    return parser


def register_routers(subparsers) -> None:
    """注册所有子命令"""
    fit_router.router.register(subparsers)
    test_router.router.register(subparsers)
    ci_router.router.register(subparsers)
    lines_router.router.register(subparsers)
    loa_router.router.register(subparsers)
    simulate_router.router.register(subparsers)


def main(argv: Optional[List[str]] = None) -> int:
    """
    命令行入口
    Args:
        argv: 参数列表，默认 sys.argv[1:]
    Returns:
        int: 退出码（0 成功，1 输入错误，2 未收敛或数值失败）
    """
    parser = create_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level, args.log_json or None)

    flags = {k: v for k, v in vars(args).items() if k not in _CONTROL_KEYS}
    try:
        config = config_service.build_run_config(args.command, flags, args.config)
        return args.router.handle(config)
    except InputError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_INPUT_ERROR
    except NumericalError as e:
        logger.error(f"数值计算失败: {type(e).__name__}: {e}")
        sys.stderr.write(f"error: {e}\n")
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
