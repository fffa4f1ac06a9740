"""
子命令路由器
每个子命令模块创建一个 CommandRouter，用装饰器登记参数和处理函数
"""

import argparse
import logging
import sys
from typing import Callable, Optional, Tuple

from services.config_service import RunConfig
from services.data_service import Dataset, read_csv
from services.formula_service import ModelSpec, parse_formula
from services.optimize_service import FitOptions, FitResult

logger = logging.getLogger(__name__)

# 退出码
EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_NOT_CONVERGED = 2


class CommandRouter:
    """一个子命令：名称、帮助信息、参数定义和处理函数"""

    def __init__(self, name: str, help: str, description: str = ""):
        self.name = name
        self.help = help
        self.description = description or help
        self._arguments: Optional[Callable[[argparse.ArgumentParser], None]] = None
        self._handler: Optional[Callable[[RunConfig], int]] = None

    def arguments(self, func: Callable[[argparse.ArgumentParser], None]):
        """登记子命令专有的参数"""
        self._arguments = func
        return func

    def handler(self, func: Callable[[RunConfig], int]):
        """登记处理函数，返回退出码"""
        self._handler = func
        return func

    def register(self, subparsers) -> argparse.ArgumentParser:
        parser = subparsers.add_parser(self.name, help=self.help, description=self.description)
        add_common_arguments(parser)
        if self._arguments is not None:
            self._arguments(parser)
        parser.set_defaults(router=self)
        return parser

    def handle(self, config: RunConfig) -> int:
        return self._handler(config)


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    """所有子命令共有的参数；默认值为 None，以便区分是否给出（YAML 文件中的值在未给出时生效）"""
    parser.add_argument("--data", help="长格式 CSV 数据文件")
    parser.add_argument("--formula", help='模型公式，例如 "y ~ 1 + P + (1|A) + (1|A:P) + mp(A,P)"')
    parser.add_argument("--response", help="响应变量列名（覆盖公式左边）")
    parser.add_argument("--out", choices=["text", "json", "csv"], help="输出格式（默认 text）")
    parser.add_argument("--init", action="append", help="初值覆盖 k=v,...（mu, sigma, sigma_a, sigma_b, sigma_d, rho）")
    parser.add_argument("--seed", type=int, help="随机种子")
    parser.add_argument("--level", type=float, help="置信水平（默认 0.95）")
    parser.add_argument("--time", action="store_true", help="输出拟合耗时")
    parser.add_argument("--sort-levels", dest="sort_levels", action="store_true", help="因子水平按字典序排列")
    parser.add_argument("--combine", action="append", help="组合因子 NEW=A:B，可重复")
    parser.add_argument("--covariate", choices=["centered", "raw"], help="乘法协变量：中心化的 nu_j 或 mu_j")
    parser.add_argument("--max-iter", dest="max_iter", type=int, help="最大迭代次数")
    parser.add_argument("--grad-tol", dest="grad_tol", type=float, help="梯度停止阈值")
    parser.add_argument("--rel-tol", dest="rel_tol", type=float, help="目标函数相对变化停止阈值")
    parser.add_argument("--config", help="YAML 运行文件（命令行参数优先）")


def load_model(config: RunConfig) -> Tuple[ModelSpec, Dataset]:
    """先解析公式，再按公式引用的列读取数据"""
    ms = parse_formula(config.formula)
    if config.response and config.response != ms.response:
        ms = ms.model_copy(update={'response': config.response})
    ds = read_csv(config.data, ms.response, ms.referenced_factors(),
                  sort_levels=config.sort_levels, combine=config.combine)
    return ms, ds


def fit_options(config: RunConfig) -> FitOptions:
    return FitOptions(**config.fit_options())


def fit_exit_code(*fits: FitResult) -> int:
    return EXIT_OK if all(f.converged for f in fits) else EXIT_NOT_CONVERGED


def emit(text: str) -> None:
    """报告写到 stdout（日志走 stderr）"""
    sys.stdout.write(text)
    if not text.endswith("\n"):
        sys.stdout.write("\n")
