"""
loa 子命令
加法与乘法模型的一致性界限，在项目效应网格上输出
"""

import argparse

from services.config_service import RunConfig
from services.methodcomp_service import loa_additive, loa_grid, to_random_methods
from services.optimize_service import fit
from services.report_service import frame_csv, frame_records, frame_text, to_json
from .command_router import CommandRouter, emit, fit_exit_code, fit_options, load_model

router = CommandRouter("loa", help="一致性界限")


@router.arguments
def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--grid", type=int, help="网格点数（默认 200）")


@router.handler
def handle(config: RunConfig) -> int:
    ms, ds = load_model(config)
    result = fit(ms, ds, opts=fit_options(config))
    frame = loa_grid(result, n=config.grid, level=config.level)
    if config.out == "json":
        payload = {
            'model': ms.to_formula(),
            'level': config.level,
            'additive': loa_additive(result, config.level).to_dict(),
            'random_methods': to_random_methods(result).to_dict() if result.layout.has_mult else None,
            'grid': frame_records(frame),
        }
        emit(to_json(payload))
    elif config.out == "csv":
        emit(frame_csv(frame))
    else:
        emit(frame_text(frame))
    return fit_exit_code(result)
