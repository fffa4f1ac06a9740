"""
simulate 子命令
用拟合的随机方法模型模拟两种方法在每个病人上的测量差
"""

import argparse
import logging

from services.config_service import RunConfig
from services.methodcomp_service import band_coverage, simulate_loa_study
from services.optimize_service import fit
from services.report_service import frame_csv, frame_records, frame_text, to_json
from .command_router import CommandRouter, emit, fit_exit_code, fit_options, load_model

logger = logging.getLogger(__name__)

router = CommandRouter("simulate", help="一致性界限的模拟研究")


@router.arguments
def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--reps", type=int, help="每个病人的模拟次数（默认 100）")
    parser.add_argument("--patients", type=int, help="病人数（默认 120）")
    parser.add_argument("--range", help="真值范围 lo,hi（默认 0.1,12）")
    parser.add_argument("--spacing", choices=["even", "random"], help="真值取法（默认 even）")


@router.handler
def handle(config: RunConfig) -> int:
    ms, ds = load_model(config)
    result = fit(ms, ds, opts=fit_options(config))
    table = simulate_loa_study(result, n_patients=config.patients, n_reps=config.reps,
                               value_range=config.range, seed=config.seed, spacing=config.spacing)
    logger.info(f"seed = {config.seed}")
    if config.out == "json":
        emit(to_json({
            'model': ms.to_formula(),
            'seed': config.seed,
            'coverage': {
                'additive': band_coverage(table, result, config.level, "additive"),
                'multiplicative': band_coverage(table, result, config.level, "multiplicative"),
            },
            'differences': frame_records(table),
        }))
    elif config.out == "csv":
        emit(f"# seed: {config.seed}\n" + frame_csv(table))
    else:
        emit(f"seed: {config.seed}\n" + frame_text(table))
    return fit_exit_code(result)
