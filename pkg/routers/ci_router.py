"""
ci 子命令
两个固定因子水平之差的轮廓似然置信区间（同时给出 Wald 区间）
"""

import argparse

from services.config_service import RunConfig
from services.inference_service import pairwise_contrast, profile_ci
from services.optimize_service import fit
from services.report_service import ci_frame, ci_text, frame_csv, to_json
from .command_router import CommandRouter, emit, fit_exit_code, fit_options, load_model

router = CommandRouter("ci", help="对比的轮廓似然置信区间")


@router.arguments
def add_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--contrast", help="LEVEL1,LEVEL2（默认：估计最大与最小的单元均值）")


@router.handler
def handle(config: RunConfig) -> int:
    ms, ds = load_model(config)
    opts = fit_options(config)
    result = fit(ms, ds, opts=opts)
    if config.contrast is None:
        contrast, label = pairwise_contrast(result.layout, beta=result.params.beta)
    else:
        contrast, label = pairwise_contrast(result.layout, *config.contrast)
    ci = profile_ci(ms, ds, fit=result, contrast=contrast, level=config.level, opts=opts)
    ci.label = label

    payload = {'model': ms.to_formula(), 'nll': result.nll, 'converged': result.converged, 'ci': ci.to_dict()}
    if config.out == "json":
        emit(to_json(payload))
    elif config.out == "csv":
        emit(frame_csv(ci_frame(payload)))
    else:
        emit(ci_text(payload))
    return fit_exit_code(result)
