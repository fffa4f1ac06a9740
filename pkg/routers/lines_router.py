"""
lines 子命令
每个分组相对于共识的回归线（斜率 b_i + 1，截距 a_i - mu b_i），供外部作图
"""

import pandas as pd

from services.config_service import RunConfig
from services.optimize_service import fit
from services.report_service import frame_csv, frame_records, frame_text, to_json
from .command_router import CommandRouter, emit, fit_exit_code, fit_options, load_model

router = CommandRouter("lines", help="每个分组的回归线")


@router.handler
def handle(config: RunConfig) -> int:
    ms, ds = load_model(config)
    result = fit(ms, ds, opts=fit_options(config))
    frame = pd.DataFrame(result.lines(), columns=["group", "slope", "intercept"])
    if config.out == "json":
        emit(to_json({'model': ms.to_formula(), 'mu': result.mu, 'lines': frame_records(frame)}))
    elif config.out == "csv":
        emit(frame_csv(frame))
    else:
        emit(frame_text(frame))
    return fit_exit_code(result)
