"""
fit 子命令
拟合模型并输出单元均值、随机效应众数和协方差参数
"""

from services.config_service import RunConfig
from services.optimize_service import fit
from services.report_service import fit_frame, fit_text, frame_csv, to_json
from .command_router import CommandRouter, emit, fit_exit_code, fit_options, load_model

router = CommandRouter("fit", help="最大似然拟合")


@router.handler
def handle(config: RunConfig) -> int:
    ms, ds = load_model(config)
    result = fit(ms, ds, opts=fit_options(config))
    payload = result.to_dict()
    if config.out == "json":
        emit(to_json(payload))
    elif config.out == "csv":
        emit(frame_csv(fit_frame(payload)))
    else:
        emit(fit_text(payload, show_time=config.time))
    return fit_exit_code(result)
