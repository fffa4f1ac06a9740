"""
应用程序配置文件
所有数值默认值（容差、上限、随机种子）都集中在这里
"""

import logging
import sys
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict
from pythonjsonlogger import jsonlogger


class Settings(BaseSettings):
    """应用程序设置"""

    model_config = SettingsConfigDict(
        env_prefix="MULTMIXED_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # 应用基本配置
    app_name: str = Field(default="multmixed", description="应用名称")
    app_version: str = Field(default="1.0.0", description="应用版本")

    # 日志配置
    log_level: str = Field(default="INFO", description="日志级别")
    log_json: bool = Field(default=False, description="是否输出JSON格式日志")
    log_format: str = Field(
        default="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        description="日志格式"
    )

    # 外层优化配置
    max_iter: int = Field(default=1000, ge=1, description="最大迭代次数")
    grad_tol: float = Field(default=1e-6, gt=0, description="梯度最大范数停止阈值")
    rel_tol: float = Field(default=1e-10, gt=0, description="目标函数相对变化停止阈值")
    accept_tol: float = Field(default=1e-5, gt=0, description="判定收敛的梯度最大范数")
    polish_steps: int = Field(default=8, ge=0, description="L-BFGS-B 之后的 Newton 修正步数上限")
    polish_tol: float = Field(default=1e-10, gt=0, description="Newton 修正的梯度目标")
    variance_floor: float = Field(default=1e-6, gt=0, description="标准差下限（自然尺度）")
    rho_clamp: float = Field(default=12.0, gt=0, description="atanh(rho) 的截断值")
    sigma_b_warn: float = Field(default=1e-4, gt=0, description="sigma_b 低于该值时给出诊断")

    # 似然校验配置
    oracle_max_n: int = Field(default=2000, ge=1, description="直接边际似然允许的最大观测数")

    # 推断与模拟配置
    default_level: float = Field(default=0.95, gt=0, lt=1, description="默认置信水平")
    default_seed: int = Field(default=0, ge=0, description="默认随机种子")
    profile_max_se: float = Field(default=10.0, gt=0, description="轮廓区间搜索的最大SE倍数")
    profile_xtol: float = Field(default=1e-6, gt=0, description="轮廓区间二分法精度")


# 创建全局设置实例
settings = Settings()

_handler: Optional[logging.Handler] = None


def setup_logging(level: Optional[str] = None, json_format: Optional[bool] = None) -> None:
    """
    配置根日志记录器（重复调用时替换上一次添加的处理器）
    Args:
        level: 日志级别，默认取 settings.log_level
        json_format: 是否使用JSON格式，默认取 settings.log_json
    """
    global _handler
    level = (level or settings.log_level).upper()
    json_format = settings.log_json if json_format is None else json_format

    handler = logging.StreamHandler(sys.stderr)
    if json_format:
        handler.setFormatter(jsonlogger.JsonFormatter(
            "%(asctime)s %(name)s %(levelname)s %(message)s"
        ))
    else:
        handler.setFormatter(logging.Formatter(settings.log_format))

    root = logging.getLogger()
    if _handler is not None:
        root.removeHandler(_handler)
    root.addHandler(handler)
    root.setLevel(level)
    _handler = handler
