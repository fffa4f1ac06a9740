"""
运行配置的数据模型
定义命令行各子命令的配置结构和验证规则
"""

from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config import settings


class Command(str, Enum):
    """子命令"""
    FIT = "fit"
    TEST = "test"
    CI = "ci"
    LINES = "lines"
    LOA = "loa"
    SIMULATE = "simulate"


class OutputFormat(str, Enum):
    """输出格式"""
    TEXT = "text"
    JSON = "json"
    CSV = "csv"


class RunConfig(BaseModel):
    """一次命令行运行的完整配置（YAML 文件与命令行参数合并后的结果）"""

    model_config = ConfigDict(extra="forbid", use_enum_values=True, validate_default=True)

    command: Command = Field(..., description="子命令")
    data: str = Field(..., min_length=1, description="CSV 数据文件")
    formula: str = Field(..., min_length=1, description="模型公式")
    response: Optional[str] = Field(default=None, description="响应变量列名（覆盖公式左边）")
    out: OutputFormat = Field(default=OutputFormat.TEXT.value, description="输出格式")
    init: Dict[str, float] = Field(default_factory=dict, description="初值覆盖")
    seed: int = Field(default_factory=lambda: settings.default_seed, ge=0, description="随机种子")
    level: float = Field(default_factory=lambda: settings.default_level, gt=0, lt=1, description="置信水平")
    time: bool = Field(default=False, description="输出拟合耗时")
    sort_levels: bool = Field(default=False, description="因子水平按字母排序（默认按首次出现）")
    combine: Dict[str, List[str]] = Field(default_factory=dict, description="组合因子 NEW -> [A, B]")
    covariate: str = Field(default="centered", pattern="^(centered|raw)$", description="乘法协变量")

    # 优化
    max_iter: int = Field(default_factory=lambda: settings.max_iter, ge=1, description="最大迭代次数")
    grad_tol: float = Field(default_factory=lambda: settings.grad_tol, gt=0, description="梯度停止阈值")
    rel_tol: float = Field(default_factory=lambda: settings.rel_tol, gt=0, description="相对变化停止阈值")

    # 检验与区间
    method: str = Field(default="fractional", pattern="^(fractional|mixture)$", description="p 值方法")
    contrast: Optional[Tuple[str, str]] = Field(default=None, description="对比的两个水平")

    # 一致性界限与模拟
    grid: int = Field(default=200, ge=2, description="一致性界限网格点数")
    reps: int = Field(default=100, ge=1, le=1_000_000, description="每个病人的模拟次数")
    patients: int = Field(default=120, ge=1, le=1_000_000, description="病人数")
    range: Tuple[float, float] = Field(default=(0.1, 12.0), description="真值范围")
    spacing: str = Field(default="even", pattern="^(even|random)$", description="真值取法")

    @field_validator("combine")
    @classmethod
    def _check_combine(cls, value: Dict[str, List[str]]) -> Dict[str, List[str]]:
        for name, cols in value.items():
            if len(cols) < 2:
                raise ValueError(f"组合因子 {name} 至少需要两列")
        return value

    @model_validator(mode="after")
    def _check_range(self) -> "RunConfig":
        lo, hi = self.range
        if not lo < hi:
            raise ValueError(f"range 必须满足 lo < hi，实际为 {self.range}")
        return self

    def fit_options(self) -> Dict[str, object]:
        """拟合选项（FitOptions 的字段）"""
        return {
            'max_iter': self.max_iter,
            'grad_tol': self.grad_tol,
            'rel_tol': self.rel_tol,
            'init': dict(self.init),
            'centered': self.covariate == "centered",
        }
