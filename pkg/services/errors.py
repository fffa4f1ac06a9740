"""
统一的异常定义
InputError 对应命令行退出码 1，NumericalError 表示数值退化
"""

from typing import Optional


class MultMixedError(Exception):
    """所有库异常的基类"""


class InputError(MultMixedError):
    """数据、公式或配置错误"""


class NumericalError(MultMixedError):
    """数值计算失败"""


# ===== 数据读取 =====

class MissingColumnError(InputError):
    """CSV中缺少指定的列"""

    def __init__(self, column: str):
        self.column = column
        super().__init__(f"缺少列: '{column}'")


class DataFileError(InputError):
    """数据文件不存在或无法读取"""


class EmptyDataError(InputError):
    """过滤缺失值之后没有可用的行"""


class DataParseError(InputError):
    """数值列无法解析"""

    def __init__(self, column: str, row: int, value: str):
        self.column = column
        self.row = row
        self.value = value
        super().__init__(f"第 {row} 行的列 '{column}' 无法解析为数值: '{value}'")


class UnknownFactorError(InputError):
    """数据集中没有该因子"""

    def __init__(self, factor: str):
        self.factor = factor
        super().__init__(f"未知因子: '{factor}'")


# ===== 公式 =====

class FormulaSyntaxError(InputError):
    """公式语法错误，带字节偏移"""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"公式语法错误 (offset {offset}): {message}")


class FormulaSemanticError(InputError):
    """公式语义错误"""


class UnsupportedModelError(InputError):
    """超出支持范围的模型"""


class UnknownColumnError(InputError):
    """公式引用了数据中不存在的列"""

    def __init__(self, column: str):
        self.column = column
        super().__init__(f"公式引用了未知列: '{column}'")


class DegenerateFactorError(InputError):
    """因子只有一个水平"""

    def __init__(self, factor: str, n_levels: int):
        self.factor = factor
        self.n_levels = n_levels
        super().__init__(f"因子 '{factor}' 只有 {n_levels} 个水平，至少需要 2 个")


class TermNotInModelError(InputError):
    """要删除的项不在模型中"""


class ConfigError(InputError):
    """运行配置错误"""


# ===== 数值 =====

class ParameterOverflowError(NumericalError):
    """联合似然出现非有限值"""


class IndefiniteCurvatureError(NumericalError):
    """随机效应曲率矩阵不是正定的"""


class CovarianceDegenerateError(NumericalError):
    """边际协方差矩阵V不是正定的"""


class OracleSizeError(NumericalError):
    """观测数超过直接边际似然的上限"""

    def __init__(self, n_obs: int, cap: int):
        self.n_obs = n_obs
        self.cap = cap
        super().__init__(f"直接边际似然只支持 n <= {cap}，当前 n = {n_obs}")


class GradientOverflowError(NumericalError):
    """梯度出现非有限分量"""


class BadStartError(NumericalError):
    """初始点的目标函数不是有限值"""


class NestingViolationError(NumericalError):
    """零模型的似然优于全模型，嵌套关系不成立"""


class InsufficientDfError(InputError):
    """自由度不足"""


class ReplicatesRequiredError(InputError):
    """MAM 需要重复测量"""


class CovarianceInconsistencyError(NumericalError):
    """协方差参数不一致（方差为负）"""


class ParameterError(InputError):
    """参数取值非法"""

    def __init__(self, message: str, name: Optional[str] = None):
        self.name = name
        super().__init__(message)
