"""
长格式CSV读取与因子编码
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from services.errors import ConfigError, DataFileError, DataParseError, EmptyDataError, MissingColumnError
from .data_models import Dataset, Factor

logger = logging.getLogger(__name__)

# 空字符串和 "NA" 视为缺失
MISSING_MARKERS = ("", "NA")


def read_csv(path: Union[str, Path],
             response: str,
             factor_cols: Sequence[str],
             sort_levels: bool = False,
             combine: Optional[Dict[str, Sequence[str]]] = None) -> Dataset:
    """
    读取长格式CSV文件
    Args:
        path: 文件路径
        response: 响应列名称
        factor_cols: 因子列名称（可以包含 combine 生成的新因子）
        sort_levels: True 时按字典序排列水平，否则按首次出现顺序
        combine: 新因子名称 -> 待拼接的源列（标签用 ":" 连接）
    Returns:
        Dataset: 编码后的数据集
    """
    path = Path(path)
    if not path.is_file():
        raise DataFileError(f"数据文件不存在: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DataFileError(f"数据文件 {path} 无法读取: {e}")
    frame.columns = [str(c).strip() for c in frame.columns]

    combine = dict(combine or {})
    needed = [response] + [c for c in factor_cols if c not in combine]
    for sources in combine.values():
        needed.extend(sources)
    for col in needed:
        if col not in frame.columns:
            raise MissingColumnError(col)

    # 文件中的行号（表头是第1行）
    frame["__row__"] = np.arange(2, len(frame) + 2)
    for col in needed:
        frame[col] = frame[col].str.strip()

    for name, sources in combine.items():
        parts = frame[list(sources)]
        missing = parts.isin(MISSING_MARKERS).any(axis=1)
        frame[name] = parts.agg(":".join, axis=1).where(~missing, "")

    used = [response] + list(factor_cols)
    keep = ~frame[used].isin(MISSING_MARKERS).any(axis=1)
    dropped = int((~keep).sum())
    frame = frame.loc[keep]
    if dropped:
        logger.info(f"丢弃 {dropped} 行含缺失值的数据 ({path.name})")
    if frame.empty:
        raise EmptyDataError(f"文件 {path} 在过滤缺失值之后没有可用的行")

    values = pd.to_numeric(frame[response], errors="coerce").to_numpy(dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        first = frame.loc[bad].iloc[0]
        raise DataParseError(response, int(first["__row__"]), first[response])

    factors = {}
    for col in factor_cols:
        codes, levels = pd.factorize(frame[col], sort=sort_levels)
        factors[col] = Factor(col, codes, list(levels))

    dataset = Dataset(values, factors, response_name=response, dropped=dropped)
    logger.info(f"读取数据 {path.name}: n_obs={dataset.n_obs}, 丢弃={dropped}")
    return dataset


def level_counts(ds: Dataset, factor: str) -> int:
    """
    因子的观测水平数
    Args:
        ds: 数据集
        factor: 因子名称
    Returns:
        int: 出现过的不同水平数
    """
    return int(np.count_nonzero(ds.factor(factor).counts()))


def parse_combine(specs: Sequence[str]) -> Dict[str, List[str]]:
    """
    解析命令行的组合因子写法 NEW=A:B
    Args:
        specs: 形如 "Product=TVset:Picture" 的字符串列表
    Returns:
        Dict[str, List[str]]: 新因子到源列的映射
    """
    result = {}
    for spec in specs or []:
        name, _, sources = spec.partition("=")
        columns = [s.strip() for s in sources.split(":") if s.strip()]
        if not name.strip() or len(columns) < 2:
            raise ConfigError(f"组合因子写法错误: '{spec}'，应为 NEW=A:B")
        result[name.strip()] = columns
    return result
