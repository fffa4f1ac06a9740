"""
数据读取服务的数据模型
Dataset 构造之后不可变，可以在线程之间共享
"""
from typing import Any, Dict, List, Mapping, Sequence

import numpy as np
import pandas as pd

from services.errors import UnknownFactorError


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.ascontiguousarray(values)
    values.setflags(write=False)
    return values


class Factor:
    """
    因子列：水平索引向量 + 有序的水平标签
    """

    def __init__(self, name: str, codes: Sequence[int], levels: Sequence[str]):
        """
        初始化因子列
        Args:
            name: 因子名称
            codes: 每个观测的水平索引
            levels: 水平标签，索引 k 对应 levels[k]
        """
        self.name = name
        self.codes = _frozen(np.asarray(codes, dtype=np.int64))
        self.levels = tuple(str(level) for level in levels)
        if self.codes.size and (self.codes.min() < 0 or self.codes.max() >= len(self.levels)):
            raise ValueError(f"因子 '{name}' 的水平索引越界")

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def decode(self, codes: Sequence[int] = None) -> List[str]:
        """把水平索引还原为标签"""
        codes = self.codes if codes is None else codes
        return [self.levels[int(c)] for c in codes]

    def encode(self, labels: Sequence[str]) -> np.ndarray:
        """把标签转为水平索引"""
        lookup = {label: k for k, label in enumerate(self.levels)}
        try:
            return np.array([lookup[str(label)] for label in labels], dtype=np.int64)
        except KeyError as e:
            raise UnknownFactorError(f"{self.name}={e.args[0]}")

    def counts(self) -> np.ndarray:
        """每个水平的观测数"""
        return np.bincount(self.codes, minlength=self.n_levels)

    def __repr__(self) -> str:
        return f"Factor({self.name!r}, n_levels={self.n_levels})"


class Dataset:
    """
    长格式数据：一个数值响应 + 若干分类因子
    """

    def __init__(self,
                 response: Sequence[float],
                 factors: Mapping[str, Factor],
                 response_name: str = "y",
                 dropped: int = 0):
        """
        初始化数据集
        Args:
            response: 响应向量
            factors: 因子名称到因子列的映射
            response_name: 响应列名称
            dropped: 读取时因缺失值丢弃的行数
        """
        self.response = _frozen(np.asarray(response, dtype=float))
        self.response_name = response_name
        self.dropped = dropped
        self._factors: Dict[str, Factor] = dict(factors)
        for factor in self._factors.values():
            if factor.codes.shape[0] != self.response.shape[0]:
                raise ValueError(f"因子 '{factor.name}' 的长度与响应不一致")

    @classmethod
    def from_frame(cls,
                   frame: Any,
                   response: str,
                   factor_cols: Sequence[str],
                   sort_levels: bool = False) -> "Dataset":
        """
        从内存中的表（DataFrame 或列字典）构造数据集，不做缺失值过滤
        Args:
            frame: pandas DataFrame 或 {列名: 值列表}
            response: 响应列名称
            factor_cols: 因子列名称
            sort_levels: 是否按字典序排列水平
        Returns:
            Dataset: 数据集
        """
        frame = pd.DataFrame(frame)
        factors = {}
        for col in factor_cols:
            codes, levels = pd.factorize(frame[col].astype(str), sort=sort_levels)
            factors[col] = Factor(col, codes, list(levels))
        return cls(frame[response].to_numpy(dtype=float), factors, response_name=response)

    @property
    def n_obs(self) -> int:
        return int(self.response.shape[0])

    @property
    def factor_names(self) -> List[str]:
        return list(self._factors.keys())

    def has_factor(self, name: str) -> bool:
        return name in self._factors

    def factor(self, name: str) -> Factor:
        """按名称获取因子列"""
        if name not in self._factors:
            raise UnknownFactorError(name)
        return self._factors[name]

    def decode(self, name: str, codes: Sequence[int] = None) -> List[str]:
        """把某个因子的水平索引还原为标签"""
        return self.factor(name).decode(codes)

    def take(self, order: Sequence[int]) -> "Dataset":
        """按给定顺序重排观测（水平字典保持不变）"""
        order = np.asarray(order, dtype=np.int64)
        factors = {
            name: Factor(name, f.codes[order], f.levels)
            for name, f in self._factors.items()
        }
        return Dataset(self.response[order], factors, self.response_name, self.dropped)

    def with_response(self, response: Sequence[float]) -> "Dataset":
        """替换响应向量，因子保持不变"""
        return Dataset(response, self._factors, self.response_name, self.dropped)

    def to_dict(self) -> Dict[str, Any]:
        """转为字典格式"""
        return {
            'n_obs': self.n_obs,
            'response': self.response_name,
            'dropped': self.dropped,
            'factors': {name: list(f.levels) for name, f in self._factors.items()},
        }

    def __repr__(self) -> str:
        return f"Dataset(n_obs={self.n_obs}, factors={self.factor_names})"
