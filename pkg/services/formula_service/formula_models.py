"""
模型公式服务的数据模型
"""
from typing import Any, Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from services.data_service import Dataset, Factor


class ModelSpec(BaseModel):
    """解析后的模型公式"""

    model_config = ConfigDict(frozen=True)

    response: str = Field(..., description="响应变量")
    fixed_factors: Tuple[str, ...] = Field(default=(), description="均值结构中的固定因子")
    random_intercepts: Tuple[str, ...] = Field(default=(), description="随机截距的分组因子")
    random_interactions: Tuple[Tuple[str, str], ...] = Field(default=(), description="随机交互项")
    mult_term: Optional[Tuple[str, str]] = Field(default=None, description="乘法项 (随机因子, 固定因子)")
    has_intercept: bool = Field(default=True, description="是否含总均值")

    @property
    def fixed_factor(self) -> Optional[str]:
        """均值结构中的固定因子（最多一个）"""
        return self.fixed_factors[0] if self.fixed_factors else None

    @property
    def random_factor(self) -> Optional[str]:
        """乘法项中的随机因子"""
        return self.mult_term[0] if self.mult_term else None

    @property
    def disagreement_term(self) -> Optional[Tuple[str, str]]:
        """与乘法项对应的随机交互项 d_ij（如果存在）"""
        if self.mult_term is None:
            return None
        for pair in self.random_interactions:
            if set(pair) == set(self.mult_term):
                return pair
        return None

    @property
    def has_scaling_intercept(self) -> bool:
        """乘法项的随机因子是否同时有随机截距 a_i"""
        return self.mult_term is not None and self.mult_term[0] in self.random_intercepts

    def referenced_factors(self) -> Tuple[str, ...]:
        """公式引用的全部因子（去重，保持顺序）"""
        names = list(self.fixed_factors) + list(self.random_intercepts)
        for pair in self.random_interactions:
            names.extend(pair)
        if self.mult_term:
            names.extend(self.mult_term)
        return tuple(dict.fromkeys(names))

    def to_formula(self) -> str:
        """输出规范形式的公式文本"""
        terms = ["1"]
        terms.extend(self.fixed_factors)
        terms.extend(f"(1|{g})" for g in self.random_intercepts)
        terms.extend(f"(1|{g}:{h})" for g, h in self.random_interactions)
        if self.mult_term:
            terms.append(f"mp({self.mult_term[0]},{self.mult_term[1]})")
        return f"{self.response} ~ " + " + ".join(terms)

    def to_dict(self) -> Dict[str, Any]:
        """转为字典格式"""
        return {
            'formula': self.to_formula(),
            'response': self.response,
            'fixed_factors': list(self.fixed_factors),
            'random_intercepts': list(self.random_intercepts),
            'random_interactions': [list(p) for p in self.random_interactions],
            'mult_term': list(self.mult_term) if self.mult_term else None,
        }

    def __str__(self) -> str:
        return self.to_formula()


class ModelBinding:
    """
    公式与数据集的绑定结果：名称 -> 因子列
    """

    def __init__(self, spec: ModelSpec, dataset: Dataset, factors: Dict[str, Factor]):
        self.spec = spec
        self.dataset = dataset
        self.factors = factors

    def n_levels(self, name: str) -> int:
        return self.factors[name].n_levels

    @property
    def I(self) -> int:
        """乘法项随机因子的水平数（没有乘法项时为0）"""
        return self.n_levels(self.spec.random_factor) if self.spec.mult_term else 0

    @property
    def J(self) -> int:
        """固定因子的水平数（只有截距时为1）"""
        return self.n_levels(self.spec.fixed_factor) if self.spec.fixed_factor else 1

    def to_dict(self) -> Dict[str, Any]:
        return {name: f.n_levels for name, f in self.factors.items()}
