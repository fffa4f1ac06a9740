"""
从两因子乘法混合模型生成数据
y_ijk = mu + a_i + nu_j + b_i nu_j + d_ij + e_ijk
"""
from typing import Optional, Sequence

import numpy as np

from services.data_service import Dataset, Factor
from services.errors import ParameterError


def simulate_dataset(beta: Sequence[float],
                     sigma: float,
                     sigma_a: float,
                     sigma_b: float,
                     sigma_d: float = 0.0,
                     rho: float = 0.0,
                     I: int = 8,
                     K: int = 2,
                     seed: Optional[int] = 0,
                     missing: float = 0.0,
                     random_name: str = "Assessor",
                     fixed_name: str = "Product",
                     response_name: str = "y") -> Dataset:
    """
    按给定参数模拟一个平衡（或随机缺失）的两因子数据集
    Args:
        beta: 单元均值 mu + nu_j，长度即 J
        sigma, sigma_a, sigma_b, sigma_d: 各项标准差
        rho: a_i 与 b_i 的相关系数
        I: 随机因子水平数
        K: 每个单元的重复数
        seed: 随机种子
        missing: 随机删除观测的比例
    Returns:
        Dataset: 模拟数据
    """
    if abs(rho) >= 1:
        raise ParameterError(f"相关系数必须满足 |rho| < 1，实际为 {rho}", "rho")
    if min(sigma, sigma_a, sigma_b, sigma_d) < 0:
        raise ParameterError("标准差不能为负")
    rng = np.random.default_rng(seed)
    beta = np.asarray(beta, dtype=float)
    J = beta.shape[0]
    nu = beta - beta.mean()

    z = rng.standard_normal((I, 2))
    a = sigma_a * z[:, 0]
    b = sigma_b * (rho * z[:, 0] + np.sqrt(1.0 - rho ** 2) * z[:, 1])
    d = sigma_d * rng.standard_normal((I, J))

    i_idx, j_idx, _ = np.meshgrid(np.arange(I), np.arange(J), np.arange(K), indexing="ij")
    i_idx, j_idx = i_idx.ravel(), j_idx.ravel()
    y = (beta[j_idx] + a[i_idx] + b[i_idx] * nu[j_idx] + d[i_idx, j_idx]
         + sigma * rng.standard_normal(i_idx.shape[0]))

    if missing > 0:
        keep = rng.random(y.shape[0]) >= missing
        i_idx, j_idx, y = i_idx[keep], j_idx[keep], y[keep]

    factors = {
        random_name: Factor(random_name, i_idx, [f"{random_name[0]}{k + 1}" for k in range(I)]),
        fixed_name: Factor(fixed_name, j_idx, [f"{fixed_name[0]}{k + 1}" for k in range(J)]),
    }
    return Dataset(y, factors, response_name=response_name)
