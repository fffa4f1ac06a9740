"""
直接边际似然：V = Z G Z' + sigma^2 I 的稠密 Cholesky
只作为校验 Laplace 目标函数的独立实现，n 受 settings.oracle_max_n 限制
"""
import logging
import math
from typing import Optional

import numpy as np
from scipy import linalg

from config import settings
from services.data_service import Dataset
from services.design_service import DesignLayout, ParamVector, mult_covariate
from services.errors import CovarianceDegenerateError, OracleSizeError
from .likelihood_models import GMatrix

logger = logging.getLogger(__name__)


def marginal_covariance(pv: ParamVector, layout: DesignLayout) -> np.ndarray:
    """V(theta) = Z(theta) G Z(theta)' + sigma^2 I"""
    n = layout.n_obs
    V = np.eye(n) * pv.sigma ** 2
    if layout.q:
        nu = mult_covariate(pv.beta, layout.centered) if layout.has_mult else None
        Z = layout.random_matrix(nu).toarray()
        V += Z @ GMatrix(layout, pv).dense() @ Z.T
    return V


def direct_marginal_nll(pv: ParamVector,
                        layout: DesignLayout,
                        ds: Optional[Dataset] = None,
                        cap: Optional[int] = None) -> float:
    """
    (n/2) log(2 pi) + 0.5 log|V| + 0.5 (y - X beta)' V^-1 (y - X beta)
    Args:
        pv: 参数向量
        layout: 设计结构
        ds: 数据集（默认使用构建 layout 时的响应）
        cap: 观测数上限，默认 settings.oracle_max_n
    Returns:
        float: 边际负对数似然
    """
    cap = settings.oracle_max_n if cap is None else cap
    n = layout.n_obs
    if n > cap:
        raise OracleSizeError(n, cap)
    y = layout.y if ds is None else ds.response

    V = marginal_covariance(pv, layout)
    try:
        chol = linalg.cholesky(V, lower=True)
    except linalg.LinAlgError as e:
        raise CovarianceDegenerateError(f"V 不是正定的: {e}")
    resid = y - pv.beta[layout.fixed_codes]
    alpha = linalg.solve_triangular(chol, resid, lower=True)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    value = 0.5 * n * math.log(2.0 * math.pi) + 0.5 * log_det + 0.5 * float(alpha @ alpha)
    logger.debug(f"直接边际似然: n={n}, nll={value:.10f}")
    return value
