"""
似然服务
联合似然、内层求解、Laplace 目标函数及其解析梯度，以及直接边际似然
"""
from .laplace_likelihood import (
    inner_solve,
    joint_nll,
    laplace_nll,
    laplace_value_and_gradient,
    nll_gradient,
)
from .likelihood_models import GMatrix, InnerSolution
from .marginal_likelihood import direct_marginal_nll, marginal_covariance

__all__ = [
    'GMatrix',
    'InnerSolution',
    'direct_marginal_nll',
    'inner_solve',
    'joint_nll',
    'laplace_nll',
    'laplace_value_and_gradient',
    'marginal_covariance',
    'nll_gradient',
]
