"""
测试公共夹具：模拟数据集、临时CSV文件、慢测试开关
"""
import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from services.data_service import Dataset
from services.design_service import ParamVector, simulate_dataset
from services.formula_service import parse_formula
from services.optimize_service import fit

FULL_FORMULA = "y ~ 1 + Product + (1|Assessor) + (1|Assessor:Product) + mp(Assessor,Product)"
NO_D_FORMULA = "y ~ 1 + Product + (1|Assessor) + mp(Assessor,Product)"
ANOVA_FORMULA = "y ~ 1 + Product + (1|Assessor) + (1|Assessor:Product)"

# 与电视机感官评价数据同规模的真值（8 个评价员 x 12 个产品）
TRUE_BETA = np.array([6.1, 8.6, 5.2, 7.4, 6.8, 4.9, 5.7, 7.9, 6.3, 5.0, 4.6, 4.06])
TRUE_PARAMS = dict(sigma=1.2, sigma_a=2.0, sigma_b=0.47, sigma_d=0.25, rho=0.42)

DATA_DIR = Path(__file__).parent / "data"


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="运行慢速的模拟研究")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="需要 --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def random_params(layout, rng, sd_range=(0.3, 2.0), rho_max=0.8) -> ParamVector:
    """在设计结构上随机取一组合法参数"""
    beta = rng.normal(5.0, 2.0, layout.p)
    log_sds = {comp.label: math.log(rng.uniform(*sd_range)) for comp in layout.components}
    z_rho = math.atanh(rng.uniform(-rho_max, rho_max)) if layout.has_rho else None
    return ParamVector(beta, math.log(rng.uniform(*sd_range)), log_sds, z_rho)


def write_csv(path: Path, ds: Dataset) -> Path:
    """把数据集写成长格式CSV"""
    frame = {name: ds.decode(name) for name in ds.factor_names}
    frame[ds.response_name] = ds.response
    pd.DataFrame(frame).to_csv(path, index=False, float_format="%.17g")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


@pytest.fixture(scope="session")
def full_spec():
    return parse_formula(FULL_FORMULA)


@pytest.fixture(scope="session")
def balanced_data():
    """I=8, J=12, K=2 的平衡数据（192 个观测）"""
    return simulate_dataset(TRUE_BETA, I=8, K=2, seed=11, **TRUE_PARAMS)


@pytest.fixture(scope="session")
def small_data():
    """I=6, J=5, K=2 的小数据集"""
    return simulate_dataset([3.0, 4.0, 5.5, 6.0, 8.0], sigma=0.5, sigma_a=1.0, sigma_b=0.4,
                            sigma_d=0.3, rho=0.3, I=6, K=2, seed=5)


@pytest.fixture(scope="session")
def unbalanced_data():
    """随机删除 15% 观测的非平衡数据"""
    return simulate_dataset([3.0, 4.0, 5.5, 6.0, 8.0], sigma=0.5, sigma_a=1.0, sigma_b=0.4,
                            sigma_d=0.3, rho=0.3, I=6, K=3, seed=7, missing=0.15)


@pytest.fixture
def small_csv(tmp_path, small_data):
    return write_csv(tmp_path / "small.csv", small_data)


@pytest.fixture(scope="session")
def balanced_fit(full_spec, balanced_data):
    return fit(full_spec, balanced_data)


@pytest.fixture(scope="session")
def small_fit(full_spec, small_data):
    return fit(full_spec, small_data)
