"""
混合评价员模型（MAM）与普通两因子混合方差分析
乘法协变量用观测到的中心化产品均值 x_j 代替，交互平方和拆成尺度部分和分歧部分
"""
import logging
from typing import Optional

import numpy as np
from scipy import stats

from services.data_service import Dataset
from services.errors import InsufficientDfError, ReplicatesRequiredError, UnsupportedModelError
from .contrast_variance import replicate_count
from .inference_models import AnovaRow, FTestResult, MamSummary

logger = logging.getLogger(__name__)


def _f_row(row: AnovaRow, denominator: AnovaRow) -> AnovaRow:
    if row.df > 0 and denominator.df > 0 and denominator.ms > 0:
        row.f = row.ms / denominator.ms
        row.p_value = float(stats.f.sf(row.f, row.df, denominator.df))
    return row


def mam_fit(ds: Dataset, grouping: str, fixed: str) -> MamSummary:
    """
    计算 MAM 分解
    Args:
        ds: 数据集（完整的两因子表，每个单元至少一个观测，至少有一个单元有重复）
        grouping: 随机因子（评价员）
        fixed: 固定因子（产品）
    Returns:
        MamSummary: 产品效应、尺度系数和方差分析表
    """
    g, f = ds.factor(grouping), ds.factor(fixed)
    I, J = g.n_levels, f.n_levels
    y = ds.response

    counts = np.zeros((I, J))
    sums = np.zeros((I, J))
    np.add.at(counts, (g.codes, f.codes), 1)
    np.add.at(sums, (g.codes, f.codes), y)
    if np.any(counts == 0):
        raise UnsupportedModelError(f"MAM 需要完整的 {grouping} x {fixed} 表，存在空单元")
    if np.all(counts == 1):
        raise ReplicatesRequiredError("MAM 需要重复测量（每个单元只有一个观测）")
    K, balanced = replicate_count(counts, "MAM: ")

    cell = sums / counts
    grand = cell.mean()
    row_means = cell.mean(axis=1)
    col_means = cell.mean(axis=0)
    x = col_means - grand
    e = cell - row_means[:, None] - col_means[None, :] + grand
    sxx = float(x @ x)
    beta = e @ x / sxx if sxx > 0 else np.zeros(I)

    ss_error = float(np.sum((y - cell[g.codes, f.codes]) ** 2))
    df_error = int(ds.n_obs - I * J)
    ss_product = I * K * sxx
    ss_assessor = J * K * float(row_means @ row_means - I * grand ** 2)
    ss_interaction = K * float(np.sum(e ** 2))
    ss_scaling = K * float(beta @ beta) * sxx
    ss_disagreement = ss_interaction - ss_scaling

    error = AnovaRow("Error", ss_error, df_error)
    interaction = AnovaRow("Interaction", ss_interaction, (I - 1) * (J - 1))
    disagreement = AnovaRow("Disagreement", ss_disagreement, (I - 1) * (J - 2))
    rows = [
        _f_row(AnovaRow("Product", ss_product, J - 1), disagreement),
        _f_row(AnovaRow("Assessor", ss_assessor, I - 1), interaction),
        _f_row(AnovaRow("Scaling", ss_scaling, I - 1), disagreement),
        _f_row(disagreement, error),
        _f_row(interaction, error),
        error,
    ]
    logger.debug(f"MAM: I={I}, J={J}, K={K:.3f}, SS_scaling={ss_scaling:.4f}, SS_dis={ss_disagreement:.4f}")
    return MamSummary(grouping, fixed, I, J, K, balanced, x, beta, rows, list(g.levels), list(f.levels))


def mam_ftest(summary: MamSummary) -> FTestResult:
    """
    MAM 的产品 F 检验：MS_Product / MS_Disagreement，自由度 (J-1, (I-1)(J-2))
    """
    df1, df2 = summary.J - 1, (summary.I - 1) * (summary.J - 2)
    if df2 <= 0:
        raise InsufficientDfError(f"MAM 的分歧自由度 (I-1)(J-2) = {df2}，无法检验")
    product, disagreement = summary.row("Product"), summary.row("Disagreement")
    F = product.ms / disagreement.ms
    return FTestResult("MAM", float(F), df1, df2, float(stats.f.sf(F, df1, df2)))


def scaling_ftest(summary: MamSummary) -> FTestResult:
    """尺度效应 F 检验：MS_Scaling / MS_Disagreement，自由度 (I-1, (I-1)(J-2))"""
    df1, df2 = summary.I - 1, (summary.I - 1) * (summary.J - 2)
    if df2 <= 0:
        raise InsufficientDfError(f"MAM 的分歧自由度 (I-1)(J-2) = {df2}，无法检验")
    F = summary.row("Scaling").ms / summary.row("Disagreement").ms
    return FTestResult("Scaling", float(F), df1, df2, float(stats.f.sf(F, df1, df2)))


def anova_ftest(summary: MamSummary) -> FTestResult:
    """
    普通两因子混合方差分析的产品 F 检验：MS_Product / MS_Interaction，自由度 (J-1, (I-1)(J-1))
    """
    df1, df2 = summary.J - 1, (summary.I - 1) * (summary.J - 1)
    F = summary.row("Product").ms / summary.row("Interaction").ms
    return FTestResult("2-way ANOVA", float(F), df1, df2, float(stats.f.sf(F, df1, df2)))


def ftest_table(ds: Dataset, grouping: str, fixed: str) -> Optional[list]:
    """
    产品效应的 F 检验对照（两因子方差分析与 MAM）；没有重复时返回 None
    """
    try:
        summary = mam_fit(ds, grouping, fixed)
    except ReplicatesRequiredError as e:
        logger.info(f"省略 F 检验: {e}")
        return None
    tests = [anova_ftest(summary)]
    if summary.J > 2:
        tests.append(mam_ftest(summary))
    return tests
