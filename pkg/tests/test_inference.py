"""
似然比检验、F 检验、对比方差和轮廓似然区间
"""
from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest
from scipy import stats

from conftest import ANOVA_FORMULA, FULL_FORMULA, NO_D_FORMULA, TRUE_BETA
from services.data_service import Dataset, Factor
from services.design_service import simulate_dataset
from services.errors import (
    ConfigError,
    InsufficientDfError,
    NestingViolationError,
    ReplicatesRequiredError,
    TermNotInModelError,
)
from services.formula_service import parse_formula
from services.inference_service import (
    ProfileCi,
    anova_ftest,
    available_terms,
    chi2_survival,
    compare_p_values,
    contrast_variance_mam,
    contrast_variance_mmm,
    ftest_table,
    lrt,
    lrt_table,
    mam_fit,
    mam_ftest,
    pairwise_contrast,
    profile_ci,
    scaling_ftest,
    term_df,
    wald_se,
)
from services.inference_service.profile_ci import ContrastProfile
from services.optimize_service import fit


def _table(cells: np.ndarray, offsets=(-0.1, 0.1)) -> Dataset:
    """I x J 的单元均值表，每个单元按 offsets 生成重复"""
    I, J = cells.shape
    K = len(offsets)
    g = np.repeat(np.arange(I), J * K)
    f = np.tile(np.repeat(np.arange(J), K), I)
    y = cells[g, f] + np.tile(np.asarray(offsets, dtype=float), I * J)
    return Dataset(y, {
        "Assessor": Factor("Assessor", g, [f"A{k}" for k in range(I)]),
        "Product": Factor("Product", f, [f"P{k}" for k in range(J)]),
    })


def _fake_fit(nll, converged=True):
    return SimpleNamespace(nll=nll, converged=converged, model=parse_formula(NO_D_FORMULA))


class TestChi2Survival:

    @pytest.mark.parametrize("statistic, expected", [(28.23, 3.07e-7), (50.86, 3.25e-12)])
    def test_published_values(self, statistic, expected):
        assert chi2_survival(statistic, Fraction(3, 2)) == pytest.approx(expected, rel=0.02)

    def test_integer_df_is_chi2(self):
        assert chi2_survival(3.2, 1) == pytest.approx(stats.chi2.sf(3.2, 1))
        assert chi2_survival(3.2, 4, "mixture") == pytest.approx(stats.chi2.sf(3.2, 4))

    @pytest.mark.parametrize("k", [0, 1, 3])
    def test_fractional_between_neighbours(self, k):
        x = 2.5
        value = chi2_survival(x, Fraction(2 * k + 1, 2))
        lower = stats.chi2.sf(x, k) if k > 0 else 0.0
        assert lower <= value <= stats.chi2.sf(x, k + 1)

    def test_mixture(self):
        x = 4.0
        assert chi2_survival(x, Fraction(1, 2), "mixture") == pytest.approx(0.5 * stats.chi2.sf(x, 1))
        assert chi2_survival(x, Fraction(3, 2), "mixture") == pytest.approx(
            0.5 * stats.chi2.sf(x, 1) + 0.5 * stats.chi2.sf(x, 2))

    def test_zero_statistic(self):
        assert chi2_survival(0.0, Fraction(1, 2)) == 1.0
        assert chi2_survival(0.0, Fraction(1, 2), "mixture") == 1.0

    def test_unknown_method(self):
        with pytest.raises(ConfigError):
            chi2_survival(1.0, 1, "bartlett")


class TestLrt:

    def test_term_df(self, small_fit):
        layout = small_fit.layout
        assert term_df(layout, "d") == Fraction(1, 2)
        assert term_df(layout, "scaling") == Fraction(3, 2)
        assert term_df(layout, "a") == Fraction(3, 2)
        assert term_df(layout, "nu") == Fraction(4) + Fraction(3, 2)

    def test_term_df_without_mult(self, small_data):
        layout = fit(parse_formula(ANOVA_FORMULA), small_data).layout
        assert term_df(layout, "a") == Fraction(1, 2)
        assert term_df(layout, "nu") == Fraction(4)

    def test_nesting_violation(self):
        with pytest.raises(NestingViolationError):
            lrt(_fake_fit(100.0), _fake_fit(99.0), Fraction(1, 2))

    def test_tiny_negative_is_clamped(self):
        row = lrt(_fake_fit(100.0), _fake_fit(100.0 - 1e-8), Fraction(1, 2), effect="Scaling, b")
        assert row.chi2 == 0.0
        assert row.p_value == 1.0
        assert "clamped" in row.note

    def test_non_converged_row_is_marked(self):
        row = lrt(_fake_fit(100.0), _fake_fit(103.0, converged=False), Fraction(3, 2))
        assert row.chi2 == pytest.approx(6.0)
        assert not row.converged
        assert "not converged" in row.note

    def test_available_terms(self):
        assert available_terms(parse_formula(FULL_FORMULA)) == ["d", "b", "a", "nu"]
        assert available_terms(parse_formula(NO_D_FORMULA)) == ["b", "a", "nu"]
        assert "b" not in available_terms(parse_formula(ANOVA_FORMULA))

    def test_table(self, small_data, small_fit):
        rows = lrt_table(parse_formula(FULL_FORMULA), small_data, full=small_fit)
        assert [r.effect for r in rows] == [
            "Disagreement, d", "Scaling, b", "Random intercept, a", "Fixed effect, nu"]
        assert [r.df for r in rows] == [Fraction(1, 2), Fraction(3, 2), Fraction(3, 2), Fraction(11, 2)]
        for row in rows:
            assert row.chi2 >= 0.0
            assert 0.0 <= row.p_value <= 1.0
        # 产品差异很大，固定效应高度显著
        assert rows[-1].p_value < 1e-3
        compared = compare_p_values(rows)
        assert all(c['mixture'] >= 0 for c in compared)

    def test_table_rejects_absent_term(self, small_data):
        with pytest.raises(TermNotInModelError):
            lrt_table(parse_formula(ANOVA_FORMULA), small_data, terms=["b"])


class TestMam:

    def test_identical_groups_have_no_scaling(self):
        cells = np.tile(np.array([1.0, 3.0, 2.0, 6.0]), (5, 1))
        summary = mam_fit(_table(cells), "Assessor", "Product")
        np.testing.assert_allclose(summary.beta, 0.0, atol=1e-12)
        np.testing.assert_allclose(summary.x, [-2.0, 0.0, -1.0, 3.0])
        assert summary.row("Interaction").ss == pytest.approx(0.0, abs=1e-12)

    def test_pure_scaling_is_recovered(self):
        x = np.array([-2.0, 0.0, -1.0, 3.0])
        b = np.array([-0.3, 0.1, 0.0, 0.2])
        a = np.array([0.5, -1.0, 0.0, 0.3])
        cells = 5.0 + a[:, None] + (1.0 + b)[:, None] * x[None, :]
        summary = mam_fit(_table(cells), "Assessor", "Product")
        np.testing.assert_allclose(summary.beta, b - b.mean(), atol=1e-12)
        assert summary.row("Disagreement").ss == pytest.approx(0.0, abs=1e-10)

    def test_sums_of_squares_add_up(self, balanced_data):
        summary = mam_fit(balanced_data, "Assessor", "Product")
        y = balanced_data.response
        total = float(np.sum((y - y.mean()) ** 2))
        parts = sum(summary.row(s).ss for s in ("Product", "Assessor", "Interaction", "Error"))
        assert parts == pytest.approx(total, rel=1e-10)
        assert summary.row("Scaling").ss + summary.row("Disagreement").ss == pytest.approx(
            summary.row("Interaction").ss)

    def test_degrees_of_freedom(self, balanced_data):
        summary = mam_fit(balanced_data, "Assessor", "Product")
        F, df1, df2, p = mam_ftest(summary)
        assert (df1, df2) == (11, 70)
        assert F > 0 and 0.0 <= p <= 1.0
        assert tuple(anova_ftest(summary))[1:3] == (11, 77)
        assert tuple(scaling_ftest(summary))[1:3] == (7, 70)
        assert summary.row("Error").df == 96

    def test_two_products_have_no_disagreement_df(self):
        cells = np.array([[1.0, 2.0], [1.5, 2.5], [0.5, 2.2]])
        summary = mam_fit(_table(cells), "Assessor", "Product")
        with pytest.raises(InsufficientDfError):
            mam_ftest(summary)

    def test_replicates_required(self):
        ds = simulate_dataset([1.0, 2.0, 4.0], sigma=0.5, sigma_a=1.0, sigma_b=0.2, sigma_d=0.3,
                              rho=0.0, I=4, K=1, seed=3)
        with pytest.raises(ReplicatesRequiredError):
            mam_fit(ds, "Assessor", "Product")
        assert ftest_table(ds, "Assessor", "Product") is None

    def test_ftest_table(self, balanced_data):
        tests = ftest_table(balanced_data, "Assessor", "Product")
        assert [t.name for t in tests] == ["2-way ANOVA", "MAM"]


class TestContrastVariance:

    def test_mam_formula(self):
        assert contrast_variance_mam(0.5, 1.0, 4, 2) == pytest.approx(2 * 0.25 / 4 + 2 * 1.0 / 8)

    def test_equal_items_reduce_to_mam(self, small_fit):
        mam = contrast_variance_mam(small_fit.sigma_d, small_fit.sigma, 6, 2)
        assert contrast_variance_mmm(small_fit, 2, 2) == pytest.approx(mam)
        assert contrast_variance_mmm(small_fit, 0, 4) > mam

    def test_mmm_formula_matches_simulated_cell_means(self, small_fit):
        # 按拟合出的参数直接模拟产品均值之差
        rng = np.random.default_rng(314)
        n_draws, I, K = 200_000, 6, 2
        nu = small_fit.nu
        j1, j2 = 4, 0
        z = rng.standard_normal((n_draws, I, 2))
        b = small_fit.sigma_b * (small_fit.rho * z[..., 0] + np.sqrt(1 - small_fit.rho ** 2) * z[..., 1])
        a = small_fit.sigma_a * z[..., 0]
        d = small_fit.sigma_d * rng.standard_normal((n_draws, I, 2))
        e = small_fit.sigma * rng.standard_normal((n_draws, I, 2, K)).mean(axis=3)
        y1 = a + b * nu[j1] + d[..., 0] + e[..., 0]
        y2 = a + b * nu[j2] + d[..., 1] + e[..., 1]
        diff = (y1 - y2).mean(axis=1)
        expected = contrast_variance_mmm(small_fit, j1, j2)
        assert diff.var(ddof=1) == pytest.approx(expected, rel=0.02)

    def test_pairwise_contrast(self, small_fit):
        layout = small_fit.layout
        c, label = pairwise_contrast(layout, "P2", "P1")
        assert c.tolist() == [-1.0, 1.0, 0.0, 0.0, 0.0]
        assert label == "P2 - P1"
        c, _ = pairwise_contrast(layout, beta=small_fit.beta)
        assert c[int(np.argmax(small_fit.beta))] == 1.0

    def test_wald_se_positive(self, small_fit):
        c, _ = pairwise_contrast(small_fit.layout, "P5", "P1")
        se = wald_se(small_fit, c)
        assert 0.0 < se < 5.0


class TestProfileCi:

    def test_interval_contains_estimate(self, small_data, small_fit):
        ms = parse_formula(FULL_FORMULA)
        c, _ = pairwise_contrast(small_fit.layout, "P5", "P1")
        ci = profile_ci(ms, small_data, fit=small_fit, contrast=c)
        assert ci.lower < ci.estimate < ci.upper
        assert not ci.lower_open and not ci.upper_open
        profile = ContrastProfile(small_fit, c)
        threshold = stats.chi2.ppf(0.95, 1)
        assert profile.deviance(ci.lower) == pytest.approx(threshold, abs=1e-2)
        assert profile.deviance(ci.upper) == pytest.approx(threshold, abs=1e-2)

    def test_higher_level_is_wider(self, small_data, small_fit):
        ms = parse_formula(FULL_FORMULA)
        c, _ = pairwise_contrast(small_fit.layout, "P3", "P2")
        narrow = profile_ci(ms, small_data, fit=small_fit, contrast=c, level=0.95)
        wide = profile_ci(ms, small_data, fit=small_fit, contrast=c, level=0.99)
        assert wide.lower < narrow.lower and narrow.upper < wide.upper

    def test_additive_balanced_profile_is_symmetric(self, small_data):
        ms = parse_formula(ANOVA_FORMULA)
        result = fit(ms, small_data)
        c, _ = pairwise_contrast(result.layout, "P4", "P2")
        ci = profile_ci(ms, small_data, fit=result, contrast=c)
        assert abs(ci.asymmetry) < 1e-2 * (ci.upper - ci.lower)

    def test_asymmetry_grows_away_from_zero(self):
        # sigma_b 大、对比远离 0 时，远离 0 的一侧更宽
        ms = parse_formula(FULL_FORMULA)
        ds = simulate_dataset([2.0, 4.0, 6.0, 8.0, 12.0], sigma=0.3, sigma_a=1.0, sigma_b=0.8,
                              sigma_d=0.2, rho=0.0, I=8, K=2, seed=7)
        result = fit(ms, ds)
        up, _ = pairwise_contrast(result.layout, "P5", "P1")
        ci = profile_ci(ms, ds, fit=result, contrast=up)
        assert ci.estimate > 0
        assert ci.asymmetric and ci.asymmetry > 0
        down = profile_ci(ms, ds, fit=result, contrast=-up)
        assert down.estimate < 0
        assert down.asymmetric and down.asymmetry < 0

    def test_asymmetry_sign(self):
        ci = ProfileCi(np.array([1.0, -1.0]), 0.95, estimate=1.0, lower=0.5, upper=2.0, se=0.4)
        assert ci.asymmetry == pytest.approx(0.5)
        assert ci.asymmetric
        open_ci = ProfileCi(np.array([1.0, -1.0]), 0.95, estimate=1.0, lower=0.5, upper=np.inf,
                            se=0.4, upper_open=True)
        assert open_ci.asymmetric
        assert open_ci.to_dict()['upper'] is None


@pytest.mark.slow
def test_profile_coverage():
    ms = parse_formula(FULL_FORMULA)
    beta = TRUE_BETA[:8]
    truth = beta[5] - beta[2]
    hits, n_rep = 0, 500
    for rep in range(n_rep):
        ds = simulate_dataset(beta, sigma=0.5, sigma_a=1.0, sigma_b=0.4, sigma_d=0.3, rho=0.3,
                              I=20, K=2, seed=5000 + rep)
        result = fit(ms, ds)
        c, _ = pairwise_contrast(result.layout, "P6", "P3")
        ci = profile_ci(ms, ds, fit=result, contrast=c)
        hits += ci.lower <= truth <= ci.upper
    assert 0.92 <= hits / n_rep <= 0.98


@pytest.mark.slow
def test_mam_size_under_null():
    rejections, n_rep = 0, 2000
    for rep in range(n_rep):
        ds = simulate_dataset(np.full(6, 5.0), sigma=1.0, sigma_a=1.0, sigma_b=0.4, sigma_d=0.5,
                              rho=0.2, I=8, K=2, seed=20000 + rep)
        _, _, _, p = mam_ftest(mam_fit(ds, "Assessor", "Product"))
        rejections += p < 0.05
    assert rejections / n_rep == pytest.approx(0.05, abs=0.015)
