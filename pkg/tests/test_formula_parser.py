"""
模型公式解析与数据绑定
"""
import numpy as np
import pytest

from services.data_service import Dataset, Factor
from services.errors import (
    DegenerateFactorError,
    FormulaSemanticError,
    FormulaSyntaxError,
    UnknownColumnError,
    UnsupportedModelError,
)
from services.formula_service import parse_formula, validate_against


def test_multiplicative_formula():
    ms = parse_formula("Cutting ~ 1 + Product + (1|Assessor) + (1|Assessor:Product) + mp(Assessor,Product)")
    assert ms.response == "Cutting"
    assert ms.fixed_factors == ("Product",)
    assert ms.random_intercepts == ("Assessor",)
    assert ms.random_interactions == (("Assessor", "Product"),)
    assert ms.mult_term == ("Assessor", "Product")
    assert ms.disagreement_term == ("Assessor", "Product")
    assert ms.has_scaling_intercept


def test_plain_mixed_model():
    ms = parse_formula("y ~ 1 + F + (1|G)")
    assert ms.mult_term is None
    assert ms.random_intercepts == ("G",)


def test_whitespace_insensitive():
    a = parse_formula("y~F+(1|G)+(1|G:F)+mp(G,F)")
    b = parse_formula("  y ~ 1 +  F + ( 1 | G ) + (1 | G : F) + mp( G , F )  ")
    assert a == b


def test_intercept_implied():
    assert parse_formula("y ~ F + (1|G)") == parse_formula("y ~ 1 + F + (1|G)")


def test_canonical_round_trip():
    ms = parse_formula("y ~ F + (1|G) + (1|G:F) + mp(G,F)")
    again = parse_formula(ms.to_formula())
    assert again == ms
    assert parse_formula(again.to_formula()).to_formula() == ms.to_formula()


def test_mp_fixed_factor_must_be_in_mean():
    with pytest.raises(FormulaSemanticError) as info:
        parse_formula("y ~ 1 + mp(G,F)")
    assert "F" in str(info.value)


def test_only_one_multiplicative_term():
    with pytest.raises(UnsupportedModelError):
        parse_formula("y ~ F + mp(G,F) + mp(H,F)")


def test_no_intercept_rejected():
    with pytest.raises(FormulaSemanticError):
        parse_formula("y ~ 0 + F")


def test_duplicate_terms_rejected():
    with pytest.raises(FormulaSemanticError):
        parse_formula("y ~ F + (1|G) + (1|G)")
    with pytest.raises(FormulaSemanticError):
        parse_formula("y ~ F + (1|G:F) + (1|F:G)")


@pytest.mark.parametrize("src, offset", [
    ("y ~ 1 + (1|", 11),
    ("y ~ 1 + $", 8),
    ("y ~ 1 +", 7),
    ("~ F", 0),
])
def test_syntax_error_offset(src, offset):
    with pytest.raises(FormulaSyntaxError) as info:
        parse_formula(src)
    assert info.value.offset == offset


def test_syntax_error_offset_counts_bytes():
    with pytest.raises(FormulaSyntaxError) as info:
        parse_formula("y ~\u00a01 + $")
    assert info.value.offset == 9


def test_empty_formula():
    with pytest.raises(FormulaSyntaxError):
        parse_formula("   ")


def _dataset(levels_g=3, levels_f=2):
    n = levels_g * levels_f
    g = np.repeat(np.arange(levels_g), levels_f)
    f = np.tile(np.arange(levels_f), levels_g)
    return Dataset(np.arange(n, dtype=float), {
        "G": Factor("G", g, [f"g{k}" for k in range(levels_g)]),
        "F": Factor("F", f, [f"f{k}" for k in range(levels_f)]),
    })


def test_validate_binding():
    binding = validate_against(parse_formula("y ~ F + (1|G) + (1|G:F) + mp(G,F)"), _dataset())
    assert binding.I == 3
    assert binding.J == 2


def test_validate_unknown_column():
    with pytest.raises(UnknownColumnError) as info:
        validate_against(parse_formula("y ~ F + (1|Judge)"), _dataset())
    assert info.value.column == "Judge"


def test_validate_degenerate_factor():
    with pytest.raises(DegenerateFactorError):
        validate_against(parse_formula("y ~ F + (1|G)"), _dataset(levels_g=1))
