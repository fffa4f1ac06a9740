"""
文本输出的区间说明
"""
import numpy as np
import pytest

from services.inference_service import ProfileCi
from services.report_service import ci_text


def _ci(lower_open, upper_open):
    lower = -np.inf if lower_open else 0.5
    upper = np.inf if upper_open else 2.0
    return ProfileCi(np.array([1.0, -1.0]), 0.95, estimate=1.0, lower=lower, upper=upper, se=0.4,
                     label="P2 - P1", lower_open=lower_open, upper_open=upper_open)


@pytest.mark.parametrize("lower_open,upper_open,expected", [
    (True, False, "note: interval is open on the lower side"),
    (False, True, "note: interval is open on the upper side"),
    (True, True, "note: interval is open on the lower and upper sides"),
])
def test_open_sides_are_listed(lower_open, upper_open, expected):
    text = ci_text({'ci': _ci(lower_open, upper_open).to_dict()})
    assert expected in text.splitlines()


def test_closed_interval_has_no_note():
    text = ci_text({'ci': _ci(False, False).to_dict()})
    assert "note:" not in text
