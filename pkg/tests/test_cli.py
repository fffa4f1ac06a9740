"""
命令行入口：退出码与输出格式
"""
import io
import json

import pandas as pd
import pytest

from conftest import FULL_FORMULA
from main import main


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_fit_json(capsys, small_csv):
    code, out, _ = _run(capsys, "fit", "--data", str(small_csv), "--formula", FULL_FORMULA, "--out", "json")
    assert code == 0
    payload = json.loads(out)
    assert payload['converged'] is True
    assert len(payload['parameters']['beta']) == 5


def test_fit_text(capsys, small_csv):
    code, out, _ = _run(capsys, "fit", "--data", str(small_csv), "--formula", FULL_FORMULA)
    assert code == 0
    assert "sigma_b" in out


def test_iteration_cap_exit_code(capsys, small_csv):
    code, _, _ = _run(capsys, "fit", "--data", str(small_csv), "--formula", FULL_FORMULA, "--max-iter", "1")
    assert code == 2


def test_malformed_formula(capsys, small_csv):
    code, out, err = _run(capsys, "fit", "--data", str(small_csv), "--formula", "y ~ 1 + (1|")
    assert code == 1
    assert "offset 11" in err
    assert out == ""


def test_missing_data_file(capsys, tmp_path):
    code, _, err = _run(capsys, "fit", "--data", str(tmp_path / "absent.csv"), "--formula", FULL_FORMULA)
    assert code == 1
    assert err.startswith("error:")


def test_unknown_column(capsys, small_csv):
    code, _, _ = _run(capsys, "fit", "--data", str(small_csv),
                      "--formula", "y ~ 1 + Product + (1|Judge)")
    assert code == 1


def test_argparse_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--out", "xml"])
    assert exc.value.code == 1


def test_missing_command(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1


def test_test_command_json(capsys, small_csv):
    code, out, _ = _run(capsys, "test", "--data", str(small_csv), "--formula", FULL_FORMULA, "--out", "json")
    # 零模型可能停在方差下限，此时退出码为 2
    assert code in (0, 2)
    payload = json.loads(out)
    assert [row['df_text'] for row in payload['lrt']] == ["1/2", "3/2", "3/2", "11/2"]
    assert [t['test'] for t in payload['ftests']] == ["2-way ANOVA", "MAM"]


def test_lines_csv(capsys, small_csv):
    code, out, _ = _run(capsys, "lines", "--data", str(small_csv), "--formula", FULL_FORMULA, "--out", "csv")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "group,slope,intercept"
    assert len(lines) == 7


def test_loa_json(capsys, small_csv):
    code, out, _ = _run(capsys, "loa", "--data", str(small_csv), "--formula", FULL_FORMULA,
                        "--out", "json", "--grid", "11")
    assert code == 0
    payload = json.loads(out)
    assert len(payload['grid']) == 11
    assert payload['random_methods'] is not None


def test_simulate_is_reproducible(capsys, small_csv):
    argv = ["simulate", "--data", str(small_csv), "--formula", FULL_FORMULA, "--out", "csv",
            "--patients", "6", "--reps", "4", "--seed", "17"]
    code, first, _ = _run(capsys, *argv)
    assert code == 0
    _, second, _ = _run(capsys, *argv)
    assert first == second
    lines = first.strip().splitlines()
    assert lines[0] == "# seed: 17"
    assert len(lines) == 2 + 6 * 4
    frame = pd.read_csv(io.StringIO(first), comment="#")
    assert len(frame) == 6 * 4


def test_ci_with_contrast(capsys, small_csv):
    code, out, _ = _run(capsys, "ci", "--data", str(small_csv), "--formula", FULL_FORMULA,
                        "--contrast", "P5,P1", "--out", "json")
    assert code == 0
    ci = json.loads(out)['ci']
    assert ci['contrast'] == "P5 - P1"
    assert ci['lower'] < ci['estimate'] < ci['upper']


def test_ci_unknown_level(capsys, small_csv):
    code, _, _ = _run(capsys, "ci", "--data", str(small_csv), "--formula", FULL_FORMULA,
                      "--contrast", "P5,P9")
    assert code == 1


def test_json_logging(capsys, small_csv):
    code, out, _ = _run(capsys, "--log-json", "--log-level", "warning", "lines",
                        "--data", str(small_csv), "--formula", FULL_FORMULA, "--out", "json")
    assert code == 0
    assert len(json.loads(out)['lines']) == 6
