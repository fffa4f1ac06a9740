"""
结果输出
JSON 是唯一的数据来源，文本表格由同样的字典生成（数值保留4位小数），CSV 用于外部作图
"""
import json
import math
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

TEXT_DECIMALS = 4


def _json_default(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


def to_json(payload: Dict[str, Any]) -> str:
    """完整精度的 JSON"""
    return json.dumps(payload, indent=2, ensure_ascii=False, default=_json_default)


def format_number(value: Any) -> str:
    """文本表格中的数值：4位小数，None/nan 显示为 -"""
    if value is None:
        return "-"
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(value)
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            return "-" if math.isnan(value) else ("Inf" if value > 0 else "-Inf")
        return f"{value:.{TEXT_DECIMALS}f}"
    return str(value)


def format_p(value: Optional[float]) -> str:
    if value is None or not math.isfinite(value):
        return "-"
    return f"{value:.2E}"


def text_table(headers: Sequence[str], rows: Sequence[Sequence[str]], title: str = "") -> str:
    """左对齐首列、右对齐其余列的纯文本表格"""
    widths = [len(h) for h in headers]
    for row in rows:
        widths = [max(w, len(cell)) for w, cell in zip(widths, row)]

    def line(cells):
        first = cells[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return "  ".join([first] + rest).rstrip()

    out = [title] if title else []
    out.append(line(list(headers)))
    out.append("  ".join("-" * w for w in widths))
    out.extend(line(list(r)) for r in rows)
    return "\n".join(out)


# ===== 拟合 =====

def fit_text(payload: Dict[str, Any], show_time: bool = False) -> str:
    """拟合结果的文本版本：单元均值、随机效应、协方差参数"""
    params = payload['parameters']
    blocks = [f"Model: {payload['model']}"]

    beta_rows = [[level, format_number(v)] for level, v in params['beta'].items()]
    blocks.append(text_table(["Level", "Estimate"], beta_rows, "Fixed effects (cell means mu + nu_j)"))

    for label, modes in payload['random_effects'].items():
        rows = [[level, format_number(v)] for level, v in modes.items()]
        blocks.append(text_table(["Level", "Mode"], rows, f"Random effects: {label}"))

    cov_rows = [[name, format_number(v)] for name, v in params.items() if name != 'beta']
    blocks.append(text_table(["Parameter", "Estimate"], cov_rows, "Covariance parameters"))

    status = "converged" if payload['converged'] else "NOT converged"
    summary = (f"-logLik = {format_number(payload['nll'])}, {status} after {payload['n_iter']} iterations "
               f"(max |grad| = {payload['grad_norm']:.2e})")
    if show_time:
        summary += f", time {payload['elapsed']:.3f} s"
    blocks.append(summary)
    blocks.extend(f"warning: {w}" for w in payload['warnings'])
    return "\n\n".join(blocks)


def fit_frame(payload: Dict[str, Any]) -> pd.DataFrame:
    """拟合结果的长表：block, name, value"""
    rows = [("beta", level, v) for level, v in payload['parameters']['beta'].items()]
    rows.extend(("covariance", name, v) for name, v in payload['parameters'].items() if name != 'beta')
    for label, modes in payload['random_effects'].items():
        rows.extend((label, level, v) for level, v in modes.items())
    return pd.DataFrame(rows, columns=["block", "name", "value"])


# ===== 检验 =====

def tests_text(payload: Dict[str, Any]) -> str:
    rows = [
        [r['effect'], format_number(r['chi2']), f"{r['df']:g}",
         format_p(r['p_value']) + ("" if r['converged'] else " *")]
        for r in payload['lrt']
    ]
    blocks = [text_table(["Effect", "Chi2", "DF", "p-value"], rows,
                         f"Likelihood ratio tests ({payload['method']} df)")]
    if any(not r['converged'] for r in payload['lrt']):
        blocks.append("* at least one of the fits did not converge")
    if payload.get('ftests'):
        f_rows = [[t['test'], format_number(t['f']), f"({t['df1']}, {t['df2']})", format_p(t['p_value'])]
                  for t in payload['ftests']]
        blocks.append(text_table(["Test", "F", "DF", "p-value"], f_rows, "Product effect"))
    elif payload.get('ftest_note'):
        blocks.append(payload['ftest_note'])
    return "\n\n".join(blocks)


def tests_frame(payload: Dict[str, Any]) -> pd.DataFrame:
    return pd.DataFrame(payload['lrt'])[["effect", "chi2", "df", "p_value", "method", "converged"]]


# ===== 区间 =====

def ci_text(payload: Dict[str, Any]) -> str:
    ci = payload['ci']
    level = f"{100 * ci['level']:g}%"
    rows = [
        ["profile", format_number(ci['estimate']), format_number(ci['lower']), format_number(ci['upper'])],
        ["Wald", format_number(ci['estimate']), format_number(ci['wald_lower']), format_number(ci['wald_upper'])],
    ]
    blocks = [text_table(["Interval", "Estimate", "Lower", "Upper"], rows, f"{level} CI for {ci['contrast']}")]
    notes = []
    if ci['lower_open'] or ci['upper_open']:
        sides = [side for side in ("lower", "upper") if ci[f"{side}_open"]]
        notes.append("interval is open on the " + " and ".join(sides) + (" sides" if len(sides) > 1 else " side"))
    if ci['non_monotone']:
        notes.append("profile is not monotone; crossing located on a grid")
    if notes:
        blocks.append("\n".join(f"note: {n}" for n in notes))
    return "\n\n".join(blocks)


def ci_frame(payload: Dict[str, Any]) -> pd.DataFrame:
    ci = payload['ci']
    return pd.DataFrame([{k: ci[k] for k in ("contrast", "level", "estimate", "lower", "upper", "se")}])


# ===== 表格类结果 =====

def frame_text(frame: pd.DataFrame) -> str:
    return frame.to_string(index=False, float_format=lambda v: f"{v:.{TEXT_DECIMALS}f}")


def frame_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format="%.17g", lineterminator="\n")


def frame_records(frame: pd.DataFrame) -> List[Dict[str, Any]]:
    return frame.to_dict(orient="records")
