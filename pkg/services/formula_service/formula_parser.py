"""
模型公式解析
语法（空白不敏感）:
    formula := ident "~" term ("+" term)*
    term    := "1" | ident | "(" "1" "|" ident (":" ident)? ")" | "mp" "(" ident "," ident ")"
"""
import logging
import re
from typing import List, NamedTuple, Optional, Tuple

from services.data_service import Dataset
from services.errors import (
    DegenerateFactorError,
    FormulaSemanticError,
    FormulaSyntaxError,
    UnknownColumnError,
    UnsupportedModelError,
)
from .formula_models import ModelBinding, ModelSpec

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"\s*(?:(?P<ident>[A-Za-z_.][A-Za-z0-9_.]*)|(?P<number>\d+)|(?P<op>[~+()|:,]))")


class Token(NamedTuple):
    kind: str
    text: str
    offset: int


def _byte_offset(src: str, index: int) -> int:
    return len(src[:index].encode("utf-8"))


def tokenize(src: str) -> List[Token]:
    """把公式切分为记号，offset 为 UTF-8 字节偏移"""
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        match = _TOKEN_RE.match(src, pos)
        if match is None:
            stripped = len(src[pos:]) - len(src[pos:].lstrip())
            bad = pos + stripped
            raise FormulaSyntaxError(f"无法识别的字符 '{src[bad]}'", _byte_offset(src, bad))
        kind = match.lastgroup
        start = match.start(kind)
        tokens.append(Token(kind, match.group(kind), _byte_offset(src, start)))
        pos = match.end()
    tokens.append(Token("end", "", _byte_offset(src, len(src))))
    return tokens


class _Parser:
    """递归下降解析器"""

    def __init__(self, src: str):
        self.tokens = tokenize(src)
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def advance(self) -> Token:
        token = self.peek()
        self.pos += 1
        return token

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        token = self.peek()
        if token.kind != kind or (text is not None and token.text != text):
            wanted = repr(text) if text else kind
            found = repr(token.text) if token.text else "公式结尾"
            raise FormulaSyntaxError(f"期望 {wanted}，实际为 {found}", token.offset)
        return self.advance()

    def parse(self):
        response = self.expect("ident").text
        self.expect("op", "~")
        terms = [self.term()]
        while self.peek().kind == "op" and self.peek().text == "+":
            self.advance()
            terms.append(self.term())
        self.expect("end")
        return response, terms

    def term(self) -> Tuple[str, Tuple[str, ...], int]:
        token = self.peek()
        if token.kind == "number":
            self.advance()
            if token.text == "1":
                return "intercept", (), token.offset
            if token.text == "0":
                return "no_intercept", (), token.offset
            raise FormulaSyntaxError(f"无效的常数项 '{token.text}'", token.offset)
        if token.kind == "ident" and token.text == "mp" and self.peek(1).text == "(":
            self.advance()
            self.expect("op", "(")
            random_factor = self.expect("ident").text
            self.expect("op", ",")
            fixed_factor = self.expect("ident").text
            self.expect("op", ")")
            return "mult", (random_factor, fixed_factor), token.offset
        if token.kind == "ident":
            self.advance()
            return "fixed", (token.text,), token.offset
        if token.kind == "op" and token.text == "(":
            self.advance()
            self.expect("number", "1")
            self.expect("op", "|")
            group = self.expect("ident").text
            if self.peek().text == ":":
                self.advance()
                other = self.expect("ident").text
                self.expect("op", ")")
                return "interaction", (group, other), token.offset
            self.expect("op", ")")
            return "intercept_re", (group,), token.offset
        found = repr(token.text) if token.text else "公式结尾"
        raise FormulaSyntaxError(f"期望模型项，实际为 {found}", token.offset)


def parse_formula(src: str) -> ModelSpec:
    """
    解析模型公式
    Args:
        src: 公式文本，例如 "y ~ 1 + F + (1|G) + (1|G:F) + mp(G,F)"
    Returns:
        ModelSpec: 校验过的模型结构
    """
    if src is None or not src.strip():
        raise FormulaSyntaxError("公式为空", 0)

    response, terms = _Parser(src).parse()

    fixed: List[str] = []
    intercepts: List[str] = []
    interactions: List[Tuple[str, str]] = []
    mult: List[Tuple[str, str]] = []
    seen = set()

    for kind, names, offset in terms:
        if kind == "no_intercept":
            raise FormulaSemanticError("不支持去掉截距 ('0')：参数化依赖总均值")
        if kind == "intercept":
            continue
        key = (kind, frozenset(names)) if kind == "interaction" else (kind, names)
        if key in seen:
            raise FormulaSemanticError(f"重复的模型项: {'/'.join(names)} (offset {offset})")
        seen.add(key)
        if kind == "fixed":
            fixed.append(names[0])
        elif kind == "intercept_re":
            intercepts.append(names[0])
        elif kind == "interaction":
            if names[0] == names[1]:
                raise FormulaSemanticError(f"交互项的两个因子相同: {names[0]}")
            interactions.append(names)
        elif kind == "mult":
            mult.append(names)

    if len(mult) > 1:
        raise UnsupportedModelError("只支持一个乘法项 mp(...)")
    if len(fixed) > 1:
        raise UnsupportedModelError(
            f"均值结构只支持一个固定因子，得到 {fixed}；交叉因子请在读取时用 combine 生成"
        )
    mult_term = mult[0] if mult else None
    if mult_term is not None:
        random_factor, fixed_factor = mult_term
        if fixed_factor not in fixed:
            raise FormulaSemanticError(
                f"乘法项的固定因子 '{fixed_factor}' 不在均值结构中"
            )
        if random_factor == fixed_factor:
            raise FormulaSemanticError("乘法项的随机因子与固定因子不能相同")
    for name in intercepts + [n for pair in interactions for n in pair]:
        if name == response:
            raise FormulaSemanticError(f"响应变量 '{response}' 不能作为分组因子")
    if response in fixed:
        raise FormulaSemanticError(f"响应变量 '{response}' 不能作为固定因子")

    spec = ModelSpec(
        response=response,
        fixed_factors=tuple(fixed),
        random_intercepts=tuple(intercepts),
        random_interactions=tuple(interactions),
        mult_term=mult_term,
    )
    logger.debug(f"公式解析结果: {spec.to_formula()}")
    return spec


def validate_against(ms: ModelSpec, ds: Dataset) -> ModelBinding:
    """
    检查公式引用的列在数据集中存在且至少有两个水平
    Args:
        ms: 模型结构
        ds: 数据集
    Returns:
        ModelBinding: 名称到因子列的绑定
    """
    if ms.response != ds.response_name:
        raise UnknownColumnError(ms.response)
    factors = {}
    for name in ms.referenced_factors():
        if not ds.has_factor(name):
            raise UnknownColumnError(name)
        factor = ds.factor(name)
        observed = int((factor.counts() > 0).sum())
        if observed < 2:
            raise DegenerateFactorError(name, observed)
        factors[name] = factor
    return ModelBinding(ms, ds, factors)
