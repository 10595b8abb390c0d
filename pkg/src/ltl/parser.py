"""
LTL 公式的词法与递归下降语法分析。

    implies := or ('->' implies)?
    or      := and ('|' and)*
    and     := until ('&' until)*
    until   := unary ('U' until)?
    unary   := ('!' | 'F' | 'G' | 'X') unary | primary
    primary := 'true' | 'false' | '(' implies ')' | '[' NAME ']' OP threshold
"""
import re
from dataclasses import dataclass
from typing import List

from loguru import logger

from src.ltl.formula import (
    FALSE,
    And,
    Atom,
    Finally,
    Formula,
    Globally,
    Implies,
    Next,
    Not,
    Op,
    Or,
    TrueF,
    Until,
    Var,
)


class FormulaSyntaxError(ValueError):
    """带 0 起始字符位置的语法错误"""

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} at position {position}")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<obs>\[\s*[A-Za-z_][A-Za-z0-9_]*\s*\])
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<op><=|>=|<|>)
  | (?P<arrow>->)
  | (?P<minus>-)
  | (?P<punct>[()&|!])
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)

_KEYWORDS = {"F", "G", "X", "U", "true", "false"}


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            value = m.group()
            if kind == "name" and value in _KEYWORDS:
                kind = value
            elif kind == "punct":
                kind = value
            tokens.append(Token(kind, value, pos))
        pos = m.end()
    tokens.append(Token("eof", "", len(text)))
    return tokens


class Parser:
    def __init__(self, tokens: List[Token]):
        self._tokens = tokens
        self._index = 0

    @property
    def token(self) -> Token:
        return self._tokens[self._index]

    def advance(self) -> Token:
        token = self.token
        if token.kind != "eof":
            self._index += 1
        return token

    def expect(self, kind: str) -> Token:
        if self.token.kind != kind:
            self.fail(f"expected {kind!r}")
        return self.advance()

    def fail(self, message: str):
        token = self.token
        found = "end of input" if token.kind == "eof" else repr(token.text)
        raise FormulaSyntaxError(f"{message}, found {found}", token.pos)

    def parse(self) -> Formula:
        f = self.implies()
        if self.token.kind != "eof":
            self.fail("unexpected token")
        return f

    def implies(self) -> Formula:
        left = self.disjunction()
        if self.token.kind == "arrow":
            self.advance()
            return Implies(left, self.implies())
        return left

    def disjunction(self) -> Formula:
        left = self.conjunction()
        while self.token.kind == "|":
            self.advance()
            left = Or(left, self.conjunction())
        return left

    def conjunction(self) -> Formula:
        left = self.until()
        while self.token.kind == "&":
            self.advance()
            left = And(left, self.until())
        return left

    def until(self) -> Formula:
        left = self.unary()
        if self.token.kind == "U":
            self.advance()
            return Until(left, self.until())
        return left

    def unary(self) -> Formula:
        kind = self.token.kind
        if kind in ("!", "F", "G", "X"):
            self.advance()
            arg = self.unary()
            return {"!": Not, "F": Finally, "G": Globally, "X": Next}[kind](arg)
        return self.primary()

    def primary(self) -> Formula:
        token = self.token
        if token.kind == "true":
            self.advance()
            return TrueF()
        if token.kind == "false":
            self.advance()
            return FALSE
        if token.kind == "(":
            self.advance()
            f = self.implies()
            self.expect(")")
            return f
        if token.kind == "obs":
            return self.atom()
        self.fail("expected a formula")

    def atom(self) -> Atom:
        observable = self.advance().text[1:-1].strip()
        if self.token.kind != "op":
            self.fail("expected a comparison operator")
        op = Op(self.advance().text)
        negative = False
        if self.token.kind == "minus":
            self.advance()
            negative = True
        token = self.token
        if token.kind == "num":
            self.advance()
            value = float(token.text)
            return Atom(observable, op, -value if negative else value)
        if token.kind == "name" and not negative:
            self.advance()
            return Atom(observable, op, Var(token.text))
        self.fail("expected a number or a variable")


def parse_formula(text: str) -> Formula:
    """解析具体语法，如 F([B] > 2 & F([B] < 10))"""
    f = Parser(tokenize(text)).parse()
    logger.debug("parsed formula {!r}", text)
    return f
