"""
LTL 公式语法树。

F φ ≡ true U φ，G φ ≡ ¬F¬φ；两种写法在语法上都保留，语义上等价。
阈值可以是数值常量，也可以是自由变量（QFLTL）。
"""
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Mapping, Union


class Op(Enum):
    """原子命题中的比较运算符（不支持等号）"""
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="

    def holds(self, left: float, right: float) -> bool:
        if self is Op.LT:
            return left < right
        if self is Op.LE:
            return left <= right
        if self is Op.GT:
            return left > right
        return left >= right


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class Atom:
    observable: str
    op: Op
    threshold: Union[float, Var]


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Next:
    arg: "Formula"


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Finally:
    arg: "Formula"


@dataclass(frozen=True)
class Globally:
    arg: "Formula"


Formula = Union[TrueF, Atom, Not, And, Or, Implies, Next, Until, Finally, Globally]

FALSE = Not(TrueF())

# 打印时的优先级，与解析器一致：一元 > U > & > | > ->
_PREC = {Implies: 1, Or: 2, And: 3, Until: 4}
_UNARY = {Not: "!", Next: "X", Finally: "F", Globally: "G"}


def _number(value: float) -> str:
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") else text


def format_formula(f: Formula) -> str:
    """规范的具体语法，可被 parse_formula 读回"""
    return _fmt(f, 0)


def _fmt(f: Formula, parent: int) -> str:
    match f:
        case TrueF():
            return "true"
        case Atom(observable, op, threshold):
            value = str(threshold) if isinstance(threshold, Var) else _number(threshold)
            return f"[{observable}] {op.value} {value}"
        case Not(TrueF()):
            return "false"
        case Not(arg) | Next(arg) | Finally(arg) | Globally(arg):
            symbol = _UNARY[type(f)]
            if symbol == "!" and isinstance(arg, (TrueF, Atom)):
                return f"!{_fmt(arg, 5)}"
            return f"{symbol}({_fmt(arg, 0)})"
        case And(left, right) | Or(left, right) | Implies(left, right) | Until(left, right):
            prec = _PREC[type(f)]
            symbol = {And: "&", Or: "|", Implies: "->", Until: "U"}[type(f)]
            # -> 与 U 右结合，& 与 | 左结合
            right_assoc = type(f) in (Implies, Until)
            lhs = _fmt(left, prec + 1 if right_assoc else prec)
            rhs = _fmt(right, prec if right_assoc else prec + 1)
            text = f"{lhs} {symbol} {rhs}"
            return f"({text})" if prec < parent else text
    raise TypeError(f"not a formula: {f!r}")


def children(f: Formula) -> List[Formula]:
    match f:
        case Not(arg) | Next(arg) | Finally(arg) | Globally(arg):
            return [arg]
        case And(left, right) | Or(left, right) | Implies(left, right) | Until(left, right):
            return [left, right]
    return []


def rebuild(f: Formula, args: List[Formula]) -> Formula:
    if isinstance(f, (Not, Next, Finally, Globally)):
        return type(f)(args[0])
    if isinstance(f, (And, Or, Implies, Until)):
        return type(f)(args[0], args[1])
    return f


def atoms(f: Formula) -> List[Atom]:
    """按从左到右的出现顺序列出原子"""
    if isinstance(f, Atom):
        return [f]
    result: List[Atom] = []
    for child in children(f):
        result.extend(atoms(child))
    return result


def free_variables(f: Formula) -> List[str]:
    seen: Dict[str, None] = {}
    for a in atoms(f):
        if isinstance(a.threshold, Var):
            seen.setdefault(a.threshold.name, None)
    return list(seen)


def substitute(f: Formula, values: Mapping[str, float]) -> Formula:
    """用数值替换自由变量；未给出的变量保持不变"""
    if isinstance(f, Atom):
        if isinstance(f.threshold, Var) and f.threshold.name in values:
            return Atom(f.observable, f.op, float(values[f.threshold.name]))
        return f
    return rebuild(f, [substitute(c, values) for c in children(f)])


def depth(f: Formula) -> int:
    return 1 + max((depth(c) for c in children(f)), default=0)
