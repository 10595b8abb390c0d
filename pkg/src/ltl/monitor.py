"""
有限数值迹上的 LTL 求值与定量监测。

有限迹 s_0 … s_n 按 s_0 … s_n s_n^ω 解释（末状态无限重复），
因此在最后一个下标上 X φ ≡ φ，φ1 U φ2 ≡ φ2。
"""
import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict

from src.crn.odesim import Trace, UnknownObservableError
from src.ltl.boxset import BoxSet
from src.ltl.formula import (
    And,
    Atom,
    Finally,
    Formula,
    Globally,
    Implies,
    Next,
    Not,
    Or,
    TrueF,
    Until,
    Var,
    children,
    format_formula,
    free_variables,
    rebuild,
)

__all__ = [
    "QFLTLFormula",
    "CheckReport",
    "UnknownObservableError",
    "eval_ltl",
    "abstract_formula",
    "satisfaction_domain",
    "violation_degree",
    "satisfaction_degree",
    "check_trace",
]


@dataclass(frozen=True)
class QFLTLFormula:
    """变量抽象后的公式：每个常量出现处换成 y1..yq，reference_point 为原常量"""
    formula: Formula
    variables: Tuple[str, ...]
    reference_point: Tuple[float, ...]

    @property
    def q(self) -> int:
        return len(self.variables)

    def __str__(self) -> str:
        return format_formula(self.formula)


def _observable(trace: Trace, name: str) -> np.ndarray:
    try:
        return trace.observable(name)
    except UnknownObservableError:
        raise UnknownObservableError(f"formula references unknown observable {name!r}; "
                                     f"known species: {', '.join(trace.species)}")


def _truth(trace: Trace, f: Formula) -> np.ndarray:
    """逐下标的真值向量"""
    n = len(trace)
    match f:
        case TrueF():
            return np.ones(n, dtype=bool)
        case Atom(observable, op, threshold):
            if isinstance(threshold, Var):
                raise ValueError(f"free variable {threshold.name!r} in a closed evaluation")
            values = _observable(trace, observable)
            return np.array([op.holds(v, threshold) for v in values], dtype=bool)
        case Not(arg):
            return ~_truth(trace, arg)
        case And(left, right):
            return _truth(trace, left) & _truth(trace, right)
        case Or(left, right):
            return _truth(trace, left) | _truth(trace, right)
        case Implies(left, right):
            return ~_truth(trace, left) | _truth(trace, right)
        case Next(arg):
            inner = _truth(trace, arg)
            return np.append(inner[1:], inner[-1])
        case Finally(arg):
            return np.logical_or.accumulate(_truth(trace, arg)[::-1])[::-1]
        case Globally(arg):
            return np.logical_and.accumulate(_truth(trace, arg)[::-1])[::-1]
        case Until(left, right):
            a, b = _truth(trace, left), _truth(trace, right)
            out = np.empty(n, dtype=bool)
            out[-1] = b[-1]
            for i in range(n - 2, -1, -1):
                out[i] = b[i] or (a[i] and out[i + 1])
            return out
    raise TypeError(f"not a formula: {f!r}")


def eval_ltl(trace: Trace, f: Formula) -> bool:
    """迹在下标 0 处是否满足封闭公式 f"""
    if free_variables(f):
        raise ValueError(f"formula has free variables: {', '.join(free_variables(f))}")
    return bool(_truth(trace, f)[0])


def abstract_formula(f: Formula) -> QFLTLFormula:
    """按从左到右的出现顺序把每个数值常量替换为新变量 y_i"""
    if free_variables(f):
        raise ValueError(f"formula already has free variables: {', '.join(free_variables(f))}")
    constants: List[float] = []

    def walk(g: Formula) -> Formula:
        if isinstance(g, Atom):
            constants.append(float(g.threshold))
            return Atom(g.observable, g.op, Var(f"y{len(constants)}"))
        return rebuild(g, [walk(c) for c in children(g)])

    abstracted = walk(f)
    return QFLTLFormula(
        formula=abstracted,
        variables=tuple(f"y{i + 1}" for i in range(len(constants))),
        reference_point=tuple(constants),
    )


def _domains(trace: Trace, f: Formula, index: Dict[str, int], q: int) -> List[BoxSet]:
    """逐下标的满足域"""
    n = len(trace)
    match f:
        case TrueF():
            return [BoxSet.universe(q)] * n
        case Atom(observable, op, threshold):
            values = _observable(trace, observable)
            if isinstance(threshold, Var):
                k = index[threshold.name]
                return [BoxSet.half_space(q, k, float(v), op) for v in values]
            return [BoxSet.universe(q) if op.holds(v, threshold) else BoxSet.empty(q) for v in values]
        case Not(arg):
            return [d.complement() for d in _domains(trace, arg, index, q)]
        case And(left, right):
            return [a.intersection(b) for a, b in zip(_domains(trace, left, index, q), _domains(trace, right, index, q))]
        case Or(left, right):
            return [a.union(b) for a, b in zip(_domains(trace, left, index, q), _domains(trace, right, index, q))]
        case Implies(left, right):
            lhs, rhs = _domains(trace, left, index, q), _domains(trace, right, index, q)
            return [a.complement().union(b) for a, b in zip(lhs, rhs)]
        case Next(arg):
            inner = _domains(trace, arg, index, q)
            return inner[1:] + inner[-1:]
        case Finally(arg):
            inner = _domains(trace, arg, index, q)
            out = list(inner)
            for i in range(n - 2, -1, -1):
                out[i] = inner[i].union(out[i + 1])
            return out
        case Globally(arg):
            inner = _domains(trace, arg, index, q)
            out = list(inner)
            for i in range(n - 2, -1, -1):
                out[i] = inner[i].intersection(out[i + 1])
            return out
        case Until(left, right):
            a, b = _domains(trace, left, index, q), _domains(trace, right, index, q)
            out = list(b)
            for i in range(n - 2, -1, -1):
                out[i] = b[i].union(a[i].intersection(out[i + 1]))
            return out
    raise TypeError(f"not a formula: {f!r}")


def satisfaction_domain(trace: Trace, qf: QFLTLFormula) -> BoxSet:
    """D = {y ∈ ℝ^q | trace ⊨ qf(y)}"""
    index = {name: k for k, name in enumerate(qf.variables)}
    missing = [v for v in free_variables(qf.formula) if v not in index]
    if missing:
        raise ValueError(f"variables not declared in the abstraction: {', '.join(missing)}")
    return _domains(trace, qf.formula, index, qf.q)[0]


def violation_degree(trace: Trace, f: Formula) -> float:
    """参考点到满足域（闭包）的欧氏距离；域为空时为 +inf"""
    qf = abstract_formula(f)
    return satisfaction_domain(trace, qf).distance(qf.reference_point)


def satisfaction_degree(trace: Trace, f: Formula) -> float:
    vd = violation_degree(trace, f)
    return 0.0 if math.isinf(vd) else 1.0 / (1.0 + vd)


class CheckReport(BaseModel):
    """check 子命令的输出"""
    model_config = ConfigDict(ser_json_inf_nan="constants")

    formula: str
    abstraction: str
    reference_point: List[float]
    holds: bool
    violation_degree: float
    satisfaction_degree: float
    domain: str


def check_trace(trace: Trace, f: Formula) -> CheckReport:
    """一次性给出布尔判定、vd、sd 与规范打印的满足域"""
    qf = abstract_formula(f)
    domain = satisfaction_domain(trace, qf)
    vd = domain.distance(qf.reference_point)
    report = CheckReport(
        formula=format_formula(f),
        abstraction=str(qf),
        reference_point=list(qf.reference_point),
        holds=eval_ltl(trace, f),
        violation_degree=vd,
        satisfaction_degree=0.0 if math.isinf(vd) else 1.0 / (1.0 + vd),
        domain=domain.format(qf.variables),
    )
    logger.info("checked {}: holds={} vd={:g}", report.formula, report.holds, vd)
    return report
