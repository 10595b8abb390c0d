import math

import numpy as np
import pytest

from ..crn.odesim import Trace, UnknownObservableError
from ..ltl.formula import (
    And,
    Atom,
    Finally,
    Globally,
    Implies,
    Next,
    Not,
    Op,
    Or,
    TrueF,
    Until,
    depth,
    substitute,
)
from ..ltl.monitor import (
    abstract_formula,
    check_trace,
    eval_ltl,
    satisfaction_degree,
    satisfaction_domain,
    violation_degree,
)
from ..ltl.parser import parse_formula

PHI1 = "F([B] > 2 & F([B] < 10))"
PHI2 = "F([B] > 12 & F([B] < 3))"


def test_reachability(oscillating_trace):
    f = parse_formula("F([B] > 7)")
    assert eval_ltl(oscillating_trace, f)
    assert violation_degree(oscillating_trace, f) == 0.0
    assert satisfaction_degree(oscillating_trace, f) == 1.0


def test_oscillation_degrees(oscillating_trace):
    f1, f2 = parse_formula(PHI1), parse_formula(PHI2)
    assert eval_ltl(oscillating_trace, f1)
    assert violation_degree(oscillating_trace, f1) == 0.0
    assert not eval_ltl(oscillating_trace, f2)
    assert violation_degree(oscillating_trace, f2) == 2.0
    assert satisfaction_degree(oscillating_trace, f2) == pytest.approx(1 / 3)


def test_satisfaction_domain_prints_canonically(oscillating_trace):
    qf = abstract_formula(parse_formula(PHI1))
    assert qf.variables == ("y1", "y2")
    assert qf.reference_point == (2.0, 10.0)
    assert str(qf) == "F([B] > y1 & F([B] < y2))"
    domain = satisfaction_domain(oscillating_trace, qf)
    assert domain.format(qf.variables) == "(y1 <= 10 & y2 >= 2)"
    # 两个公式抽象后相同，满足域也相同
    qf2 = abstract_formula(parse_formula(PHI2))
    assert satisfaction_domain(oscillating_trace, qf2) == domain


def test_check_report(oscillating_trace):
    report = check_trace(oscillating_trace, parse_formula(PHI2))
    assert report.holds is False
    assert report.violation_degree == 2.0
    assert report.domain == "(y1 <= 10 & y2 >= 2)"
    assert report.reference_point == [12.0, 3.0]
    again = type(report).model_validate_json(report.model_dump_json())
    assert again == report


def test_unsatisfiable_domain_gives_infinite_degree(oscillating_trace):
    f = parse_formula("G([B] > 1) & F(false)")
    assert violation_degree(oscillating_trace, f) == math.inf
    assert satisfaction_degree(oscillating_trace, f) == 0.0
    report = check_trace(oscillating_trace, f)
    assert report.domain == "false"
    assert "Infinity" in report.model_dump_json()


def test_derivative_observable(oscillating_trace):
    assert eval_ltl(oscillating_trace, parse_formula("F([dB] < -2.9)"))
    assert not eval_ltl(oscillating_trace, parse_formula("G([dB] >= 0)"))


def test_unknown_observable(oscillating_trace):
    with pytest.raises(UnknownObservableError):
        eval_ltl(oscillating_trace, parse_formula("F([C] > 1)"))


def test_free_variables_are_rejected(oscillating_trace):
    with pytest.raises(ValueError):
        eval_ltl(oscillating_trace, parse_formula("F([B] > y1)"))


def test_finite_trace_stutters(oscillating_trace):
    # 末状态无限重复：X 在最后一个状态上保持原值
    last = Trace(["B"], [0.0], [[10.0]], [[0.0]])
    assert eval_ltl(last, parse_formula("X(X([B] >= 10))"))
    assert eval_ltl(last, parse_formula("G([B] > 9) & F([B] < 11)"))
    assert eval_ltl(oscillating_trace, parse_formula("F(G([B] >= 10))"))


# ---------------------------------------------------------------------------
# 与逐点递归定义的比对
# ---------------------------------------------------------------------------

OBSERVABLES = ("A", "B", "dA")
OPS = tuple(Op)


def _random_trace(rng) -> Trace:
    n = int(rng.integers(1, 9))
    t = np.arange(n, dtype=float)
    x = rng.integers(0, 11, size=(n, 2)).astype(float)
    xdot = rng.integers(-5, 6, size=(n, 2)).astype(float)
    return Trace(["A", "B"], t, x, xdot)


def _random_formula(rng, budget: int):
    if budget <= 1 or rng.random() < 0.25:
        if rng.random() < 0.1:
            return TrueF()
        obs = OBSERVABLES[int(rng.integers(len(OBSERVABLES)))]
        return Atom(obs, OPS[int(rng.integers(len(OPS)))], float(rng.integers(-5, 11)))
    kind = int(rng.integers(8))
    sub = lambda: _random_formula(rng, budget - 1)
    if kind == 0:
        return Not(sub())
    if kind == 1:
        return And(sub(), sub())
    if kind == 2:
        return Or(sub(), sub())
    if kind == 3:
        return Implies(sub(), sub())
    if kind == 4:
        return Next(sub())
    if kind == 5:
        return Until(sub(), sub())
    if kind == 6:
        return Finally(sub())
    return Globally(sub())


def _naive(trace: Trace, f, i: int) -> bool:
    last = len(trace) - 1
    if isinstance(f, TrueF):
        return True
    if isinstance(f, Atom):
        return f.op.holds(trace.observable(f.observable)[i], f.threshold)
    if isinstance(f, Not):
        return not _naive(trace, f.arg, i)
    if isinstance(f, And):
        return _naive(trace, f.left, i) and _naive(trace, f.right, i)
    if isinstance(f, Or):
        return _naive(trace, f.left, i) or _naive(trace, f.right, i)
    if isinstance(f, Implies):
        return not _naive(trace, f.left, i) or _naive(trace, f.right, i)
    if isinstance(f, Next):
        return _naive(trace, f.arg, min(i + 1, last))
    if isinstance(f, Finally):
        return any(_naive(trace, f.arg, j) for j in range(i, last + 1))
    if isinstance(f, Globally):
        return all(_naive(trace, f.arg, j) for j in range(i, last + 1))
    if isinstance(f, Until):
        return any(_naive(trace, f.right, j) and all(_naive(trace, f.left, k) for k in range(i, j))
                   for j in range(i, last + 1))
    raise TypeError(f)


def test_eval_matches_pointwise_recursion():
    rng = np.random.default_rng(20240611)
    for _ in range(1200):
        trace = _random_trace(rng)
        f = _random_formula(rng, 4)
        assert depth(f) <= 4
        assert eval_ltl(trace, f) == _naive(trace, f, 0), f


def test_domain_membership_matches_substitution():
    rng = np.random.default_rng(99)
    checked = 0
    while checked < 1200:
        trace = _random_trace(rng)
        f = _random_formula(rng, 4)
        qf = abstract_formula(f)
        if qf.q == 0:
            continue
        domain = satisfaction_domain(trace, qf)
        for _ in range(5):
            # 迹值均为整数，取 .5 偏移的点以避开边界
            y = rng.integers(-6, 12, size=qf.q) + 0.5
            closed = substitute(qf.formula, dict(zip(qf.variables, y)))
            assert (tuple(y) in domain) == eval_ltl(trace, closed), (f, y)
            checked += 1


def test_holding_formula_has_zero_violation():
    rng = np.random.default_rng(5)
    for _ in range(300):
        trace = _random_trace(rng)
        f = _random_formula(rng, 4)
        vd = violation_degree(trace, f)
        assert vd >= 0
        if eval_ltl(trace, f):
            assert vd == 0.0
        assert 0.0 <= satisfaction_degree(trace, f) <= 1.0
