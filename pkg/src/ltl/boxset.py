"""
满足域的表示：ℝ^q 中有限个轴对齐盒子（可无界、可开可闭）的并集。

每个原子只约束一个自由变量，因此 LTL 展开得到的域都是这种形式，
补集与欧氏距离都可以精确计算。距离与打印使用闭包。
"""
import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

from src.ltl.formula import Op

INF = math.inf


@dataclass(frozen=True)
class Span:
    """一维区间；无穷端点的 closed 标志无意义，统一为 False"""
    lo: float = -INF
    hi: float = INF
    lo_closed: bool = False
    hi_closed: bool = False

    def __post_init__(self):
        if math.isinf(self.lo) and self.lo_closed:
            object.__setattr__(self, "lo_closed", False)
        if math.isinf(self.hi) and self.hi_closed:
            object.__setattr__(self, "hi_closed", False)

    @property
    def empty(self) -> bool:
        if self.lo > self.hi:
            return True
        if self.lo == self.hi:
            return math.isinf(self.lo) or not (self.lo_closed and self.hi_closed)
        return False

    @property
    def full(self) -> bool:
        return self.lo == -INF and self.hi == INF

    def __contains__(self, v: float) -> bool:
        above = self.lo < v or (self.lo == v and self.lo_closed)
        below = v < self.hi or (v == self.hi and self.hi_closed)
        return above and below

    def covers(self, other: "Span") -> bool:
        """other ⊆ self（other 非空）"""
        lo_ok = self.lo < other.lo or (self.lo == other.lo and (self.lo_closed or not other.lo_closed))
        hi_ok = other.hi < self.hi or (self.hi == other.hi and (self.hi_closed or not other.hi_closed))
        return lo_ok and hi_ok

    def intersect(self, other: "Span") -> "Span":
        if self.lo > other.lo:
            lo, lo_closed = self.lo, self.lo_closed
        elif other.lo > self.lo:
            lo, lo_closed = other.lo, other.lo_closed
        else:
            lo, lo_closed = self.lo, self.lo_closed and other.lo_closed
        if self.hi < other.hi:
            hi, hi_closed = self.hi, self.hi_closed
        elif other.hi < self.hi:
            hi, hi_closed = other.hi, other.hi_closed
        else:
            hi, hi_closed = self.hi, self.hi_closed and other.hi_closed
        return Span(lo, hi, lo_closed, hi_closed)

    def gap(self, v: float) -> float:
        """v 到闭包的距离"""
        if v < self.lo:
            return self.lo - v
        if v > self.hi:
            return v - self.hi
        return 0.0


@dataclass(frozen=True)
class Box:
    spans: Tuple[Span, ...]

    @classmethod
    def universe(cls, dim: int) -> "Box":
        return cls(tuple(Span() for _ in range(dim)))

    @property
    def empty(self) -> bool:
        return any(s.empty for s in self.spans)

    def __contains__(self, point: Sequence[float]) -> bool:
        return all(v in s for v, s in zip(point, self.spans))

    def covers(self, other: "Box") -> bool:
        return all(a.covers(b) for a, b in zip(self.spans, other.spans))

    def intersect(self, other: "Box") -> "Box":
        return Box(tuple(a.intersect(b) for a, b in zip(self.spans, other.spans)))

    def distance(self, point: Sequence[float]) -> float:
        return math.hypot(*(s.gap(v) for v, s in zip(point, self.spans)))

    def complement(self) -> List["Box"]:
        """不要求互不相交：每个有限端点外侧给一个半空间"""
        dim = len(self.spans)
        pieces = []
        for k, s in enumerate(self.spans):
            if s.lo != -INF:
                pieces.append(_replace(Box.universe(dim), k, Span(-INF, s.lo, False, not s.lo_closed)))
            if s.hi != INF:
                pieces.append(_replace(Box.universe(dim), k, Span(s.hi, INF, not s.hi_closed, False)))
        return pieces


def _replace(box: Box, k: int, span: Span) -> Box:
    return Box(box.spans[:k] + (span,) + box.spans[k + 1:])


def _prune(boxes: Iterable[Box]) -> Tuple[Box, ...]:
    """去掉空盒与被其他盒子包含的盒子"""
    kept: List[Box] = []
    for box in boxes:
        if box.empty or any(k.covers(box) for k in kept):
            continue
        kept = [k for k in kept if not box.covers(k)]
        kept.append(box)
    return tuple(kept)


@dataclass(frozen=True)
class BoxSet:
    dim: int
    boxes: Tuple[Box, ...] = ()

    @classmethod
    def empty(cls, dim: int) -> "BoxSet":
        return cls(dim, ())

    @classmethod
    def universe(cls, dim: int) -> "BoxSet":
        return cls(dim, (Box.universe(dim),))

    @classmethod
    def of(cls, dim: int, boxes: Iterable[Box]) -> "BoxSet":
        return cls(dim, _prune(boxes))

    @classmethod
    def half_space(cls, dim: int, k: int, value: float, op: Op) -> "BoxSet":
        """原子 value op y_k 对应的约束（value 为迹上的记录值）"""
        if math.isnan(value):
            return cls.empty(dim)
        if op is Op.GT:
            span = Span(-INF, value, False, False)
        elif op is Op.GE:
            span = Span(-INF, value, False, True)
        elif op is Op.LT:
            span = Span(value, INF, False, False)
        else:
            span = Span(value, INF, True, False)
        return cls.of(dim, [_replace(Box.universe(dim), k, span)])

    @property
    def is_empty(self) -> bool:
        return not self.boxes

    def __contains__(self, point: Sequence[float]) -> bool:
        return any(point in box for box in self.boxes)

    def union(self, other: "BoxSet") -> "BoxSet":
        if other.is_empty:
            return self
        if self.is_empty:
            return other
        return BoxSet.of(self.dim, self.boxes + other.boxes)

    def intersection(self, other: "BoxSet") -> "BoxSet":
        if self.is_empty or other.is_empty:
            return BoxSet.empty(self.dim)
        return BoxSet.of(self.dim, (a.intersect(b) for a in self.boxes for b in other.boxes))

    def complement(self) -> "BoxSet":
        result = BoxSet.universe(self.dim)
        for box in self.boxes:
            result = result.intersection(BoxSet.of(self.dim, box.complement()))
            if result.is_empty:
                break
        return result

    def distance(self, point: Sequence[float]) -> float:
        """到闭包的欧氏距离；空集为 +inf"""
        return min((box.distance(point) for box in self.boxes), default=INF)

    def format(self, names: Sequence[str] | None = None) -> str:
        """析取范式，闭包边界，例如 (y1 <= 10 & y2 >= 2)"""
        if self.is_empty:
            return "false"
        names = list(names) if names is not None else [f"y{k + 1}" for k in range(self.dim)]
        parts = []
        for box in self.boxes:
            constraints = []
            for name, s in zip(names, box.spans):
                if s.lo == s.hi:
                    constraints.append(f"{name} = {_number(s.lo)}")
                    continue
                if s.lo != -INF:
                    constraints.append(f"{name} >= {_number(s.lo)}")
                if s.hi != INF:
                    constraints.append(f"{name} <= {_number(s.hi)}")
            if not constraints:
                return "true"
            parts.append("(" + " & ".join(constraints) + ")")
        return " | ".join(parts)

    def __str__(self) -> str:
        return self.format()


def _number(value: float) -> str:
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") else text
