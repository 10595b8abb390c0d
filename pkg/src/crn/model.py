"""
反应网络模型：物种、质量作用反应、化学计量矩阵、ODE 右端项与区间标记。

同一份网络也可看作连续 Petri 网：库所 = 物种，变迁 = 反应，
弧权 = 化学计量系数，速率 = 动力学常数，初始标记 = 初始浓度。
"""
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, PositiveInt, ValidationError
from scipy.linalg import null_space


class ModelError(ValueError):
    """模型文件错误，附带出错位置"""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


# ---------------------------------------------------------------------------
# 领域类型
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Species:
    name: str
    initial: float

    def __post_init__(self):
        if not self.name:
            raise ValueError("species name must be non-empty")
        if not (self.initial >= 0 and math.isfinite(self.initial)):
            raise ValueError(f"initial concentration of {self.name!r} must be a finite value >= 0")


@dataclass(frozen=True)
class Reaction:
    """不可逆质量作用反应；modifiers 以指数 1 乘入速率，化学计量为 0"""
    id: str
    reactants: Tuple[Tuple[str, int], ...]
    products: Tuple[Tuple[str, int], ...]
    modifiers: Tuple[str, ...] = ()
    rate: float = 0.0

    def __post_init__(self):
        if not self.reactants and not self.products:
            raise ValueError(f"reaction {self.id!r} has neither reactants nor products")
        for name, coeff in self.reactants + self.products:
            if not isinstance(coeff, int) or coeff < 1:
                raise ValueError(f"reaction {self.id!r}: coefficient of {name!r} must be a positive integer")
        touched = {name for name, _ in self.reactants + self.products}
        for name in self.modifiers:
            if name in touched:
                raise ValueError(f"reaction {self.id!r}: modifier {name!r} also appears as reactant or product")
        if not (self.rate >= 0 and math.isfinite(self.rate)):
            raise ValueError(f"reaction {self.id!r}: rate must be a finite value >= 0")

    def reactant_names(self) -> set:
        return {name for name, _ in self.reactants}

    def product_names(self) -> set:
        return {name for name, _ in self.products}

    def involves(self, name: str) -> bool:
        """作为反应物或产物参与（修饰物不算）"""
        return name in self.reactant_names() or name in self.product_names()

    def __str__(self) -> str:
        def side(terms):
            if not terms:
                return "0"
            return " + ".join(name if c == 1 else f"{c}{name}" for name, c in terms)
        mods = f" [{', '.join(self.modifiers)}]" if self.modifiers else ""
        return f"{self.id}: {side(self.reactants)} -> {side(self.products)}{mods}, k={self.rate:g}"


@dataclass(frozen=True)
class ReactionNetwork:
    species: Tuple[Species, ...]
    reactions: Tuple[Reaction, ...]

    def __post_init__(self):
        names = [s.name for s in self.species]
        seen = set()
        for name in names:
            if name in seen:
                raise ValueError(f"duplicate species {name!r}")
            seen.add(name)
        ids = set()
        for r in self.reactions:
            if r.id in ids:
                raise ValueError(f"duplicate reaction id {r.id!r}")
            ids.add(r.id)
            for name in [n for n, _ in r.reactants + r.products] + list(r.modifiers):
                if name not in seen:
                    raise ValueError(f"reaction {r.id!r} references undeclared species {name!r}")

    @property
    def species_names(self) -> Tuple[str, ...]:
        return tuple(s.name for s in self.species)

    @property
    def reaction_ids(self) -> Tuple[str, ...]:
        return tuple(r.id for r in self.reactions)

    def species_index(self, name: str) -> int:
        for i, s in enumerate(self.species):
            if s.name == name:
                return i
        raise KeyError(f"unknown species {name!r}")

    def reaction_index(self, reaction_id: str) -> int:
        for i, r in enumerate(self.reactions):
            if r.id == reaction_id:
                return i
        raise KeyError(f"unknown reaction {reaction_id!r}")

    def initial_vector(self) -> np.ndarray:
        return np.array([s.initial for s in self.species], dtype=float)

    def involvement(self, name: str) -> List[int]:
        """物种以反应物或产物身份出现的反应下标"""
        self.species_index(name)
        return [i for i, r in enumerate(self.reactions) if r.involves(name)]

    def subnetwork(self, reaction_ids: Iterable[str]) -> "ReactionNetwork":
        """保留全部物种，只取给定反应（按原顺序）"""
        wanted = list(reaction_ids)
        for rid in wanted:
            self.reaction_index(rid)
        chosen = tuple(r for r in self.reactions if r.id in set(wanted))
        return ReactionNetwork(self.species, chosen)

    def with_initials(self, initials: Mapping[str, float]) -> "ReactionNetwork":
        species = tuple(Species(s.name, float(initials.get(s.name, s.initial))) for s in self.species)
        return ReactionNetwork(species, self.reactions)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval bounds must be numbers")
        if self.lo < 0 or math.isinf(self.lo):
            raise ValueError(f"interval lower bound must be a finite value >= 0, got {self.lo}")
        if self.lo > self.hi:
            raise ValueError(f"interval lower bound {self.lo} exceeds upper bound {self.hi}")

    @classmethod
    def point(cls, value: float) -> "Interval":
        return cls(value, value)

    @property
    def trivial(self) -> bool:
        return self.lo == self.hi

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    def __str__(self) -> str:
        return f"[{self.lo:g}, {self.hi:g}]"


@dataclass(frozen=True)
class IntervalMarking:
    """物种 -> 区间；对网络中的全部物种都有定义"""
    species: Tuple[str, ...]
    intervals: Tuple[Interval, ...]

    def __post_init__(self):
        if len(self.species) != len(self.intervals):
            raise ValueError("interval marking must give one interval per species")

    @classmethod
    def for_network(cls, net: ReactionNetwork, overrides: Mapping[str, Interval] | None = None) -> "IntervalMarking":
        overrides = dict(overrides or {})
        for name in overrides:
            net.species_index(name)
        intervals = tuple(overrides.get(s.name, Interval.point(s.initial)) for s in net.species)
        return cls(net.species_names, intervals)

    def __getitem__(self, name: str) -> Interval:
        return self.intervals[self.species.index(name)]

    def with_interval(self, name: str, interval: Interval) -> "IntervalMarking":
        if name not in self.species:
            raise KeyError(f"unknown species {name!r}")
        i = self.species.index(name)
        return IntervalMarking(self.species, self.intervals[:i] + (interval,) + self.intervals[i + 1:])

    def non_trivial(self) -> List[str]:
        return [name for name, iv in zip(self.species, self.intervals) if not iv.trivial]

    def is_trivial(self) -> bool:
        return not self.non_trivial()

    def lower(self) -> np.ndarray:
        return np.array([iv.lo for iv in self.intervals], dtype=float)

    def upper(self) -> np.ndarray:
        return np.array([iv.hi for iv in self.intervals], dtype=float)

    def __contains__(self, state) -> bool:
        state = np.asarray(state, dtype=float)
        return len(state) == len(self.intervals) and all(v in iv for v, iv in zip(state, self.intervals))


@dataclass(frozen=True)
class StoichiometricMatrix:
    """Γ[j][i]：反应 i 对物种 j 的净生成量（行 = 物种，列 = 反应）"""
    species: Tuple[str, ...]
    reactions: Tuple[str, ...]
    values: np.ndarray = field(repr=False)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def entry(self, species: str, reaction: str) -> int:
        return int(self.values[self.species.index(species), self.reactions.index(reaction)])

    def submatrix(self, species: Sequence[str], reactions: Sequence[str]) -> np.ndarray:
        rows = [self.species.index(s) for s in species]
        cols = [self.reactions.index(r) for r in reactions]
        return self.values[np.ix_(rows, cols)]


@dataclass(frozen=True)
class Monomial:
    """ODE 中的一个带符号单项式：sign * coefficient * k * prod(x^e)"""
    reaction: str
    sign: int
    coefficient: int
    rate: float
    factors: Tuple[Tuple[str, int], ...]

    def evaluate(self, state: Mapping[str, float]) -> float:
        value = self.sign * self.coefficient * self.rate
        for name, exponent in self.factors:
            value *= state[name] ** exponent
        return value

    def format(self) -> str:
        sign = "-" if self.sign < 0 else "+"
        parts = [] if self.coefficient == 1 else [str(self.coefficient)]
        parts.append(f"k[{self.reaction}]")
        for name, exponent in self.factors:
            parts.append(f"[{name}]" if exponent == 1 else f"[{name}]^{exponent}")
        return f"{sign} {'*'.join(parts)}"


@dataclass(frozen=True)
class ODESystem:
    """质量作用 ODE：terms 为每个物种的单项式和，数组字段用于快速求值"""
    species: Tuple[str, ...]
    reactions: Tuple[str, ...]
    terms: Tuple[Tuple[Monomial, ...], ...]
    gamma: np.ndarray = field(repr=False)
    rates: np.ndarray = field(repr=False)
    exponents: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return len(self.species)

    def fluxes(self, x) -> np.ndarray:
        """各反应通量 v_i = k_i * prod(x^e)"""
        x = np.asarray(x, dtype=float)
        if not self.reactions:
            return np.zeros(0)
        return self.rates * np.prod(x[np.newaxis, :] ** self.exponents, axis=1)

    def __call__(self, x) -> np.ndarray:
        return self.gamma @ self.fluxes(x) if self.reactions else np.zeros(self.dimension)

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        return self(y)

    def evaluate_terms(self, x) -> np.ndarray:
        """直接按单项式求和（慢路径，用于核对 Γ·v）"""
        state = dict(zip(self.species, np.asarray(x, dtype=float)))
        return np.array([sum((m.evaluate(state) for m in row), 0.0) for row in self.terms])

    def format(self) -> str:
        lines = []
        for name, row in zip(self.species, self.terms):
            body = " ".join(m.format() for m in row) if row else "0"
            lines.append(f"d[{name}]/dt = {body}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# 模型文件（JSON）
# ---------------------------------------------------------------------------

class SpeciesEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(min_length=1)
    initial: float = Field(ge=0, allow_inf_nan=False)
    interval: Tuple[float, float] | None = None


class ReactionEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str | None = None
    reactants: List[Tuple[str, PositiveInt]] = []
    products: List[Tuple[str, PositiveInt]] = []
    modifiers: List[str] = []
    rate: float = Field(ge=0, allow_inf_nan=False)
    reverse_rate: float | None = Field(default=None, ge=0, allow_inf_nan=False)
    reverse_id: str | None = None
    reverse_modifiers: List[str] = []


class SimulationEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t_end: float | None = Field(default=None, gt=0)
    output_points: int | None = Field(default=None, ge=2)
    method: str | None = None
    rel_tol: float | None = Field(default=None, gt=0)
    abs_tol: float | None = Field(default=None, gt=0)
    ss_tol: float | None = Field(default=None, gt=0)


class ModelDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    species: List[SpeciesEntry]
    reactions: List[ReactionEntry] = []
    simulation: SimulationEntry | None = None


def _location(loc: Tuple[Any, ...]) -> str:
    text = ""
    for part in loc:
        text += f"[{part}]" if isinstance(part, int) else (f".{part}" if text else str(part))
    return text


def parse_document(text: str) -> ModelDocument:
    """解析并校验模型文件的结构（不做跨字段检查）"""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelError(f"malformed JSON: {e.msg}", f"line {e.lineno}, column {e.colno}")
    try:
        return ModelDocument.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        raise ModelError(first["msg"], _location(tuple(first["loc"])) or "document")


def _build(doc: ModelDocument) -> Tuple[ReactionNetwork, IntervalMarking]:
    species: List[Species] = []
    declared: Dict[str, int] = {}
    overrides: Dict[str, Interval] = {}
    for i, entry in enumerate(doc.species):
        if entry.name in declared:
            raise ModelError(f"duplicate species {entry.name!r}", f"species[{i}].name")
        declared[entry.name] = i
        species.append(Species(entry.name, entry.initial))
        if entry.interval is not None:
            lo, hi = entry.interval
            try:
                interval = Interval(lo, hi)
            except ValueError as e:
                raise ModelError(str(e), f"species[{i}].interval")
            if entry.initial not in interval:
                raise ModelError(f"initial {entry.initial:g} lies outside interval {interval}", f"species[{i}].interval")
            overrides[entry.name] = interval

    def check_names(names: Iterable[str], where: str):
        for j, name in enumerate(names):
            if name not in declared:
                raise ModelError(f"undeclared species {name!r}", f"{where}[{j}]")

    reactions: List[Reaction] = []
    ids: Dict[str, str] = {}

    def add(reaction_id: str, where: str, **kwargs):
        if reaction_id in ids:
            raise ModelError(f"duplicate reaction id {reaction_id!r}", where)
        ids[reaction_id] = where
        try:
            reactions.append(Reaction(id=reaction_id, **kwargs))
        except ValueError as e:
            raise ModelError(str(e), where)

    for i, entry in enumerate(doc.reactions):
        where = f"reactions[{i}]"
        check_names([n for n, _ in entry.reactants], f"{where}.reactants")
        check_names([n for n, _ in entry.products], f"{where}.products")
        check_names(entry.modifiers, f"{where}.modifiers")
        check_names(entry.reverse_modifiers, f"{where}.reverse_modifiers")
        if entry.reverse_rate is None and (entry.reverse_id or entry.reverse_modifiers):
            raise ModelError("reverse_id/reverse_modifiers given without reverse_rate", where)
        forward_id = entry.id or f"r{len(reactions) + 1}"
        reactants = tuple((n, int(c)) for n, c in entry.reactants)
        products = tuple((n, int(c)) for n, c in entry.products)
        add(forward_id, where, reactants=reactants, products=products,
            modifiers=tuple(entry.modifiers), rate=entry.rate)
        if entry.reverse_rate is not None:
            add(entry.reverse_id or f"{forward_id}_rev", where, reactants=products, products=reactants,
                modifiers=tuple(entry.reverse_modifiers), rate=entry.reverse_rate)

    net = ReactionNetwork(tuple(species), tuple(reactions))
    return net, IntervalMarking.for_network(net, overrides)


def parse_model(text: str) -> Tuple[ReactionNetwork, IntervalMarking]:
    """模型文件 -> (规范化网络, 区间标记)；可逆反应展开为两个不可逆反应"""
    net, marking = _build(parse_document(text))
    logger.debug("parsed network: {} species, {} reactions", len(net.species), len(net.reactions))
    return net, marking


def parse_network(text: str) -> ReactionNetwork:
    return parse_model(text)[0]


def load_model(path: str | Path) -> Tuple[ReactionNetwork, IntervalMarking, SimulationEntry]:
    """读取模型文件，同时返回其中的 simulation 配置段（可能为空）"""
    text = Path(path).read_text(encoding="utf-8")
    doc = parse_document(text)
    net, marking = _build(doc)
    logger.info("loaded model {}: {} species, {} reactions", path, len(net.species), len(net.reactions))
    return net, marking, doc.simulation or SimulationEntry()


def serialize_network(net: ReactionNetwork, marking: IntervalMarking | None = None) -> str:
    """规范形式的 JSON（所有反应均为不可逆）"""
    species = []
    for s in net.species:
        entry: Dict[str, Any] = {"name": s.name, "initial": s.initial}
        if marking is not None and not marking[s.name].trivial:
            iv = marking[s.name]
            entry["interval"] = [iv.lo, iv.hi]
        species.append(entry)
    reactions = [
        {
            "id": r.id,
            "reactants": [[n, c] for n, c in r.reactants],
            "products": [[n, c] for n, c in r.products],
            "modifiers": list(r.modifiers),
            "rate": r.rate,
        }
        for r in net.reactions
    ]
    return json.dumps({"species": species, "reactions": reactions}, indent=2)


# ---------------------------------------------------------------------------
# 推导
# ---------------------------------------------------------------------------

def stoichiometric_matrix(net: ReactionNetwork) -> StoichiometricMatrix:
    values = np.zeros((len(net.species), len(net.reactions)), dtype=int)
    for i, r in enumerate(net.reactions):
        for name, coeff in r.reactants:
            values[net.species_index(name), i] -= coeff
        for name, coeff in r.products:
            values[net.species_index(name), i] += coeff
    values.flags.writeable = False
    return StoichiometricMatrix(net.species_names, net.reaction_ids, values)


def derive_odes(net: ReactionNetwork) -> ODESystem:
    """质量作用定律：速率正比于反应物浓度（按化学计量取幂）与修饰物浓度之积"""
    gamma = stoichiometric_matrix(net).values
    exponents = np.zeros((len(net.reactions), len(net.species)), dtype=float)
    factors: List[Tuple[Tuple[str, int], ...]] = []
    for i, r in enumerate(net.reactions):
        row = []
        for name, coeff in r.reactants:
            exponents[i, net.species_index(name)] += coeff
            row.append((name, coeff))
        for name in r.modifiers:
            exponents[i, net.species_index(name)] += 1
            row.append((name, 1))
        factors.append(tuple(row))

    terms = []
    for j in range(len(net.species)):
        row = []
        for i, r in enumerate(net.reactions):
            g = int(gamma[j, i])
            if g != 0:
                row.append(Monomial(r.id, 1 if g > 0 else -1, abs(g), r.rate, factors[i]))
        terms.append(tuple(row))

    return ODESystem(
        species=net.species_names,
        reactions=net.reaction_ids,
        terms=tuple(terms),
        gamma=gamma.astype(float),
        rates=np.array([r.rate for r in net.reactions], dtype=float),
        exponents=exponents,
    )


def conservation_laws(net: ReactionNetwork) -> np.ndarray:
    """Γ 左零空间的正交基（每行一个守恒量 w，满足 w·Γ = 0）"""
    gamma = stoichiometric_matrix(net).values.astype(float)
    if gamma.shape[1] == 0:
        return np.eye(gamma.shape[0])
    return null_space(gamma.T).T


def sample_marking(im: IntervalMarking, rng_seed: int | np.random.SeedSequence) -> np.ndarray:
    """在区间标记内按均匀乘积分布抽取一个初始状态；给定种子时结果确定"""
    for name, iv in zip(im.species, im.intervals):
        if not iv.bounded:
            raise ValueError(f"cannot sample species {name!r}: interval {iv} is unbounded")
    rng = np.random.default_rng(rng_seed)
    lo, hi = im.lower(), im.upper()
    draw = rng.uniform(lo, hi)
    # 平凡区间直接取端点，避免 uniform(c, c) 的舍入
    return np.where(lo == hi, lo, np.clip(draw, lo, hi))
