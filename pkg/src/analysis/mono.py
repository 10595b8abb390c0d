"""
结构单调性：R 图、一致标号与输入-输出单调性判定。

若输出关于输入单调，则区间标记上的 α-鲁棒性只需在输入区间两端各模拟一次。
"""
import asyncio
from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, List, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel

from src.analysis.pool import SimulationPool
from src.analysis.reports import AlphaReport, Strategy, build_alpha_report
from src.crn.model import Interval, ReactionNetwork, derive_odes, stoichiometric_matrix
from src.crn.odesim import SimOptions, SimulationError, find_steady_state

Pair = Tuple[int, int]


@dataclass(frozen=True)
class RGraph:
    """节点为反应下标；边为无序对 (i, j)，i < j"""
    reactions: Tuple[str, ...]
    e_plus: FrozenSet[Pair]
    e_minus: FrozenSet[Pair]

    @property
    def nodes(self) -> range:
        return range(len(self.reactions))


def build_r_graph(net: ReactionNetwork) -> RGraph:
    """E+：一方的产物是另一方的反应物；E−：共享反应物或共享产物。修饰物不参与"""
    plus, minus = set(), set()
    reactions = net.reactions
    for i in range(len(reactions)):
        react_i, prod_i = reactions[i].reactant_names(), reactions[i].product_names()
        for j in range(i + 1, len(reactions)):
            react_j, prod_j = reactions[j].reactant_names(), reactions[j].product_names()
            if prod_i & react_j or prod_j & react_i:
                plus.add((i, j))
            if react_i & react_j or prod_i & prod_j:
                minus.add((i, j))
    return RGraph(net.reaction_ids, frozenset(plus), frozenset(minus))


class ParityUnionFind:
    """带奇偶性的并查集：parity 记录节点与父节点的标号是否相反"""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.parity = [0] * n

    def find(self, k: int) -> Tuple[int, int]:
        path = []
        while self.parent[k] != k:
            path.append(k)
            k = self.parent[k]
        root = k
        # 路径压缩，同时把 parity 改写为相对根节点
        acc = 0
        for node in reversed(path):
            acc ^= self.parity[node]
            self.parity[node] = acc
            self.parent[node] = root
        return root, (self.parity[path[0]] if path else 0)

    def union(self, a: int, b: int, relation: int) -> bool:
        """relation 为 0 表示同号，1 表示异号；矛盾时返回 False"""
        ra, pa = self.find(a)
        rb, pb = self.find(b)
        if ra == rb:
            return (pa ^ pb) == relation
        # 下标较小的根保持为根，使每个分量的首个节点标为 +
        if rb < ra:
            ra, rb, pa, pb = rb, ra, pb, pa
        self.parent[rb] = ra
        self.parity[rb] = pa ^ pb ^ relation
        return True


@dataclass(frozen=True)
class Labeling:
    signs: Tuple[int, ...]

    def __getitem__(self, i: int) -> int:
        return self.signs[i]

    def flipped(self) -> "Labeling":
        return Labeling(tuple(-s for s in self.signs))

    def satisfies(self, graph: RGraph) -> bool:
        return (all(self.signs[i] == self.signs[j] for i, j in graph.e_plus)
                and all(self.signs[i] == -self.signs[j] for i, j in graph.e_minus))

    def as_dict(self, reactions: Sequence[str]) -> Dict[str, str]:
        return {rid: "+" if s > 0 else "-" for rid, s in zip(reactions, self.signs)}


def _propagate(graph: RGraph) -> ParityUnionFind | None:
    uf = ParityUnionFind(len(graph.reactions))
    for i, j in sorted(graph.e_plus):
        if not uf.union(i, j, 0):
            return None
    for i, j in sorted(graph.e_minus):
        if not uf.union(i, j, 1):
            return None
    return uf


def consistent_labeling(g: RGraph) -> Labeling | None:
    """E+ 上同号、E− 上异号；无解时返回 None"""
    uf = _propagate(g)
    if uf is None:
        return None
    return Labeling(tuple(1 if uf.find(i)[1] == 0 else -1 for i in g.nodes))


class MonotonicityKind(str, Enum):
    POSITIVE = "PositivelyMonotonic"
    NEGATIVE = "NegativelyMonotonic"
    INCONCLUSIVE = "Inconclusive"

    @property
    def sign(self) -> int:
        return {"PositivelyMonotonic": 1, "NegativelyMonotonic": -1}.get(self.value, 0)


class MonotonicityVerdict(BaseModel):
    kind: MonotonicityKind
    input: str
    output: str
    reactions: List[str]
    failed_condition: str | None = None
    reason: str | None = None
    witness: Dict[str, str] | None = None
    input_reaction: str | None = None
    output_reaction: str | None = None
    input_product: int | None = None
    output_product: int | None = None

    @property
    def monotone(self) -> bool:
        return self.kind is not MonotonicityKind.INCONCLUSIVE


def _inconclusive(net, input, output, condition: str, reason: str, **extra) -> MonotonicityVerdict:
    logger.info("monotonicity {} -> {} inconclusive: {}", input, output, reason)
    return MonotonicityVerdict(kind=MonotonicityKind.INCONCLUSIVE, input=input, output=output,
                               reactions=list(net.reaction_ids), failed_condition=condition,
                               reason=reason, **extra)


def _check_species(net: ReactionNetwork, *names: str):
    for name in names:
        if name not in net.species_names:
            raise ValueError(f"unknown species {name!r}")


def classify_with_labeling(net: ReactionNetwork, input: str, output: str,
                           labeling: Labeling | None, graph: RGraph | None = None) -> MonotonicityVerdict:
    """按给定标号检查定理的三个条件，并由 Γ·σ 的符号给出单调方向"""
    _check_species(net, input, output)
    if input == output:
        raise ValueError("input and output species must differ")
    graph = graph or build_r_graph(net)
    if labeling is None or not labeling.satisfies(graph):
        return _inconclusive(net, input, output, "labeling", "the R-graph admits no consistent labeling")
    witness = labeling.as_dict(net.reaction_ids)

    in_reactions = net.involvement(input)
    if len(in_reactions) != 1:
        return _inconclusive(net, input, output, "input",
                             f"input species {input!r} is involved in {len(in_reactions)} reactions, expected exactly one",
                             witness=witness)
    out_reactions = net.involvement(output)
    if len(out_reactions) != 1:
        return _inconclusive(net, input, output, "output",
                             f"output species {output!r} is involved in {len(out_reactions)} reactions, expected exactly one",
                             witness=witness)

    i_in, i_out = in_reactions[0], out_reactions[0]
    uf = _propagate(graph)
    if uf.find(i_in)[0] != uf.find(i_out)[0]:
        return _inconclusive(net, input, output, "connectivity",
                             "input and output reactions lie in different components of the R-graph",
                             witness=witness)

    gamma = stoichiometric_matrix(net)
    p_in = gamma.entry(input, net.reactions[i_in].id) * labeling[i_in]
    p_out = gamma.entry(output, net.reactions[i_out].id) * labeling[i_out]
    kind = MonotonicityKind.POSITIVE if np.sign(p_in) != np.sign(p_out) else MonotonicityKind.NEGATIVE
    logger.info("{} is {} with respect to {}", output, kind.value, input)
    return MonotonicityVerdict(
        kind=kind,
        input=input,
        output=output,
        reactions=list(net.reaction_ids),
        witness=witness,
        input_reaction=net.reactions[i_in].id,
        output_reaction=net.reactions[i_out].id,
        input_product=int(p_in),
        output_product=int(p_out),
    )


def classify_monotonicity(net: ReactionNetwork, input: str, output: str) -> MonotonicityVerdict:
    graph = build_r_graph(net)
    return classify_with_labeling(net, input, output, consistent_labeling(graph), graph)


class ChainStep(BaseModel):
    reactions: List[str]
    input: str
    output: str

    @classmethod
    def parse(cls, text: str) -> "ChainStep":
        """'R21,R23:Mek1:PPMek1' 形式"""
        parts = text.split(":")
        if len(parts) != 3 or not all(p.strip() for p in parts):
            raise ValueError(f"chain step must look like 'R1,R2:input:output', got {text!r}")
        reactions = [r.strip() for r in parts[0].split(",") if r.strip()]
        return cls(reactions=reactions, input=parts[1].strip(), output=parts[2].strip())


class ChainVerdict(BaseModel):
    kind: MonotonicityKind
    input: str
    output: str
    steps: List[MonotonicityVerdict]
    reason: str | None = None

    @property
    def monotone(self) -> bool:
        return self.kind is not MonotonicityKind.INCONCLUSIVE


def classify_chain(net: ReactionNetwork, steps: Sequence[ChainStep]) -> ChainVerdict:
    """逐个子网络判定，方向按乘法复合；任一步不确定则整体不确定"""
    if not steps:
        raise ValueError("a monotonicity chain needs at least one step")
    verdicts = []
    for step in steps:
        try:
            sub = net.subnetwork(step.reactions)
        except KeyError as e:
            raise ValueError(str(e).strip("'\""))
        verdicts.append(classify_monotonicity(sub, step.input, step.output))
    sign, reason = 1, None
    for k, v in enumerate(verdicts):
        if not v.monotone:
            sign, reason = 0, f"step {k + 1} ({v.input} -> {v.output}): {v.reason}"
            break
        sign *= v.kind.sign
    kind = {1: MonotonicityKind.POSITIVE, -1: MonotonicityKind.NEGATIVE, 0: MonotonicityKind.INCONCLUSIVE}[sign]
    return ChainVerdict(kind=kind, input=steps[0].input, output=steps[-1].output, steps=verdicts, reason=reason)


async def endpoint_verification_async(
    net: ReactionNetwork,
    input: str,
    input_interval: Interval,
    output: str,
    alpha: float,
    sim: SimOptions,
    verdict: MonotonicityVerdict | ChainVerdict | None = None,
    pool: SimulationPool | None = None,
) -> AlphaReport:
    _check_species(net, input, output)
    if verdict is None:
        verdict = classify_monotonicity(net, input, output)
        if not verdict.monotone:
            logger.warning("{} is not certified monotone in {} ({}); the endpoint result is approximate",
                           output, input, verdict.reason)
    elif not verdict.monotone:
        raise ValueError("endpoint verification requires a monotone verdict")
    if (verdict.input, verdict.output) != (input, output):
        raise ValueError(f"verdict covers {verdict.input} -> {verdict.output}, "
                         f"but the query is {input} -> {output}")
    if not input_interval.bounded:
        raise ValueError(f"input interval {input_interval} is unbounded")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")

    odes = derive_odes(net)
    k = net.species_index(input)
    j = net.species_index(output)
    initials = []
    for value in (input_interval.lo, input_interval.hi):
        x0 = net.initial_vector()
        x0[k] = value
        initials.append(x0)

    def probe(x0):
        _, report = find_steady_state(odes, x0, sim)
        return report.marking[j] if report.reached else None

    results = await (pool or SimulationPool()).map(probe, initials)
    outputs = []
    for x0, result in zip(initials, results):
        if isinstance(result, SimulationError):
            logger.warning("endpoint {}={:g} failed: {}", input, x0[k], result)
            result = None
        elif isinstance(result, BaseException):
            raise result
        outputs.append(result)

    certified = verdict.monotone
    extremes = None
    if certified:
        extremes = (1, 0) if verdict.kind is MonotonicityKind.NEGATIVE else (0, 1)
    report = build_alpha_report(output=output, alpha=alpha, species=net.species_names, initials=initials,
                                outputs=outputs, strategy=Strategy.monotone_endpoints(), exact=certified,
                                extremes=extremes)
    logger.info("endpoint verification of {}: spread={} robust={}", output, report.spread, report.robust)
    return report


def endpoint_verification(net: ReactionNetwork, input: str, input_interval: Interval, output: str,
                          alpha: float, sim: SimOptions,
                          verdict: MonotonicityVerdict | ChainVerdict | None = None) -> AlphaReport:
    """
    两次模拟：输入取区间下端与上端，其余初值不变。
    未给出 verdict 时先在 net 上判定单调性；判定不成立时报告为近似结果。
    """
    return asyncio.run(endpoint_verification_async(net, input, input_interval, output, alpha, sim, verdict))


def to_dot(net: ReactionNetwork, graph: RGraph | None = None, labeling: Labeling | None = None) -> str:
    """带标号的 R 图：E+ 实线，E− 虚线，反应画成矩形"""
    graph = graph or build_r_graph(net)
    lines = ["graph R {", "  node [shape=box];"]
    for i, rid in enumerate(graph.reactions):
        label = rid if labeling is None else f"{rid} {'+' if labeling[i] > 0 else '-'}"
        lines.append(f'  "{rid}" [label="{label}"];')
    for i, j in sorted(graph.e_plus):
        lines.append(f'  "{graph.reactions[i]}" -- "{graph.reactions[j]}" [style=solid];')
    for i, j in sorted(graph.e_minus):
        lines.append(f'  "{graph.reactions[i]}" -- "{graph.reactions[j]}" [style=dashed];')
    lines.append("}")
    return "\n".join(lines) + "\n"
