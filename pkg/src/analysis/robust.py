"""
初始浓度扰动下的鲁棒性：Monte Carlo 鲁棒度估计与 α-鲁棒性判定。

每个样本 / 探测点相互独立，交给 SimulationPool 并行运行；汇总按样本下标
顺序进行，因此结果与完成顺序无关。
"""
import asyncio
import itertools
import math
from dataclasses import dataclass
from typing import List

import numpy as np
from loguru import logger

from src.analysis.mono import ChainVerdict, MonotonicityVerdict, endpoint_verification_async
from src.analysis.pool import SimulationPool
from src.analysis.reports import (
    AlphaReport,
    ProbeRecord,
    RobustnessReport,
    Strategy,
    StrategyKind,
    build_alpha_report,
)
from src.crn.model import IntervalMarking, ReactionNetwork, derive_odes, sample_marking
from src.crn.odesim import SimOptions, SimulationError, UnknownObservableError, find_steady_state, simulate
from src.ltl.formula import And, Atom, Finally, Formula, Globally, Op, atoms, format_formula, free_variables
from src.ltl.monitor import satisfaction_degree


@dataclass(frozen=True)
class RobustnessQuery:
    network: ReactionNetwork
    marking: IntervalMarking
    formula: Formula
    samples: int
    seed: int
    sim: SimOptions
    keep_samples: bool = False


@dataclass(frozen=True)
class AlphaQuery:
    network: ReactionNetwork
    marking: IntervalMarking
    output: str
    alpha: float
    strategy: Strategy
    sim: SimOptions
    # 端点法的输入物种；缺省时取唯一的非平凡区间物种
    input: str | None = None
    verdict: MonotonicityVerdict | ChainVerdict | None = None


def _check_marking(net: ReactionNetwork, marking: IntervalMarking):
    if marking.species != net.species_names:
        raise ValueError("interval marking does not match the network species")
    for name, iv in zip(marking.species, marking.intervals):
        if not iv.bounded:
            raise ValueError(f"interval of species {name!r} is unbounded")


def _check_formula(net: ReactionNetwork, f: Formula):
    if free_variables(f):
        raise ValueError(f"formula has free variables: {', '.join(free_variables(f))}")
    known = set(net.species_names) | {f"d{name}" for name in net.species_names}
    for atom in atoms(f):
        if atom.observable not in known:
            raise UnknownObservableError(f"formula references unknown observable {atom.observable!r}")


def _seeded_samples(marking: IntervalMarking, n: int, seed: int) -> List[np.ndarray]:
    # 每个样本一个独立的子流：样本 i 与样本总数无关
    return [sample_marking(marking, np.random.SeedSequence([seed, i])) for i in range(n)]


async def estimate_robustness_async(q: RobustnessQuery, pool: SimulationPool | None = None) -> RobustnessReport:
    if q.samples < 1:
        raise ValueError("samples must be >= 1")
    if q.seed < 0:
        raise ValueError("seed must be >= 0")
    _check_marking(q.network, q.marking)
    _check_formula(q.network, q.formula)

    odes = derive_odes(q.network)
    if q.marking.is_trivial():
        initials = [q.marking.lower()]
    else:
        initials = _seeded_samples(q.marking, q.samples, q.seed)

    def probe(x0):
        return satisfaction_degree(simulate(odes, x0, q.sim), q.formula)

    results = await (pool or SimulationPool()).map(probe, initials)
    records, failures, degrees = [], [], []
    for i, (x0, result) in enumerate(zip(initials, results)):
        if isinstance(result, SimulationError):
            logger.warning("sample {} excluded: {}", i, result)
            failures.append([float(v) for v in x0])
            result = None
        elif isinstance(result, BaseException):
            raise result
        else:
            degrees.append(float(result))
        records.append(ProbeRecord(index=i, initial=[float(v) for v in x0], value=result))

    if failures:
        logger.warning("{} of {} samples failed to simulate", len(failures), len(initials))
    if not degrees:
        raise SimulationError("every sample failed to simulate")

    n = len(degrees)
    estimate = math.fsum(degrees) / n
    std_error = float(np.std(degrees, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
    report = RobustnessReport(
        estimate=estimate,
        std_error=std_error,
        samples_used=n,
        samples_requested=q.samples,
        formula=format_formula(q.formula),
        failures=failures,
        species=list(q.network.species_names),
        per_sample=records if q.keep_samples else None,
    )
    logger.info("robustness of {}: {:.6g} +/- {:.2g} over {} samples", report.formula, estimate, std_error, n)
    return report


def estimate_robustness(q: RobustnessQuery) -> RobustnessReport:
    """均匀乘积分布下 sd 的期望的 Monte Carlo 估计；给定 seed 时逐位可复现"""
    return asyncio.run(estimate_robustness_async(q))


def _grid_points(marking: IntervalMarking, points: int) -> List[np.ndarray]:
    axes = [np.linspace(iv.lo, iv.hi, points) if not iv.trivial else np.array([iv.lo])
            for iv in marking.intervals]
    return [np.array(p, dtype=float) for p in itertools.product(*axes)]


def _endpoint_input(q: AlphaQuery) -> str:
    varying = q.marking.non_trivial()
    if q.input is not None:
        if q.input not in q.network.species_names:
            raise ValueError(f"unknown species {q.input!r}")
        if any(name != q.input for name in varying):
            raise ValueError(f"monotone_endpoints allows only {q.input!r} to vary, "
                             f"but the marking also varies {', '.join(n for n in varying if n != q.input)}")
        return q.input
    if len(varying) != 1:
        raise ValueError(f"monotone_endpoints needs exactly one non-trivial interval, got {len(varying)}")
    return varying[0]


async def check_alpha_robustness_async(q: AlphaQuery, pool: SimulationPool | None = None) -> AlphaReport:
    if not q.alpha >= 0 or math.isinf(q.alpha):
        raise ValueError("alpha must be a finite value >= 0")
    if q.output not in q.network.species_names:
        raise ValueError(f"unknown output species {q.output!r}")
    _check_marking(q.network, q.marking)
    pool = pool or SimulationPool()

    if q.strategy.kind is StrategyKind.MONOTONE_ENDPOINTS:
        name = _endpoint_input(q)
        # 其余物种取区间内的（唯一）值
        net = q.network.with_initials(dict(zip(q.marking.species, q.marking.lower())))
        return await endpoint_verification_async(net, name, q.marking[name], q.output, q.alpha,
                                                 q.sim, verdict=q.verdict, pool=pool)

    if q.strategy.kind is StrategyKind.GRID:
        initials = _grid_points(q.marking, q.strategy.points or 20)
    else:
        if q.strategy.samples is None or q.strategy.seed is None:
            raise ValueError("monte_carlo strategy needs samples and seed")
        if q.marking.is_trivial():
            initials = [q.marking.lower()]
        else:
            initials = _seeded_samples(q.marking, q.strategy.samples, q.strategy.seed)

    odes = derive_odes(q.network)
    j = q.network.species_index(q.output)

    def probe(x0):
        _, report = find_steady_state(odes, x0, q.sim)
        return report.marking[j] if report.reached else None

    results = await pool.map(probe, initials)
    outputs = []
    for x0, result in zip(initials, results):
        if isinstance(result, SimulationError):
            logger.warning("steady-state probe at {} failed: {}", list(x0), result)
            result = None
        elif isinstance(result, BaseException):
            raise result
        outputs.append(result)

    report = build_alpha_report(output=q.output, alpha=q.alpha, species=q.network.species_names,
                                initials=initials, outputs=outputs, strategy=q.strategy, exact=False)
    logger.info("alpha check of {} with {}: spread={} robust={} ({})",
                q.output, q.strategy, report.spread, report.robust, report.status.value)
    return report


def check_alpha_robustness(q: AlphaQuery) -> AlphaReport:
    """在每个探测初值上求稳态输出，spread ≤ α 时判为鲁棒；center_k 取输出区间中点"""
    return asyncio.run(check_alpha_robustness_async(q))


def steady_window_formula(output: str, lo: float, hi: float) -> Formula:
    """F(G([O] >= lo & [O] <= hi))：窗口宽度 hi - lo 即 α"""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("window bounds must be finite")
    if lo > hi:
        raise ValueError(f"window lower bound {lo:g} exceeds upper bound {hi:g}")
    window = And(Atom(output, Op.GE, float(lo)), Atom(output, Op.LE, float(hi)))
    return Finally(Globally(window))
