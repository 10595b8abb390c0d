"""鲁棒性分析的报告与策略类型（pydantic，可无损地写出 / 读回 JSON）"""
import csv
from enum import Enum
from pathlib import Path
from typing import List, Sequence

from pydantic import BaseModel, ConfigDict, Field


class StrategyKind(str, Enum):
    GRID = "grid"
    MONTE_CARLO = "monte_carlo"
    MONOTONE_ENDPOINTS = "monotone_endpoints"


class Strategy(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: StrategyKind
    points: int | None = Field(default=None, ge=1)
    samples: int | None = Field(default=None, ge=1)
    seed: int | None = Field(default=None, ge=0)

    @classmethod
    def grid(cls, n: int) -> "Strategy":
        return cls(kind=StrategyKind.GRID, points=n)

    @classmethod
    def monte_carlo(cls, n: int, seed: int) -> "Strategy":
        return cls(kind=StrategyKind.MONTE_CARLO, samples=n, seed=seed)

    @classmethod
    def monotone_endpoints(cls) -> "Strategy":
        return cls(kind=StrategyKind.MONOTONE_ENDPOINTS)

    def __str__(self) -> str:
        if self.kind is StrategyKind.GRID:
            return f"grid({self.points})"
        if self.kind is StrategyKind.MONTE_CARLO:
            return f"monte_carlo({self.samples}, {self.seed})"
        return "monotone_endpoints"


class AlphaStatus(str, Enum):
    # 单调端点法：在积分误差内精确
    VERIFIED = "verified"
    # 网格 / Monte Carlo：只覆盖探测集
    APPROXIMATE = "approximate"
    # 有探测点未达到稳态
    UNDETERMINED = "undetermined"


class ProbeRecord(BaseModel):
    index: int
    initial: List[float]
    value: float | None = None


class AlphaReport(BaseModel):
    robust: bool
    status: AlphaStatus
    exact: bool
    alpha: float
    output: str
    observed_min: float | None = None
    observed_max: float | None = None
    spread: float | None = None
    center_k: float | None = None
    strategy_used: str
    probes: int
    failures: List[List[float]] = []
    species: List[str] = []
    per_probe: List[ProbeRecord] = []


class RobustnessReport(BaseModel):
    estimate: float
    std_error: float
    samples_used: int
    samples_requested: int
    formula: str
    failures: List[List[float]] = []
    species: List[str] = []
    per_sample: List[ProbeRecord] | None = None


def build_alpha_report(
    *,
    output: str,
    alpha: float,
    species: Sequence[str],
    initials: Sequence[Sequence[float]],
    outputs: Sequence[float | None],
    strategy: Strategy,
    exact: bool,
    extremes: tuple[int, int] | None = None,
) -> AlphaReport:
    """
    汇总各探测点的稳态输出。outputs 中 None 表示该初值未达到稳态。
    extremes 给出 (最小, 最大) 所在的探测下标；缺省时直接取 min / max。
    """
    records = [ProbeRecord(index=i, initial=[float(v) for v in x0], value=out)
               for i, (x0, out) in enumerate(zip(initials, outputs))]
    failures = [r.initial for r in records if r.value is None]
    values = [r.value for r in records if r.value is not None]
    lo = hi = spread = center = None
    if values:
        if extremes is not None and not failures:
            lo, hi = outputs[extremes[0]], outputs[extremes[1]]
            spread = abs(hi - lo)
        else:
            lo, hi = min(values), max(values)
            spread = hi - lo
        center = (lo + hi) / 2
    if failures:
        status = AlphaStatus.UNDETERMINED
    else:
        status = AlphaStatus.VERIFIED if exact else AlphaStatus.APPROXIMATE
    return AlphaReport(
        robust=not failures and spread is not None and spread <= alpha,
        status=status,
        exact=exact and not failures,
        alpha=alpha,
        output=output,
        observed_min=lo,
        observed_max=hi,
        spread=spread,
        center_k=center,
        strategy_used=str(strategy),
        probes=len(records),
        failures=failures,
        species=list(species),
        per_probe=records,
    )


def write_samples_csv(path: str | Path, species: Sequence[str], records: Sequence[ProbeRecord], value_name: str) -> None:
    """sample_index, <各物种初值>, <value_name>；失败的样本值留空"""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["sample_index", *species, value_name])
        for r in records:
            value = "" if r.value is None else f"{r.value:.17g}"
            writer.writerow([r.index, *(f"{v:.17g}" for v in r.initial), value])
