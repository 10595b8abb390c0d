"""
命令行入口：python -m src.cli <command> ...

退出码：0 成功；1 输入错误（模型、公式、参数）；2 数值失败（积分失败、稳态不可达）。
"""
import argparse
import asyncio
import sys
from pathlib import Path
from typing import Dict, List, Literal, Tuple

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from src.analysis.mono import (
    ChainStep,
    ChainVerdict,
    MonotonicityVerdict,
    build_r_graph,
    classify_chain,
    classify_monotonicity,
    consistent_labeling,
    to_dot,
)
from src.analysis.pool import SimulationPool
from src.analysis.reports import AlphaReport, AlphaStatus, Strategy, write_samples_csv
from src.analysis.robust import AlphaQuery, RobustnessQuery, check_alpha_robustness_async, estimate_robustness_async
from src.crn.config import METHODS, settings
from src.crn.model import Interval, derive_odes, load_model
from src.crn.odesim import SimOptions, SimulationError, Trace, find_steady_state, simulate
from src.ltl.monitor import check_trace
from src.ltl.parser import parse_formula

DEFAULT_T_END = 100.0


class RunConfig(BaseModel):
    """一次命令调用的全部参数；在任何模拟开始之前完成校验"""
    model_config = ConfigDict(frozen=True, extra="ignore")

    command: Literal["simulate", "check", "robustness", "monotonicity", "alpha-check"]
    model: Path | None = None
    formula: str | None = None
    trace: Path | None = None
    input: str | None = None
    output: str | None = None
    alpha: float | None = Field(default=None, ge=0, allow_inf_nan=False)
    strategy: Literal["grid", "monte_carlo", "monotone_endpoints"] = "grid"
    points: int = Field(default=20, ge=1)
    samples: int = Field(default=100, ge=1)
    seed: int = Field(default=0, ge=0)
    intervals: Dict[str, Tuple[float, float]] = {}
    reactions: List[str] | None = None
    chain: List[str] = []
    auto: bool = False
    t_end: float | None = Field(default=None, gt=0, allow_inf_nan=False)
    output_points: int | None = Field(default=None, ge=2)
    rel_tol: float | None = Field(default=None, gt=0)
    abs_tol: float | None = Field(default=None, gt=0)
    ss_tol: float | None = Field(default=None, gt=0)
    method: str | None = None
    workers: int | None = Field(default=None, ge=1)
    json_path: Path | None = None
    out: Path | None = None
    emit_samples: Path | None = None
    dot: Path | None = None
    log_level: str = Field(default_factory=lambda: settings.log_level)


class AutoAlphaResult(BaseModel):
    """alpha-check --auto 的输出：单调性判定与所用策略的报告"""
    verdict: MonotonicityVerdict | ChainVerdict
    fallback: bool
    report: AlphaReport


class _Parser(argparse.ArgumentParser):
    # 参数错误按输入错误处理（退出码 1），而不是 argparse 默认的 2
    def error(self, message):
        raise ValueError(f"{self.prog}: {message}")


def _interval_arg(text: str) -> Tuple[str, Tuple[float, float]]:
    name, sep, bounds = text.partition("=")
    lo, sep2, hi = bounds.partition(":")
    try:
        if not (sep and sep2 and name.strip()):
            raise ValueError
        return name.strip(), (float(lo), float(hi))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NAME=LO:HI, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed for sampling")
    common.add_argument("--rel-tol", type=float, help="integrator relative tolerance")
    common.add_argument("--abs-tol", type=float, help="integrator absolute tolerance")
    common.add_argument("--ss-tol", type=float, help="steady-state derivative tolerance")
    common.add_argument("--method", choices=METHODS, help="integration method")
    common.add_argument("--t-end", type=float, help="simulation horizon")
    common.add_argument("--output-points", type=int, help="number of output grid points")
    common.add_argument("--workers", type=int, help="parallel simulations")
    common.add_argument("--json", dest="json_path", type=Path, help="also write the JSON report to this file")
    common.add_argument("--log-level", default=settings.log_level, type=str.upper)

    parser = _Parser(prog="crn-robust", description="robustness analysis of chemical reaction networks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a model and report its steady state")
    p.add_argument("model", type=Path)
    p.add_argument("--out", type=Path, help="trace CSV path")

    p = sub.add_parser("check", parents=[common], help="evaluate an LTL formula on a trace")
    p.add_argument("model", type=Path, nargs="?")
    p.add_argument("--formula", required=True)
    p.add_argument("--trace", type=Path, help="monitor a stored trace CSV instead of simulating")

    p = sub.add_parser("robustness", parents=[common], help="estimate the robustness degree of a formula")
    p.add_argument("model", type=Path)
    p.add_argument("--formula", required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--interval", dest="intervals", type=_interval_arg, action="append", default=[])
    p.add_argument("--emit-samples", type=Path)

    p = sub.add_parser("monotonicity", parents=[common], help="structural input-output monotonicity")
    p.add_argument("model", type=Path)
    p.add_argument("--input")
    p.add_argument("--output")
    p.add_argument("--reactions", type=lambda s: [r.strip() for r in s.split(",") if r.strip()],
                   help="comma-separated reaction ids of the sub-network")
    p.add_argument("--chain", action="append", default=[], help="sub-network step 'R1,R2:input:output'")
    p.add_argument("--dot", type=Path, help="write the labelled R-graph in DOT format")

    p = sub.add_parser("alpha-check", parents=[common], help="decide alpha-robustness of a steady-state output")
    p.add_argument("model", type=Path)
    p.add_argument("--output", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--strategy", choices=["grid", "monte_carlo", "monotone_endpoints"], default="grid")
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--input")
    p.add_argument("--auto", action="store_true", help="use two simulations when monotonicity is certified")
    p.add_argument("--chain", action="append", default=[])
    p.add_argument("--interval", dest="intervals", type=_interval_arg, action="append", default=[])
    p.add_argument("--emit-samples", type=Path)
    return parser


def parse_config(argv: List[str] | None = None) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    if "intervals" in args:
        args["intervals"] = dict(args["intervals"])
    return RunConfig(**args)


def _setup_logging(level: str):
    logger.remove()
    logger.add(sys.stderr, level=level, format="{time:HH:mm:ss} | {level: <7} | {name}:{line} - {message}")


def _emit(config: RunConfig, report: BaseModel):
    text = report.model_dump_json(indent=2)
    print(text)
    if config.json_path is not None:
        config.json_path.write_text(text + "\n", encoding="utf-8")


def _load(config: RunConfig):
    net, marking, entry = load_model(config.model)
    for name, (lo, hi) in config.intervals.items():
        if name not in net.species_names:
            raise ValueError(f"--interval: unknown species {name!r}")
        marking = marking.with_interval(name, Interval(lo, hi))
    sim = SimOptions.from_entry(
        entry,
        t_end=config.t_end or entry.t_end or DEFAULT_T_END,
        output_points=config.output_points,
        rel_tol=config.rel_tol,
        abs_tol=config.abs_tol,
        ss_tol=config.ss_tol,
        method=config.method,
    )
    return net, marking, sim


def cmd_simulate(config: RunConfig) -> int:
    net, _, sim = _load(config)
    odes = derive_odes(net)
    trace = simulate(odes, net.initial_vector(), sim)
    if config.out is not None:
        trace.to_csv(config.out)
        logger.info("wrote {} states to {}", len(trace), config.out)
    _, report = find_steady_state(odes, net.initial_vector(), sim)
    _emit(config, report)
    return 0


def cmd_check(config: RunConfig) -> int:
    formula = parse_formula(config.formula)
    if config.trace is not None:
        trace = Trace.from_csv(config.trace)
    elif config.model is not None:
        net, _, sim = _load(config)
        trace = simulate(derive_odes(net), net.initial_vector(), sim)
    else:
        raise ValueError("check needs a model or --trace")
    _emit(config, check_trace(trace, formula))
    return 0


def cmd_robustness(config: RunConfig) -> int:
    formula = parse_formula(config.formula)
    net, marking, sim = _load(config)
    if marking.is_trivial():
        raise ValueError("no species has a non-trivial interval; declare one in the model or use --interval")
    query = RobustnessQuery(net, marking, formula, config.samples, config.seed, sim,
                            keep_samples=config.emit_samples is not None)
    report = asyncio.run(estimate_robustness_async(query, SimulationPool(config.workers)))
    if config.emit_samples is not None:
        write_samples_csv(config.emit_samples, report.species, report.per_sample, "sd")
    _emit(config, report)
    return 0


def _classify(net, config: RunConfig, input: str, output: str) -> MonotonicityVerdict | ChainVerdict:
    if config.chain:
        verdict = classify_chain(net, [ChainStep.parse(step) for step in config.chain])
        if verdict.input != input or verdict.output != output:
            raise ValueError(f"chain runs from {verdict.input} to {verdict.output}, expected {input} to {output}")
        return verdict
    return classify_monotonicity(net, input, output)


def cmd_monotonicity(config: RunConfig) -> int:
    net, _, _ = _load(config)
    if config.chain:
        if config.dot is not None:
            raise ValueError("--dot cannot be combined with --chain")
        verdict = classify_chain(net, [ChainStep.parse(step) for step in config.chain])
        _emit(config, verdict)
        return 0
    if config.reactions:
        net = net.subnetwork(config.reactions)
    if config.dot is not None:
        graph = build_r_graph(net)
        config.dot.write_text(to_dot(net, graph, consistent_labeling(graph)), encoding="utf-8")
    if config.input is None or config.output is None:
        raise ValueError("monotonicity needs --input and --output (or --chain)")
    _emit(config, classify_monotonicity(net, config.input, config.output))
    return 0


def cmd_alpha(config: RunConfig) -> int:
    net, marking, sim = _load(config)
    pool = SimulationPool(config.workers)
    strategies = {
        "grid": Strategy.grid(config.points),
        "monte_carlo": Strategy.monte_carlo(config.samples, config.seed),
        "monotone_endpoints": Strategy.monotone_endpoints(),
    }
    strategy = strategies[config.strategy]
    verdict, fallback = None, False
    input = config.input
    if config.auto:
        varying = marking.non_trivial()
        input = input or (varying[0] if len(varying) == 1 else None)
        if input is None:
            raise ValueError("--auto needs --input or exactly one non-trivial interval")
        verdict = _classify(net, config, input, config.output)
        if verdict.monotone and set(varying) <= {input}:
            strategy = Strategy.monotone_endpoints()
        else:
            fallback = True
            strategy = Strategy.grid(config.points)
            logger.warning("monotonicity not certified ({}); falling back to {}, the result is approximate",
                           getattr(verdict, "reason", None) or "other species vary", strategy)
    query = AlphaQuery(net, marking, config.output, config.alpha, strategy, sim,
                       input=input,
                       verdict=verdict if not fallback else None)
    report = asyncio.run(check_alpha_robustness_async(query, pool))
    if config.emit_samples is not None:
        write_samples_csv(config.emit_samples, report.species, report.per_probe, "steady_output")
    _emit(config, AutoAlphaResult(verdict=verdict, fallback=fallback, report=report) if config.auto else report)
    return 2 if report.status is AlphaStatus.UNDETERMINED else 0


COMMANDS = {
    "simulate": cmd_simulate,
    "check": cmd_check,
    "robustness": cmd_robustness,
    "monotonicity": cmd_monotonicity,
    "alpha-check": cmd_alpha,
}


def main(argv: List[str] | None = None) -> int:
    try:
        config = parse_config(argv)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    try:
        _setup_logging(config.log_level)
        return COMMANDS[config.command](config)
    except SimulationError as e:
        logger.error("numeric failure: {}", e)
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as e:
        logger.error("input error: {}", e)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
