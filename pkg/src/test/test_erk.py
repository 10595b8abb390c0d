"""ERK 通路案例：Raf ∈ [1, 100] 时 PPMek1 稳态的单调性与 α-鲁棒性"""
import pytest

from ..analysis.mono import ChainStep, MonotonicityKind, classify_chain
from ..analysis.pool import SimulationPool
from ..analysis.reports import AlphaStatus, Strategy
from ..analysis.robust import (
    AlphaQuery,
    RobustnessQuery,
    check_alpha_robustness,
    check_alpha_robustness_async,
    estimate_robustness,
)
from ..crn.model import derive_odes
from ..crn.odesim import settling_time, simulate
from ..ltl.parser import parse_formula

pytestmark = pytest.mark.slow

CHAIN = [ChainStep.parse("R18:Raf:PRaf"), ChainStep.parse("R21,R23:Mek1:PPMek1")]
K18, K19, K21, K27, K23, K25 = 0.1445, 0.37, 0.02, 0.07, 667.957, 0.13


def ppmek1_steady(raf0: float, mek_total: float = 1.0) -> float:
    """稳态下 PPMek1 = r·K / (1 + r + r·K)，r = k21·PRaf / k27，K = k23 / k25"""
    praf = raf0 * K18 / (K18 + K19)
    r = K21 * praf / K27
    k = K23 / K25
    return mek_total * r * k / (1 + r + r * k)


@pytest.fixture(scope="module")
def grid_report(erk, erk_sim):
    net, marking, _ = erk
    return check_alpha_robustness(AlphaQuery(net, marking, "PPMek1", 1.0, Strategy.grid(20), erk_sim))


def test_chain_certifies_raf_to_ppmek1(erk):
    net, _, _ = erk
    verdict = classify_chain(net, CHAIN)
    assert verdict.kind is MonotonicityKind.POSITIVE


def test_ppmek1_is_not_absolutely_robust(grid_report):
    assert grid_report.status is AlphaStatus.APPROXIMATE
    assert not grid_report.failures
    assert grid_report.spread > 0
    assert grid_report.observed_min == pytest.approx(ppmek1_steady(1.0), rel=1e-6)
    assert grid_report.observed_max == pytest.approx(ppmek1_steady(100.0), rel=1e-6)


@pytest.mark.asyncio
async def test_lsoda_grid_runs_on_several_workers(erk, erk_sim, grid_report):
    net, marking, _ = erk
    assert erk_sim.method == "LSODA"
    query = AlphaQuery(net, marking, "PPMek1", 1.0, Strategy.grid(20), erk_sim)
    report = await check_alpha_robustness_async(query, SimulationPool(4))
    assert report.probes == 20
    assert not report.failures
    assert report.observed_min == grid_report.observed_min
    assert report.observed_max == grid_report.observed_max


@pytest.mark.parametrize("factor", [0.1, 2.0])
def test_endpoints_agree_with_grid(erk, erk_sim, grid_report, factor):
    net, marking, _ = erk
    verdict = classify_chain(net, CHAIN)
    ends = check_alpha_robustness(AlphaQuery(net, marking, "PPMek1", 1.0, Strategy.monotone_endpoints(),
                                             erk_sim, verdict=verdict))
    assert ends.status is AlphaStatus.VERIFIED
    assert ends.probes == 2
    alpha = factor * ends.spread
    assert (ends.spread <= alpha) == (grid_report.spread <= alpha)
    assert ends.spread == pytest.approx(grid_report.spread, rel=1e-6)


def test_endpoints_without_certificate_are_approximate(erk, erk_sim):
    # 完整网络没有一致标号，端点结果不能算作验证
    net, marking, _ = erk
    ends = check_alpha_robustness(AlphaQuery(net, marking, "PPMek1", 1.0, Strategy.monotone_endpoints(), erk_sim))
    assert ends.status is AlphaStatus.APPROXIMATE
    assert not ends.exact


def test_grid_outputs_lie_in_endpoint_envelope(grid_report):
    values = [r.value for r in grid_report.per_probe]
    lo, hi = values[0], values[-1]
    eps = 1e-6 * (1 + abs(hi))
    assert all(lo - eps <= v <= hi + eps for v in values)


def test_raf_settles_before_ppmek1(erk, erk_sim):
    net, _, _ = erk
    trace = simulate(derive_odes(net), net.initial_vector(), erk_sim)
    t_praf = settling_time(trace, "PRaf", erk_sim.ss_tol)
    t_ppmek1 = settling_time(trace, "PPMek1", erk_sim.ss_tol)
    assert t_praf is not None and t_ppmek1 is not None
    assert t_praf < t_ppmek1


def test_narrow_window_is_not_fully_robust(erk, erk_sim):
    net, marking, _ = erk
    f = parse_formula("F(G([PPMek1] >= 0.9999 & [PPMek1] <= 1.01))")
    report = estimate_robustness(RobustnessQuery(net, marking, f, samples=30, seed=42, sim=erk_sim))
    assert report.samples_used == 30
    assert report.estimate < 1.0
