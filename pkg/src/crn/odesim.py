"""
数值模拟：把质量作用 ODE 积分为均匀时间网格上的数值时间迹，并检测稳态。

逐步驱动 scipy 的求解器对象（step + dense_output），以便在每个接受步之后
把舍入造成的负浓度截断为 0，并在网格点上检查稳态判据。
"""
import csv
import threading
from contextlib import nullcontext
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.integrate import DOP853, LSODA, RK23, RK45

from src.crn.config import METHODS, settings
from src.crn.model import ODESystem, SimulationEntry

_SOLVERS = {"RK45": RK45, "DOP853": DOP853, "RK23": RK23, "LSODA": LSODA}
_EXPLICIT_RK = {"RK45", "DOP853", "RK23"}
# scipy 的 LSODA 封装在进程内同一时刻只允许一个活动问题
_LSODA_LOCK = threading.Lock()


class SimulationError(RuntimeError):
    """积分失败（步长下溢、非有限状态等），t 为失败时刻"""

    def __init__(self, message: str, t: float | None = None):
        self.t = t
        super().__init__(message)


class UnknownObservableError(ValueError):
    pass


class SimOptions(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    t_end: float = Field(gt=0, allow_inf_nan=False)
    output_points: int = Field(default=201, ge=2)
    rel_tol: float = Field(default_factory=lambda: settings.rel_tol, gt=0)
    abs_tol: float = Field(default_factory=lambda: settings.abs_tol, gt=0)
    ss_tol: float = Field(default_factory=lambda: settings.ss_tol, gt=0)
    # 缺省：窗口 = 5% t_end，最长延伸到 10 * t_end
    ss_window: float | None = Field(default=None, gt=0)
    t_max_extend: float | None = Field(default=None, gt=0)
    method: str = Field(default_factory=lambda: settings.method)
    """
    RK45 / DOP853 / RK23：每个接受步之后把负浓度截断为 0 并重算导数。
    LSODA：状态保存在 Fortran 求解器内部，只能截断网格上的输出值；
    同一进程中的 LSODA 积分互斥执行。
    """

    @field_validator("method")
    @classmethod
    def _known_method(cls, value: str) -> str:
        if value not in METHODS:
            raise ValueError(f"method must be one of {', '.join(METHODS)}")
        return value

    @model_validator(mode="after")
    def _extend_after_end(self):
        if self.t_max_extend is not None and self.t_max_extend < self.t_end:
            raise ValueError("t_max_extend must be >= t_end")
        return self

    @property
    def window(self) -> float:
        return self.ss_window if self.ss_window is not None else 0.05 * self.t_end

    @property
    def horizon(self) -> float:
        return self.t_max_extend if self.t_max_extend is not None else 10.0 * self.t_end

    @classmethod
    def from_entry(cls, entry: SimulationEntry | None, **overrides) -> "SimOptions":
        """合并模型文件中的 simulation 段与显式参数（显式参数优先，None 忽略）"""
        values = {k: v for k, v in (entry.model_dump() if entry else {}).items() if v is not None}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass(frozen=True)
class TimedState:
    t: float
    x: np.ndarray
    xdot: np.ndarray


class Trace:
    """数值时间迹：t 严格递增，x / xdot 形状均为 (len, |species|)"""

    def __init__(self, species: Sequence[str], t, x, xdot):
        self.species = tuple(species)
        self.t = np.asarray(t, dtype=float)
        self.x = np.asarray(x, dtype=float).reshape(len(self.t), -1)
        self.xdot = np.asarray(xdot, dtype=float).reshape(len(self.t), -1)
        if len(self.t) == 0:
            raise ValueError("trace must contain at least one state")
        if self.x.shape[1] != len(self.species) or self.xdot.shape != self.x.shape:
            raise ValueError("trace state dimensions do not match the species list")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("trace time stamps must be strictly increasing")
        for a in (self.t, self.x, self.xdot):
            a.flags.writeable = False

    @classmethod
    def from_states(cls, species: Sequence[str], states: Sequence[TimedState]) -> "Trace":
        return cls(species, [s.t for s in states], [s.x for s in states], [s.xdot for s in states])

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> TimedState:
        return TimedState(float(self.t[i]), self.x[i], self.xdot[i])

    def __iter__(self) -> Iterator[TimedState]:
        for i in range(len(self)):
            yield self[i]

    @property
    def states(self) -> List[TimedState]:
        return list(self)

    @property
    def final(self) -> TimedState:
        return self[len(self) - 1]

    def observable(self, name: str) -> np.ndarray:
        """物种浓度列，或以 d 开头的导数列（如 dB）"""
        if name in self.species:
            return self.x[:, self.species.index(name)]
        if name.startswith("d") and name[1:] in self.species:
            return self.xdot[:, self.species.index(name[1:])]
        raise UnknownObservableError(f"unknown observable {name!r}")

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["t", *self.species, *(f"d{name}" for name in self.species)])
            for i in range(len(self)):
                row = [self.t[i], *self.x[i], *self.xdot[i]]
                writer.writerow([f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path: str | Path) -> "Trace":
        """读取 to_csv 的输出；缺少导数列时用有限差分补齐"""
        with open(path, newline="", encoding="utf-8") as f:
            rows = [row for row in csv.reader(f) if row]
        if len(rows) < 2:
            raise ValueError(f"{path}: trace file needs a header and at least one row")
        header = [h.strip() for h in rows[0]]
        if header[0] != "t":
            raise ValueError(f"{path}: first column must be 't'")
        try:
            data = np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)
        except ValueError as e:
            raise ValueError(f"{path}: {e}")
        if data.shape[1] != len(header):
            raise ValueError(f"{path}: rows do not match the header")
        names = header[1:]
        half = len(names) // 2
        if len(names) % 2 == 0 and names[half:] == [f"d{n}" for n in names[:half]]:
            return cls(names[:half], data[:, 0], data[:, 1:1 + half], data[:, 1 + half:])
        x = data[:, 1:]
        xdot = np.gradient(x, data[:, 0], axis=0) if len(data) > 1 else np.zeros_like(x)
        return cls(names, data[:, 0], x, xdot)


class SteadyStateReport(BaseModel):
    reached: bool
    t_reached: float | None = None
    species: List[str]
    marking: List[float]

    def value(self, name: str) -> float:
        return self.marking[self.species.index(name)]


def _initial_state(odes: ODESystem, init) -> np.ndarray:
    y0 = np.array(init, dtype=float).reshape(-1)
    if y0.shape != (odes.dimension,):
        raise ValueError(f"initial state has {y0.size} entries, expected {odes.dimension}")
    if not np.all(np.isfinite(y0)) or np.any(y0 < 0):
        raise ValueError("initial concentrations must be finite and >= 0")
    return y0


def _integrate(odes: ODESystem, init, opts: SimOptions, steady: bool) -> Tuple[Trace, SteadyStateReport]:
    y0 = _initial_state(odes, init)
    n = opts.output_points
    base = np.linspace(0.0, opts.t_end, n)
    step = opts.t_end / (n - 1)
    t_bound = opts.horizon if steady else opts.t_end
    tol, window = opts.ss_tol, opts.window

    def grid_time(k: int) -> float:
        return float(base[k]) if k < n else k * step

    times, xs, xdots = [0.0], [y0], [odes(y0)]
    below_since = 0.0 if np.max(np.abs(xdots[0]), initial=0.0) < tol else None
    reached_at = None
    k = 1

    guard = _LSODA_LOCK if opts.method == "LSODA" else nullcontext()
    with guard:
        solver = None
        try:
            solver = _SOLVERS[opts.method](odes.rhs, 0.0, y0, t_bound, rtol=opts.rel_tol, atol=opts.abs_tol)
            while solver.status == "running" and reached_at is None:
                message = solver.step()
                if solver.status == "failed":
                    raise SimulationError(f"integration failed at t={solver.t:.6g}: {message}", t=float(solver.t))
                if not np.all(np.isfinite(solver.y)):
                    raise SimulationError(f"non-finite state at t={solver.t:.6g}", t=float(solver.t))
                if opts.method in _EXPLICIT_RK and np.any(solver.y < 0):
                    solver.y = np.maximum(solver.y, 0.0)
                    solver.f = solver.fun(solver.t, solver.y)

                dense = solver.dense_output()
                limit = solver.t + (1e-10 * t_bound if solver.status == "finished" else 0.0)
                while grid_time(k) <= limit:
                    tg = grid_time(k)
                    xg = np.maximum(dense(tg), 0.0)
                    dg = odes(xg)
                    times.append(tg)
                    xs.append(xg)
                    xdots.append(dg)
                    k += 1
                    if not steady:
                        continue
                    if np.max(np.abs(dg), initial=0.0) < tol:
                        if below_since is None:
                            below_since = tg
                        elif tg - below_since >= window * (1 - 1e-12):
                            reached_at = tg
                            break
                    else:
                        below_since = None
                if steady and reached_at is None and np.max(np.abs(odes(solver.y)), initial=0.0) >= tol:
                    below_since = None
        except SimulationError:
            raise
        except Exception as e:
            t = float(solver.t) if solver is not None else 0.0
            raise SimulationError(f"{opts.method} integrator error at t={t:.6g}: {e}", t=t) from e

    trace = Trace(odes.species, times, xs, xdots)
    report = SteadyStateReport(
        reached=reached_at is not None,
        t_reached=reached_at,
        species=list(odes.species),
        marking=[float(v) for v in trace.final.x],
    )
    return trace, report


def simulate(odes: ODESystem, init, opts: SimOptions) -> Trace:
    """在 [0, t_end] 的均匀网格上输出 (t, x, xdot)"""
    trace, _ = _integrate(odes, init, opts, steady=False)
    logger.debug("simulated {} points up to t={:g} with {}", len(trace), opts.t_end, opts.method)
    return trace


def find_steady_state(odes: ODESystem, init, opts: SimOptions) -> Tuple[Trace, SteadyStateReport]:
    """积分直到 ‖xdot‖∞ < ss_tol 在长度为 ss_window 的窗口内持续成立，或超过 t_max_extend"""
    trace, report = _integrate(odes, init, opts, steady=True)
    if report.reached:
        logger.debug("steady state reached at t={:g}", report.t_reached)
    else:
        logger.warning("no steady state by t={:g} (ss_tol={:g})", opts.horizon, opts.ss_tol)
    return trace, report


def settling_time(trace: Trace, species: str, tol: float) -> float | None:
    """该物种 |d/dt| 自此之后一直小于 tol 的最早网格时刻；到迹末尾仍未满足则为 None"""
    d = np.abs(trace.observable(f"d{species}"))
    above = np.nonzero(d >= tol)[0]
    if len(above) == 0:
        return float(trace.t[0])
    last = int(above[-1])
    if last == len(trace) - 1:
        return None
    return float(trace.t[last + 1])


def conservation_drift(trace: Trace, laws: np.ndarray) -> np.ndarray:
    """每个守恒量沿迹的最大偏移 max_t |w·x(t) - w·x(0)|"""
    if laws.size == 0:
        return np.zeros(0)
    totals = trace.x @ np.atleast_2d(laws).T
    return np.max(np.abs(totals - totals[0]), axis=0)
