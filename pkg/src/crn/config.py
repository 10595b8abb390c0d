import os
from dataclasses import dataclass

# 可用的积分器，与 scipy.integrate 中的求解器类同名
METHODS = ("RK45", "DOP853", "RK23", "LSODA")


@dataclass(frozen=True)
class Settings:
  """运行时默认配置，来自环境变量（.env 由 src/__init__.py 加载）"""
  rel_tol: float = 1e-8
  abs_tol: float = 1e-10
  ss_tol: float = 1e-6
  method: str = "RK45"
  workers: int = 4
  log_level: str = "WARNING"


def _env_float(name: str, default: float) -> float:
  raw = os.getenv(name)
  if raw is None or raw.strip() == "":
    return default
  try:
    value = float(raw)
  except ValueError:
    raise ValueError(f"{name} must be a number, got {raw!r}")
  if not value > 0:
    raise ValueError(f"{name} must be positive, got {raw!r}")
  return value


def _env_int(name: str, default: int) -> int:
  raw = os.getenv(name)
  if raw is None or raw.strip() == "":
    return default
  try:
    value = int(raw)
  except ValueError:
    raise ValueError(f"{name} must be an integer, got {raw!r}")
  if value < 1:
    raise ValueError(f"{name} must be >= 1, got {raw!r}")
  return value


def load_settings() -> Settings:
  """读取 CRN_* 环境变量，缺省时使用内置默认值"""
  method = os.getenv("CRN_METHOD") or Settings.method
  if method not in METHODS:
    raise ValueError(f"CRN_METHOD must be one of {', '.join(METHODS)}, got {method!r}")
  return Settings(
    rel_tol=_env_float("CRN_REL_TOL", Settings.rel_tol),
    abs_tol=_env_float("CRN_ABS_TOL", Settings.abs_tol),
    ss_tol=_env_float("CRN_SS_TOL", Settings.ss_tol),
    method=method,
    workers=_env_int("CRN_WORKERS", Settings.workers),
    log_level=(os.getenv("CRN_LOG_LEVEL") or Settings.log_level).upper(),
  )


settings = load_settings()
