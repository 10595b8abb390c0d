from pathlib import Path

import pytest
from dotenv import load_dotenv

from src.crn.model import load_model
from src.crn.odesim import SimOptions, Trace

# 在所有测试运行前加载环境变量
load_dotenv()

MODELS = Path(__file__).resolve().parents[2] / "project" / "models"


@pytest.fixture(scope="session")
def models_dir() -> Path:
    """内置示例模型所在目录"""
    return MODELS


@pytest.fixture(scope="session")
def erk():
    """ERK 模型：(网络, 区间标记, simulation 配置段)"""
    return load_model(MODELS / "erk.json")


@pytest.fixture(scope="session")
def erk_sim(erk) -> SimOptions:
    _, _, entry = erk
    return SimOptions.from_entry(entry)


@pytest.fixture(scope="session")
def raf():
    return load_model(MODELS / "raf.json")


@pytest.fixture(scope="session")
def oscillating_trace() -> Trace:
    """B 在 t = 0..9 上从 2 振荡上升到 10 的示例迹"""
    return Trace.from_csv(MODELS / "oscillating_trace.csv")
