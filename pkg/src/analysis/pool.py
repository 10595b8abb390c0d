import asyncio
from typing import Any, Callable, Iterable, List

from loguru import logger

from src.crn.config import settings


class SimulationPool:
  """
  有界的异步模拟池：用 asyncio.to_thread 运行独立的探测任务。

  结果按提交顺序返回，与完成顺序无关；单个任务抛出的异常作为结果返回，
  由调用方决定是剔除（Monte Carlo 样本）还是记为验证失败（稳态探测）。
  """

  def __init__(self, workers: int | None = None):
    self._workers = workers or settings.workers
    if self._workers < 1:
      raise ValueError("workers must be >= 1")
    self._semaphore: asyncio.Semaphore | None = None

  @property
  def workers(self) -> int:
    return self._workers

  def _get_semaphore(self) -> asyncio.Semaphore:
    # Semaphore 绑定到首次使用它的事件循环
    if self._semaphore is None:
      self._semaphore = asyncio.Semaphore(self._workers)
    return self._semaphore

  async def _run(self, fn: Callable[[Any], Any], item: Any) -> Any:
    async with self._get_semaphore():
      return await asyncio.to_thread(fn, item)

  async def map(self, fn: Callable[[Any], Any], items: Iterable[Any]) -> List[Any]:
    items = list(items)
    logger.debug("running {} probes on {} workers", len(items), self._workers)
    return await asyncio.gather(*(self._run(fn, item) for item in items), return_exceptions=True)
