# -*- coding: utf-8 -*-
"""
Batch Processor - Path Farm Runner
路径彼此独立, 每条路径由 (seed, path_index) 决定自己的随机流;
按 path_index 连续分块交给进程池, 结果按块顺序拼接, 与 worker 数量无关。
"""
import logging
import math
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Any, Dict, List, Optional, Tuple

from app.config import get_settings
from app.core.errors import PreconditionError
from app.core.levy import LevyModel
from app.core.potential import Landscape
from app.core.simulate import PathSimulator, SimConfig

logger = logging.getLogger(__name__)

OPERATIONS = ("sigma", "big_t", "tau", "instrumented", "saddle", "delta", "tube", "snapshot")
# 每个 worker 分到的块数; 块越多中断时能保存的部分结果越多
CHUNKS_PER_WORKER = 4


@dataclass(frozen=True)
class PathJob:
    """
    一批路径的任务描述 (可 pickle, 在 worker 中重建模拟器)

    operation 取值见 OPERATIONS; params 为该操作的附加参数
    """
    landscape: Landscape
    model: LevyModel
    sim: SimConfig
    operation: str
    well: int = 1
    params: Dict[str, Any] = field(default_factory=dict)
    noise_block: Optional[int] = None

    def __post_init__(self):
        if self.operation not in OPERATIONS:
            raise PreconditionError(f"unknown path operation: {self.operation}")


def run_path(simulator: PathSimulator, job: PathJob, index: int):
    """执行单条路径"""
    op, i, p = job.operation, job.well, job.params
    if op == "sigma":
        return simulator.first_exit_sigma(i, path_index=index)
    if op == "big_t":
        return simulator.transition_big_t(i, path_index=index)
    if op == "tau":
        return simulator.transition_tau(i, path_index=index)
    if op == "instrumented":
        return simulator.instrumented_transition(i, path_index=index)
    if op == "saddle":
        return simulator.saddle_escape(p.get("saddle", 1), path_index=index, keep_log=p.get("keep_log", False))
    if op == "delta":
        return simulator.delta_exit(i, path_index=index)
    if op == "tube":
        x0 = p.get("x0", simulator.landscape.minimum(i))
        return simulator.tube_deviation(x0, p["duration"], path_index=index)
    return simulator.snapshot(i, p["times"], path_index=index)


def _run_chunk(args: Tuple[PathJob, int, int]) -> List[Any]:
    job, start, stop = args
    simulator = PathSimulator(job.landscape, job.model, job.sim, noise_block=job.noise_block)
    return [run_path(simulator, job, k) for k in range(start, stop)]


def chunk_bounds(n_paths: int, n_chunks: int, start_index: int = 0) -> List[Tuple[int, int]]:
    """把 [start, start+n) 切成至多 n_chunks 个连续块"""
    n_chunks = max(1, min(n_chunks, n_paths))
    size = math.ceil(n_paths / n_chunks)
    return [
        (start_index + a, start_index + min(a + size, n_paths))
        for a in range(0, n_paths, size)
    ]


class PathBatchProcessor:
    """
    批量路径处理器

    核心约定:
    - 结果列表第 k 项对应 path_index = start_index + k
    - 中断 (Ctrl-C) 时 self.partial 保留已完成的连续前缀, 供调用方写出部分报告
    """

    def __init__(self, workers: Optional[int] = None, verbose: bool = True):
        """
        Args:
            workers: 进程数 (默认取 Settings.workers)
            verbose: 是否打印进度
        """
        self.workers = workers or get_settings().workers
        self.verbose = verbose
        self.partial: List[Any] = []

    def process(self, job: PathJob, n_paths: int, start_index: int = 0) -> List[Any]:
        """
        运行 n_paths 条路径

        Returns:
            List: 每条路径的结果 (ExitRecord / TubeResult / ndarray 等), 按 path_index 排序
        """
        if n_paths < 1:
            raise PreconditionError(f"n_paths must be >= 1, got {n_paths}")
        self.partial = []
        bounds = chunk_bounds(n_paths, self.workers * CHUNKS_PER_WORKER, start_index)
        tasks = [(job, a, b) for a, b in bounds]

        if self.verbose:
            print(f"\n{'='*100}")
            print(f"📦 Batch Started: {job.operation} | well {job.well} | eps={job.sim.eps:g} | "
                  f"{n_paths} paths | {self.workers} workers")
            print(f"{'='*100}")
        logger.info(f"batch {job.operation}: {n_paths} paths in {len(tasks)} chunks, workers={self.workers}")

        try:
            if self.workers == 1 or len(tasks) == 1:
                for task in tasks:
                    self.partial.extend(_run_chunk(task))
                    self._progress(n_paths)
            else:
                with Pool(processes=self.workers) as pool:
                    for chunk in pool.imap(_run_chunk, tasks):
                        self.partial.extend(chunk)
                        self._progress(n_paths)
        except KeyboardInterrupt:
            logger.warning(f"batch interrupted after {len(self.partial)}/{n_paths} paths")
            raise

        if self.verbose:
            print(f"  ✅ done: {len(self.partial)} paths")
        return list(self.partial)

    def _progress(self, total: int):
        if self.verbose:
            print(f"  🔄 [{len(self.partial)}/{total}]")
