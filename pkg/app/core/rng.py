# -*- coding: utf-8 -*-
"""
Counter-based random streams.

每条路径由 (seed, path_index) 唯一确定两个独立子流:
- NOISE: Euler 子步使用的标准正态数 / stable 变量
- JUMPS: big jump 到达间隔、符号与幅度

与 worker 数量和调度顺序无关。
"""
from typing import Tuple

import numpy as np

NOISE = 0
JUMPS = 1
CHAIN = 2


def stream(seed: int, path_index: int, substream: int) -> np.random.Generator:
    """Philox generator keyed by (seed, path_index, substream)."""
    if seed < 0 or path_index < 0:
        raise ValueError("seed and path_index must be nonnegative")
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(path_index), int(substream)))
    return np.random.Generator(np.random.Philox(seq))


def path_streams(seed: int, path_index: int) -> Tuple[np.random.Generator, np.random.Generator]:
    """(noise, jumps) generators of one path."""
    return stream(seed, path_index, NOISE), stream(seed, path_index, JUMPS)
