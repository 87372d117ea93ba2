# -*- coding: utf-8 -*-
"""
Limit Chain - closed-form metastable limit

职责:
- 生成元 Q: q_ij = (kappa 1{j<i} + 1{j>i})/(1+kappa) * | |s_{j-1}-m_i|^-r - |s_j-m_i|^-r |
- 出井速率 lambda^i(eps)、时间尺度 1/H(1/eps)
- 极限链 Y 的转移矩阵 e^{tQ} (uniformization) 与路径模拟
- Gaussian 两井对照 (Kramers 尺度)
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from scipy.sparse.csgraph import connected_components

from app.core.errors import EqualDepth, NotTwoWell, PreconditionError
from app.core.levy import LevyModel, tail_minus, tail_plus, tail_total
from app.core.potential import Landscape

logger = logging.getLogger(__name__)

POISSON_TAIL = 1e-14
# uniformization 每段的最大 Poisson 均值, 超过后用 squaring
MAX_UNIFORM_MEAN = 8.0
EQUAL_DEPTH_TOL = 1e-9


@dataclass(frozen=True)
class GeneratorMatrix:
    """
    生成元矩阵 (单位: 重标时间 t/H(1/eps))

    se / missing 仅在经验估计 (empirical_generator) 中使用
    """
    q: np.ndarray
    se: Optional[np.ndarray] = field(default=None, compare=False)
    missing: Tuple[int, ...] = ()

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def rate(self, i: int) -> float:
        """q_i = -q_ii (1-based)"""
        return float(-self.q[i - 1, i - 1])

    def ratio(self, i: int, j: int) -> float:
        """q_ij / q_i (0 when well i is absorbing)."""
        qi = self.rate(i)
        return float(self.q[i - 1, j - 1] / qi) if qi > 0 else 0.0

    def to_rows(self):
        return self.q.tolist()


def _inv_power(distance: Optional[float], r: float) -> float:
    """|d|^-r with the infinite-sentinel convention (None -> 0)."""
    return 0.0 if distance is None else abs(distance) ** (-r)


def compute_generator(landscape: Landscape, r: float, kappa: float) -> GeneratorMatrix:
    """
    极限马尔可夫链的生成元

    Args:
        landscape: 势能的极值结构
        r: 尾部正则变化指数
        kappa: 左右尾比值 H_-(-u)/H_+(u)

    Returns:
        GeneratorMatrix, 行和为 0
    """
    if not r > 0:
        raise PreconditionError(f"r must be positive, got {r}")
    if kappa < 0:
        raise PreconditionError(f"kappa must be nonnegative, got {kappa}")
    n = landscape.n
    q = np.zeros((n, n))
    for i in range(1, n + 1):
        m = landscape.minimum(i)
        for j in range(1, n + 1):
            if j == i:
                continue
            left, right = landscape.saddle(j - 1), landscape.saddle(j)
            a = _inv_power(None if left is None else left - m, r)
            b = _inv_power(None if right is None else right - m, r)
            weight = (kappa if j < i else 1.0) / (1.0 + kappa)
            q[i - 1, j - 1] = weight * abs(a - b)
        q[i - 1, i - 1] = -q[i - 1].sum()
    logger.debug(f"generator (r={r}, kappa={kappa}): {q.tolist()}")
    return GeneratorMatrix(q=q)


def generator_for(landscape: Landscape, model: LevyModel) -> GeneratorMatrix:
    if model.tails is None:
        raise PreconditionError("the limit chain needs a Lévy measure with tails")
    return compute_generator(landscape, model.tails.r, model.tails.kappa)


def exit_rate(landscape: Landscape, model: LevyModel, i: int, eps: float) -> float:
    """lambda^i(eps) = H_-((m_i - s_{i-1})/eps) + H_+((s_i - m_i)/eps), sentinel terms 0"""
    if not 0 < eps < 1:
        raise PreconditionError(f"eps must lie in (0, 1), got {eps}")
    m = landscape.minimum(i)
    left, right = landscape.saddle(i - 1), landscape.saddle(i)
    rate = 0.0
    if left is not None:
        rate += tail_minus(model, (m - left) / eps)
    if right is not None:
        rate += tail_plus(model, (right - m) / eps)
    return float(rate)


def delta_exit_rate(model: LevyModel, delta: float, eps: float) -> float:
    """Rate of leaving B_Delta(m_i) by one big jump: H_-(-Delta/eps) + H_+(Delta/eps)."""
    return float(tail_total(model, delta / eps))


def saddle_escape_bound(model: LevyModel, eps: float, margin: float) -> float:
    """
    鞍点逃逸时间均值的上界: 首个幅度超过 4*margin 的跳跃 eps*W 的等待时间均值,
    即 1/H(4 margin/eps)
    """
    h = tail_total(model, 4.0 * margin / eps)
    return math.inf if h == 0 else float(1.0 / h)


def time_scale(model: LevyModel, eps: float) -> float:
    """1/H(1/eps)"""
    if not 0 < eps < 1:
        raise PreconditionError(f"eps must lie in (0, 1), got {eps}")
    return float(1.0 / tail_total(model, 1.0 / eps))


def stable_clock_generator(gen: GeneratorMatrix, model: LevyModel) -> GeneratorMatrix:
    """
    纯幂尾模型在 alpha t / eps^alpha 时钟下的生成元

    H(1/eps) = (c_plus + c_minus) eps^alpha, 因此换算因子 H(1/eps) alpha / eps^alpha
    与 eps 无关; 密度为 |y|^{-1-alpha} 的对称 stable 测度该因子为 2。
    """
    tails = model.tails
    if tails is None or not tails.is_pure_power:
        raise PreconditionError("stable clock is defined for pure power tails only")
    factor = tails.r * (tails.c_plus + tails.c_minus)
    return GeneratorMatrix(q=gen.q * factor)


def chain_transition_matrix(gen: GeneratorMatrix, t: float) -> np.ndarray:
    """
    e^{tQ} by uniformization (Poisson tail 1e-14) with scaling and squaring.
    """
    if t < 0:
        raise PreconditionError(f"t must be nonnegative, got {t}")
    q = np.asarray(gen.q, dtype=float)
    n = q.shape[0]
    eye = np.eye(n)
    lam = float(np.max(-np.diag(q))) if n else 0.0
    if t == 0 or lam == 0:
        return eye
    squarings = max(0, int(math.ceil(math.log2(lam * t / MAX_UNIFORM_MEAN)))) if lam * t > MAX_UNIFORM_MEAN else 0
    mean = lam * t / 2 ** squarings
    jump = eye + q / lam
    k_max = int(stats.poisson.isf(POISSON_TAIL, mean)) + 1
    weights = stats.poisson.pmf(np.arange(k_max + 1), mean)
    power = eye.copy()
    out = weights[0] * power
    for k in range(1, k_max + 1):
        power = power @ jump
        out += weights[k] * power
    for _ in range(squarings):
        out = out @ out
    out = np.clip(out, 0.0, None)
    return out / out.sum(axis=1, keepdims=True)


def simulate_chain(gen: GeneratorMatrix, i0: int, t_grid: Sequence[float],
                   rng: np.random.Generator) -> np.ndarray:
    """
    跳跃链模拟 Y, 在 t_grid (递增) 上取样; 状态编号 1-based
    """
    q = gen.q
    n = q.shape[0]
    times = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(times) < 0):
        raise PreconditionError("t_grid must be nondecreasing")
    out = np.empty(len(times), dtype=int)
    state, clock = i0, 0.0
    rate = -q[state - 1, state - 1]
    next_jump = clock + rng.exponential(1.0 / rate) if rate > 0 else math.inf
    for k, t in enumerate(times):
        while next_jump <= t:
            clock = next_jump
            probs = np.clip(q[state - 1], 0.0, None)
            probs[state - 1] = 0.0
            state = int(rng.choice(n, p=probs / probs.sum())) + 1
            rate = -q[state - 1, state - 1]
            next_jump = clock + rng.exponential(1.0 / rate) if rate > 0 else math.inf
        out[k] = state
    return out


@dataclass(frozen=True)
class GaussianComparison:
    generator: GeneratorMatrix
    barrier: float
    deep_well: int
    shallow_well: int


def gaussian_comparison(landscape: Landscape) -> GaussianComparison:
    """
    Brownian 噪声下的两井对照

    生成元 [[0, 0], [1, -1]] (状态 1 为较深的井), 以及 Kramers 常数
    2(U(s_1) - U(m_shallow)): eps^2 ln(mean exit time from the shallow well) -> 该常数

    Raises:
        NotTwoWell: 井数不为 2
        EqualDepth: 两井深度相同
    """
    if landscape.n != 2:
        raise NotTwoWell(f"Gaussian comparison needs exactly two wells, got {landscape.n}")
    pot = landscape.potential
    u1, u2 = pot.value(landscape.minimum(1)), pot.value(landscape.minimum(2))
    if abs(u1 - u2) < EQUAL_DEPTH_TOL:
        raise EqualDepth("both wells have the same depth", data={"U(m_1)": u1, "U(m_2)": u2})
    deep, shallow = (1, 2) if u1 < u2 else (2, 1)
    barrier = 2.0 * (pot.value(landscape.saddle(1)) - pot.value(landscape.minimum(shallow)))
    gen = GeneratorMatrix(q=np.array([[0.0, 0.0], [1.0, -1.0]]))
    return GaussianComparison(generator=gen, barrier=float(barrier), deep_well=deep, shallow_well=shallow)


def is_irreducible(gen: GeneratorMatrix) -> bool:
    adjacency = (gen.q > 0).astype(int)
    np.fill_diagonal(adjacency, 0)
    n_comp, _ = connected_components(adjacency, directed=True, connection="strong")
    return n_comp == 1


def stationary_distribution(gen: GeneratorMatrix) -> np.ndarray:
    """pi Q = 0, sum pi = 1 (unique when there is a single closed class)."""
    n = gen.n
    a = np.vstack([gen.q.T, np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()
