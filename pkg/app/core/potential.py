# -*- coding: utf-8 -*-
"""
Potential Landscape - multi-well polynomial potential U

职责:
- 表示多项式势函数 U(x) = sum c_k x^k, 校验 degree / leading coefficient
- analyze(): 扫描 U' 的变号点 + 二分, 得到极小值 / 鞍点及曲率 (interlacing 校验)
- drift / flow: 确定性梯度流 x' = -U'(x) (RK4 oracle)
- basin_of / relaxation_time: 盆地归属与弛豫时间常数
"""
import bisect
import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Optional, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import integrate, optimize

from app.core import kernels
from app.core.errors import (
    DegenerateExtremum,
    NoMinimum,
    NonInterlaced,
    PotentialError,
    PreconditionError,
    StateOverflow,
)

logger = logging.getLogger(__name__)

# Hardcoded numerical defaults
DEFAULT_TOL = 1e-12
DEFAULT_GRID_POINTS = 10_000
SADDLE_TOL = 1e-9
DEFAULT_STEP = 1e-3
DEFAULT_OVERFLOW = 1e6

# basin_of() 的鞍点标记; 井编号从 1 开始, 0 不会与任何井冲突
SADDLE = 0


@dataclass(frozen=True)
class PolynomialPotential:
    """
    U(x) = sum_k c_k x^k, 常数项在前

    degree 必须为 >= 4 的偶数且最高次系数 > 0, 保证 U -> +inf 且 |U'| 超线性增长
    """
    coefficients: Tuple[float, ...]

    def __post_init__(self):
        coefs = tuple(float(c) for c in self.coefficients)
        # 去掉末尾的零系数
        while len(coefs) > 1 and coefs[-1] == 0.0:
            coefs = coefs[:-1]
        object.__setattr__(self, "coefficients", coefs)

        degree = len(coefs) - 1
        if degree < 4 or degree % 2 != 0:
            raise PotentialError(
                f"potential degree must be even and >= 4, got {degree}",
                data={"coefficients": list(coefs)},
            )
        if coefs[-1] <= 0:
            raise PotentialError(
                "leading coefficient must be positive",
                data={"coefficients": list(coefs)},
            )

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @cached_property
    def _c(self) -> np.ndarray:
        return np.asarray(self.coefficients, dtype=float)

    @cached_property
    def derivative_coefficients(self) -> np.ndarray:
        return P.polyder(self._c)

    @cached_property
    def drift_coefficients(self) -> np.ndarray:
        """Ascending coefficients of -U' (passed to the numba kernels)."""
        return np.ascontiguousarray(-self.derivative_coefficients)

    @cached_property
    def _second_coefficients(self) -> np.ndarray:
        return P.polyder(self._c, 2)

    def value(self, x):
        return P.polyval(x, self._c)

    def derivative(self, x):
        return P.polyval(x, self.derivative_coefficients)

    def second_derivative(self, x):
        return P.polyval(x, self._second_coefficients)

    def cauchy_bound(self) -> float:
        """Cauchy bound on the real roots of U'."""
        d = self.derivative_coefficients
        return 1.0 + float(np.max(np.abs(d[:-1] / d[-1])))


@dataclass(frozen=True)
class Landscape:
    """
    极小值 m_1 < ... < m_n 与鞍点 s_1 < ... < s_{n-1} 严格交错;
    s_0 = -inf, s_n = +inf 不显式存储。
    """
    minima: Tuple[float, ...]
    saddles: Tuple[float, ...]
    curvature_min: Tuple[float, ...]
    curvature_saddle: Tuple[float, ...]
    potential: PolynomialPotential

    @property
    def n(self) -> int:
        return len(self.minima)

    def saddle(self, j: int) -> Optional[float]:
        """s_j for j in 0..n; None stands for the infinite sentinels s_0 and s_n."""
        if j <= 0 or j >= self.n:
            return None
        return self.saddles[j - 1]

    def minimum(self, i: int) -> float:
        return self.minima[i - 1]

    @property
    def delta_0(self) -> float:
        """Delta_0 = min_i min(|m_i - s_{i-1}|, |m_i - s_i|) over the finite saddles."""
        gaps = []
        for i in range(1, self.n + 1):
            m = self.minimum(i)
            for s in (self.saddle(i - 1), self.saddle(i)):
                if s is not None:
                    gaps.append(abs(m - s))
        return min(gaps) if gaps else math.inf

    def well_interval(self, i: int) -> Tuple[float, float]:
        """Omega^i = (s_{i-1}, s_i) as floats (infinite ends as +-inf)."""
        left, right = self.saddle(i - 1), self.saddle(i)
        return (
            -math.inf if left is None else left,
            math.inf if right is None else right,
        )

    def shrunk_well(self, i: int, margin: float) -> Tuple[float, float]:
        """Omega^i_eps = [s_{i-1} + 2 margin, s_i - 2 margin] (peripheral wells one-sided)."""
        lo, hi = self.well_interval(i)
        return lo + 2.0 * margin, hi - 2.0 * margin

    def sigma_interval(self, i: int, margin: float) -> Tuple[float, float]:
        """[s_{i-1} + margin, s_i - margin]: leaving it defines sigma^i."""
        lo, hi = self.well_interval(i)
        return lo + margin, hi - margin

    def shrunk_well_of(self, x: float, margin: float) -> Optional[int]:
        """Index j with x in Omega^j_eps, None inside the saddle gaps."""
        for j in range(1, self.n + 1):
            lo, hi = self.shrunk_well(j, margin)
            if lo <= x <= hi:
                return j
        return None

    def ball_index(self, x: float, radius: float) -> Optional[int]:
        """Index k with |x - m_k| <= radius, None if x lies in no ball."""
        for k, m in enumerate(self.minima, start=1):
            if abs(x - m) <= radius:
                return k
        return None


def analyze(
    potential: PolynomialPotential,
    search_radius: Optional[float] = None,
    tol: float = DEFAULT_TOL,
    grid_points: int = DEFAULT_GRID_POINTS,
) -> Landscape:
    """
    提取势能面: 在 [-R, R] 的均匀网格上扫描 U' 的变号, 再二分到 tol

    Args:
        potential: 多项式势函数
        search_radius: 搜索半径 R (默认使用 U' 的 Cauchy 根界)
        tol: 根定位精度, 同时作为退化判据 |U''| < tol
        grid_points: 网格点数

    Returns:
        Landscape: 交错排列的极小值 / 鞍点及曲率

    Raises:
        DegenerateExtremum / NoMinimum / NonInterlaced
    """
    radius = search_radius if search_radius is not None else potential.cauchy_bound()
    if radius <= 0:
        raise PreconditionError(f"search_radius must be positive, got {radius}")

    grid = np.linspace(-radius, radius, grid_points)
    values = potential.derivative(grid)
    signs = np.sign(values)

    roots = [float(x) for x in grid[signs == 0]]
    for k in np.nonzero(signs[:-1] * signs[1:] < 0)[0]:
        root = optimize.bisect(
            potential.derivative, grid[k], grid[k + 1], xtol=tol, maxiter=200
        )
        roots.append(float(root))
    roots.sort()

    if not roots:
        raise NoMinimum("U' has no sign change inside the search interval",
                        data={"search_radius": radius})

    kinds = []
    curvatures = []
    for root in roots:
        curv = float(potential.second_derivative(root))
        if abs(curv) < tol:
            raise DegenerateExtremum(
                f"degenerate extremum at x={root:.6g} (U''={curv:.3g})",
                data={"x": root, "curvature": curv},
            )
        kinds.append("min" if curv > 0 else "max")
        curvatures.append(curv)

    expected = ["min" if k % 2 == 0 else "max" for k in range(len(roots))]
    if "min" not in kinds:
        raise NoMinimum("no local minimum found", data={"roots": roots})
    if kinds != expected or kinds[-1] != "min":
        raise NonInterlaced(
            "extrema do not interlace as min < max < ... < min",
            data={"roots": roots, "kinds": kinds},
        )

    landscape = Landscape(
        minima=tuple(roots[0::2]),
        saddles=tuple(roots[1::2]),
        curvature_min=tuple(curvatures[0::2]),
        curvature_saddle=tuple(curvatures[1::2]),
        potential=potential,
    )
    logger.info(
        f"✅ landscape: n={landscape.n} minima={landscape.minima} saddles={landscape.saddles}"
    )
    return landscape


def drift(potential: PolynomialPotential, x):
    """-U'(x), Horner evaluation."""
    return P.polyval(x, potential.drift_coefficients)


def flow(
    potential: PolynomialPotential,
    x0: float,
    t: float,
    h: float = DEFAULT_STEP,
    overflow: float = DEFAULT_OVERFLOW,
) -> float:
    """
    确定性流 X^0_t(x0), 固定步长经典 RK4 (最后一步截短)

    Raises:
        StateOverflow: |X^0| 超过 overflow
    """
    if h <= 0:
        raise PreconditionError(f"step size must be positive, got {h}")
    if not (0 <= t < math.inf):
        raise PreconditionError(f"t must be finite and nonnegative, got {t}")
    x, overflowed = kernels.rk4_flow(potential.drift_coefficients, float(x0), float(t),
                                     float(h), float(overflow))
    if overflowed:
        raise StateOverflow(f"deterministic flow left |x| <= {overflow}",
                            data={"x0": x0, "t": t})
    return float(x)


def flow_path(potential: PolynomialPotential, x0: float, duration: float,
              h: float = DEFAULT_STEP) -> np.ndarray:
    """RK4 trajectory on the grid 0, h, 2h, ..., duration."""
    return kernels.rk4_grid(potential.drift_coefficients, float(x0), float(duration), float(h))


def basin_of(landscape: Landscape, x: float, tol: float = SADDLE_TOL) -> int:
    """
    返回 x 所在的井编号 i (x in (s_{i-1}, s_i)), 距离某个鞍点小于 tol 时返回 SADDLE
    """
    for s in landscape.saddles:
        if abs(x - s) < tol:
            return SADDLE
    return 1 + bisect.bisect_right(landscape.saddles, x)


def _travel_time(potential: PolynomialPotential, a: float, b: float) -> float:
    """Time the deterministic flow needs between a and b (int of 1/|U'|)."""
    lo, hi = min(a, b), max(a, b)
    if hi <= lo:
        return 0.0
    value, _ = integrate.quad(lambda z: 1.0 / abs(potential.derivative(z)), lo, hi, limit=200)
    return float(value)


def _levels_valid(landscape: Landscape, eps: float, gamma: float) -> bool:
    a, b = eps ** gamma, eps ** (2 * gamma)
    for i in range(1, landscape.n + 1):
        m = landscape.minimum(i)
        left, right = landscape.saddle(i - 1), landscape.saddle(i)
        if left is not None and not (left + a + 2 * b < m - b / 2):
            return False
        if right is not None and not (right - a - 2 * b > m + b / 2):
            return False
    return True


@lru_cache(maxsize=128)
def relaxation_constant(landscape: Landscape, gamma: float, levels: int = 40) -> float:
    """
    最小常数 c, 使得对前 levels 个有效的二进网格点 eps = 2^-k 都成立:

      sup_{y in [s_{i-1}+eps^g, s_i-eps^g]} |X^0_t(y) - m_i| <= eps^{2g}/2   for t >= c|ln eps|
      |X^0_t(y) - s_i| >= eps^g + 2 eps^{2g} (|y - s_i| >= eps^g)        for t >= c eps^g

    eps 有效指各层级在井内严格有序 (eps 足够小时总成立)。
    """
    if gamma <= 0:
        raise PreconditionError(f"gamma must be positive, got {gamma}")
    pot = landscape.potential
    c = 0.0
    used = 0
    for k in range(1, 1000):
        if used >= levels:
            break
        eps = 2.0 ** (-k)
        if not _levels_valid(landscape, eps, gamma):
            continue
        used += 1
        a, b = eps ** gamma, eps ** (2 * gamma)
        log_eps = abs(math.log(eps))
        for i in range(1, landscape.n + 1):
            m = landscape.minimum(i)
            left, right = landscape.saddle(i - 1), landscape.saddle(i)
            start_left = -math.inf if left is None else left + a
            start_right = math.inf if right is None else right - a
            c = max(c, _travel_time(pot, start_left, m - b / 2) / log_eps)
            c = max(c, _travel_time(pot, start_right, m + b / 2) / log_eps)
        for s in landscape.saddles:
            c = max(c, _travel_time(pot, s - a, s - a - 2 * b) / a)
            c = max(c, _travel_time(pot, s + a, s + a + 2 * b) / a)
    return c


def relaxation_time(landscape: Landscape, eps: float, gamma: float) -> float:
    """c |ln eps|, c from relaxation_constant()."""
    if not (0 < eps < 1):
        raise PreconditionError(f"eps must lie in (0, 1), got {eps}")
    return relaxation_constant(landscape, float(gamma)) * abs(math.log(eps))
