# -*- coding: utf-8 -*-
"""
Lévy Noise Model - generating triplet (d, nu, mu) with regularly varying tails

职责:
- TailSpec: H_+(u) = c_plus u^-r l(u), H_-(-u) = c_minus u^-r l(u), l 为常数或 (ln(e+u))^p
- LevyModel: 三元组 + |y| <= 1 内部轮廓 (stable(alpha) / truncated)
- decompose(): 在 eps^-rho 处切分为 small-jump 部分与 compound Poisson 部分
- 采样: 跳跃间隔、big jump、small-jump Gaussian surrogate、精确 stable 增量
- 正则变化工具: rv_ratio_check
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Literal, Optional, Tuple

import numpy as np
from scipy import integrate, optimize
from scipy.special import gamma as gamma_fn

from app.core.errors import DomainError, PreconditionError

logger = logging.getLogger(__name__)

SV_POWER_RANGE = (-2.0, 2.0)
INVERSION_KNOTS = 1024
INVERSION_RTOL = 1e-10

# min_{u>=1} (e+u) ln(e+u) / u; LogPower(p) 的 H_+ 严格单调当且仅当 p < r * 该值
_u = np.logspace(0.0, 8.0, 40001)
_LOGPOW_MONOTONE_FACTOR = float(np.min((math.e + _u) * np.log(math.e + _u) / _u))
del _u


@dataclass(frozen=True)
class TailSpec:
    """
    正则变化尾部 (index r) 的参数化族

    sv_power=None 表示 l 为常数; 否则 l(u) = (ln(e+u))^p, p in [-2, 2]
    """
    r: float
    c_plus: float
    c_minus: float = 0.0
    sv_power: Optional[float] = None

    def __post_init__(self):
        if not self.r > 0:
            raise PreconditionError(f"tail index r must be positive, got {self.r}")
        if not self.c_plus > 0:
            raise PreconditionError(f"c_plus must be positive, got {self.c_plus}")
        if self.c_minus < 0:
            raise PreconditionError(f"c_minus must be nonnegative, got {self.c_minus}")
        if self.sv_power is not None:
            lo, hi = SV_POWER_RANGE
            if not lo <= self.sv_power <= hi:
                raise PreconditionError(f"slowly varying power must lie in [{lo}, {hi}]")
            if self.sv_power >= self.r * _LOGPOW_MONOTONE_FACTOR:
                raise PreconditionError(
                    "H_+ would not be strictly decreasing on [1, inf)",
                    data={"r": self.r, "sv_power": self.sv_power},
                )

    @property
    def kappa(self) -> float:
        return self.c_minus / self.c_plus

    @property
    def is_pure_power(self) -> bool:
        return self.sv_power is None or self.sv_power == 0.0

    def slowly_varying(self, u):
        if self.is_pure_power:
            return np.ones_like(np.asarray(u, dtype=float))
        return np.log(math.e + np.asarray(u, dtype=float)) ** self.sv_power

    def plus(self, u):
        u = np.asarray(u, dtype=float)
        return self.c_plus * u ** (-self.r) * self.slowly_varying(u)

    def minus(self, u):
        u = np.asarray(u, dtype=float)
        return self.c_minus * u ** (-self.r) * self.slowly_varying(u)

    def side(self, u, which: str):
        return self.plus(u) if which == "plus" else self.minus(u)


@dataclass(frozen=True)
class InnerProfile:
    """nu restricted to |y| <= 1: stable(alpha) density or no mass at all."""
    kind: Literal["stable", "truncated"]
    alpha: Optional[float] = None

    @classmethod
    def stable(cls, alpha: float) -> "InnerProfile":
        return cls(kind="stable", alpha=float(alpha))

    @classmethod
    def truncated(cls) -> "InnerProfile":
        return cls(kind="truncated")


@dataclass(frozen=True)
class LevyModel:
    """
    Lévy 过程生成三元组 (d, nu, mu), truncation function 为 1{|y| <= 1}

    tails=None 表示没有 Lévy 测度 (纯 Brownian + drift, 用于 Gaussian 对照实验)
    """
    d: float
    mu: float
    tails: Optional[TailSpec]
    inner: InnerProfile = InnerProfile.truncated()

    def __post_init__(self):
        if self.d < 0:
            raise PreconditionError(f"Gaussian variance d must be >= 0, got {self.d}")
        if self.inner.kind == "stable":
            alpha = self.inner.alpha
            if self.tails is None:
                raise PreconditionError("stable inner profile requires a tail block")
            if alpha is None or not 0 < alpha < 2:
                raise PreconditionError(f"stable alpha must lie in (0, 2), got {alpha}")
            if abs(alpha - self.tails.r) > 1e-12:
                raise PreconditionError(
                    "stable inner profile requires alpha == r",
                    data={"alpha": alpha, "r": self.tails.r},
                )
            if not self.tails.is_pure_power:
                raise PreconditionError("stable measure has a pure power tail (sv must be none)")

    @classmethod
    def symmetric_stable(cls, alpha: float, density: float = 1.0) -> "LevyModel":
        """nu(dy) = density |y|^{-1-alpha} dy, i.e. H_+(u) = density u^-alpha / alpha."""
        c = density / alpha
        return cls(d=0.0, mu=0.0,
                   tails=TailSpec(r=alpha, c_plus=c, c_minus=c),
                   inner=InnerProfile.stable(alpha))

    @classmethod
    def brownian(cls, d: float = 1.0, mu: float = 0.0) -> "LevyModel":
        return cls(d=d, mu=mu, tails=None, inner=InnerProfile.truncated())

    @property
    def r(self) -> Optional[float]:
        return None if self.tails is None else self.tails.r

    @property
    def kappa(self) -> float:
        return 0.0 if self.tails is None else self.tails.kappa

    @property
    def side_densities(self) -> Tuple[float, float]:
        """(c_1, c_2) of the stable density (c_1 1{y<0} + c_2 1{y>0}) |y|^{-1-alpha}."""
        if self.inner.kind != "stable":
            raise PreconditionError("side densities are defined for the stable profile only")
        r = self.tails.r
        return r * self.tails.c_minus, r * self.tails.c_plus


@dataclass(frozen=True)
class Decomposition:
    """
    L = xi^eps + eta^eps 在跳跃阈值 eps^-rho 处的切分

    beta: big jump 强度 H(eps^-rho); small_var / small_mean: eps*xi^eps 每单位时间的方差 / 均值
    """
    eps: float
    rho: float
    beta: float
    small_var: float
    small_mean: float
    threshold: float
    negative_prob: float


def _check_u(u) -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 1.0):
        raise DomainError("tails are only defined for u >= 1", data={"u": arr.tolist()})
    return arr


def _as_output(value, u):
    return float(value) if np.ndim(u) == 0 else value


def tail_plus(model: LevyModel, u):
    """H_+(u) = nu(u, inf), u >= 1"""
    arr = _check_u(u)
    if model.tails is None:
        return _as_output(np.zeros_like(arr), u)
    return _as_output(model.tails.plus(arr), u)


def tail_minus(model: LevyModel, u):
    """H_-(-u) = nu(-inf, -u), u >= 1"""
    arr = _check_u(u)
    if model.tails is None:
        return _as_output(np.zeros_like(arr), u)
    return _as_output(model.tails.minus(arr), u)


def tail_total(model: LevyModel, u):
    """H(u) = H_-(-u) + H_+(u)"""
    arr = _check_u(u)
    if model.tails is None:
        return _as_output(np.zeros_like(arr), u)
    return _as_output(model.tails.plus(arr) + model.tails.minus(arr), u)


def _check_eps_rho(eps: float, rho: float):
    if not 0 < eps < 1:
        raise PreconditionError(f"eps must lie in (0, 1), got {eps}")
    if not 0.5 < rho < 1:
        raise PreconditionError(f"rho must lie in (1/2, 1), got {rho}")


def big_jump_rate(model: LevyModel, eps: float, rho: float) -> float:
    """beta_eps = H(eps^-rho)"""
    _check_eps_rho(eps, rho)
    return tail_total(model, eps ** (-rho))


# ---- moments of nu on 1 < |y| <= R ----

def _side_moments(tails: TailSpec, which: str, R: float) -> Tuple[float, float]:
    """(int y nu(dy), int y^2 nu(dy)) over (1, R] on one side, magnitudes only."""
    if R <= 1.0:
        return 0.0, 0.0
    c = tails.c_plus if which == "plus" else tails.c_minus
    if c == 0.0:
        return 0.0, 0.0
    H = lambda y: float(tails.side(y, which))
    r = tails.r
    if tails.is_pure_power:
        int_h = c * math.log(R) if r == 1.0 else c * (R ** (1.0 - r) - 1.0) / (1.0 - r)
        int_yh = c * math.log(R) if r == 2.0 else c * (R ** (2.0 - r) - 1.0) / (2.0 - r)
    else:
        int_h, _ = integrate.quad(H, 1.0, R, limit=200)
        int_yh, _ = integrate.quad(lambda y: y * H(y), 1.0, R, limit=200)
    # integration by parts against -dH
    first = H(1.0) - R * H(R) + int_h
    second = H(1.0) - R * R * H(R) + 2.0 * int_yh
    return first, second


def _inner_second_moment(model: LevyModel) -> float:
    if model.inner.kind != "stable":
        return 0.0
    c1, c2 = model.side_densities
    return (c1 + c2) / (2.0 - model.inner.alpha)


def decompose(model: LevyModel, eps: float, rho: float) -> Decomposition:
    """
    构造 eps 依赖的分解

    small_var = eps^2 (d + int_{|y| <= eps^-rho} y^2 nu(dy))
    small_mean = eps mu + eps int_{1 < |y| <= eps^-rho} y nu(dy)
    """
    _check_eps_rho(eps, rho)
    R = eps ** (-rho)
    if model.tails is None:
        beta, neg, first, second = 0.0, 0.0, 0.0, 0.0
    else:
        beta = float(model.tails.plus(R) + model.tails.minus(R))
        neg = float(model.tails.minus(R)) / beta
        f_plus, s_plus = _side_moments(model.tails, "plus", R)
        f_minus, s_minus = _side_moments(model.tails, "minus", R)
        first, second = f_plus - f_minus, s_plus + s_minus
    small_var = eps * eps * (model.d + _inner_second_moment(model) + second)
    small_mean = eps * (model.mu + first)
    decomposition = Decomposition(
        eps=eps, rho=rho, beta=beta, small_var=small_var, small_mean=small_mean,
        threshold=R, negative_prob=neg,
    )
    logger.debug(f"decomposition: {decomposition}")
    return decomposition


# ---- sampling ----

def _uniform_open(rng: np.random.Generator, size=None):
    """Uniform on (0, 1]."""
    return 1.0 - rng.random(size)


def sample_interjump_time(decomposition: Decomposition, rng: np.random.Generator) -> float:
    """Exp(beta_eps) via -ln(U) / beta_eps"""
    if not decomposition.beta > 0:
        raise PreconditionError("no big jumps: beta_eps == 0")
    return float(-math.log(_uniform_open(rng)) / decomposition.beta)


@lru_cache(maxsize=256)
def _inversion_table(tails: TailSpec, which: str, threshold: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    单调表: log(x) knots 与 log(H(x)/H(threshold)), x in [threshold, threshold * e^L]
    """
    span = 2.0 * 16.0 * math.log(10.0) / tails.r + 10.0
    log_x = math.log(threshold) + np.linspace(0.0, span, INVERSION_KNOTS)
    base = float(tails.side(threshold, which))
    log_ratio = np.log(tails.side(np.exp(log_x), which) / base)
    return log_x, log_ratio


def invert_conditional_tail(tails: TailSpec, which: str, threshold: float, u: float) -> float:
    """
    Solve H(x) / H(threshold) = u for x >= threshold.

    Pareto 闭式解 (常数 sv); 否则查表定位区间后二分到相对精度 1e-10
    """
    if tails.is_pure_power:
        return threshold * u ** (-1.0 / tails.r)
    log_x, log_ratio = _inversion_table(tails, which, threshold)
    target = math.log(u)
    base = float(tails.side(threshold, which))
    f = lambda x: math.log(float(tails.side(x, which)) / base) - target
    if target >= 0.0:
        return threshold
    if target < log_ratio[-1]:
        lo = math.exp(log_x[-1])
        hi = lo * 2.0
        while f(hi) > 0:
            lo, hi = hi, hi * 2.0
    else:
        # log_ratio 递减, 翻转后用 searchsorted 定位
        k = len(log_ratio) - int(np.searchsorted(log_ratio[::-1], target, side="right"))
        k = min(max(k, 1), len(log_x) - 1)
        lo, hi = math.exp(log_x[k - 1]), math.exp(log_x[k])
    return float(optimize.bisect(f, lo, hi, rtol=INVERSION_RTOL, maxiter=200))


def draw_big_jump(model: LevyModel, decomposition: Decomposition, rng: np.random.Generator) -> float:
    """W ~ beta^-1 nu restricted to |y| > eps^-rho (sign first, then magnitude)."""
    if not decomposition.beta > 0:
        raise PreconditionError("no big jumps: beta_eps == 0")
    negative = rng.random() < decomposition.negative_prob
    which = "minus" if negative else "plus"
    magnitude = invert_conditional_tail(model.tails, which, decomposition.threshold,
                                        float(_uniform_open(rng)))
    return -magnitude if negative else magnitude


def sample_big_jump(model: LevyModel, eps: float, rho: float, rng: np.random.Generator) -> float:
    return draw_big_jump(model, decompose(model, eps, rho), rng)


def sample_small_increment(decomposition: Decomposition, h: float, rng: np.random.Generator) -> float:
    """Gaussian surrogate of eps*xi^eps over time h: N(small_mean h, small_var h)"""
    if h <= 0:
        raise PreconditionError(f"h must be positive, got {h}")
    return float(decomposition.small_mean * h
                 + math.sqrt(decomposition.small_var * h) * rng.standard_normal())


# ---- exact stable increments ----

def stable_parameters(alpha: float, c1: float, c2: float) -> Tuple[float, float, float]:
    """
    nu(dy) = (c1 1{y<0} + c2 1{y>0}) |y|^{-1-alpha} dy 对应的 S1 参数

    Returns:
        (scale, skew, shift): 单位时间增量 = scale * Z(alpha, skew) + shift,
        shift 来自 1{|y| <= 1} truncation 的补偿项
    """
    if not 0 < alpha < 2:
        raise DomainError(f"alpha must lie in (0, 2), got {alpha}")
    total = c1 + c2
    if total <= 0:
        raise PreconditionError("stable measure needs positive mass")
    if alpha == 1.0:
        # 1{|y| <= 1} truncation 的补偿: (c2 - c1)(1 - Euler gamma)
        return total * math.pi / 2.0, (c2 - c1) / total, (c2 - c1) * (1.0 - np.euler_gamma)
    scale = (-total * gamma_fn(-alpha) * math.cos(math.pi * alpha / 2.0)) ** (1.0 / alpha)
    skew = (c2 - c1) / total
    shift = (c2 - c1) / (alpha - 1.0)
    return scale, skew, shift


def stable_log_drift(alpha: float, scale: float, skew: float, h: float) -> float:
    """(2/pi) skew scale h ln(scale h) when alpha = 1, else 0."""
    if alpha != 1.0 or skew == 0.0:
        return 0.0
    return 2.0 / math.pi * skew * scale * h * math.log(scale * h)


def standard_stable(alpha: float, skew: float, rng: np.random.Generator, size=None):
    """S1 standard stable variates (scale 1, location 0), Chambers-Mallows-Stuck / Weron."""
    v = math.pi * (rng.random(size) - 0.5)
    w = -np.log(_uniform_open(rng, size))
    if alpha == 1.0:
        if skew == 0.0:
            return np.tan(v)
        half = math.pi / 2.0 + skew * v
        return 2.0 / math.pi * (half * np.tan(v) - skew * np.log(math.pi / 2.0 * w * np.cos(v) / half))
    t = skew * math.tan(math.pi * alpha / 2.0)
    b = math.atan(t) / alpha
    s = (1.0 + t * t) ** (1.0 / (2.0 * alpha))
    return (s * np.sin(alpha * (v + b)) / np.cos(v) ** (1.0 / alpha)
            * (np.cos(v - alpha * (v + b)) / w) ** ((1.0 - alpha) / alpha))


def stable_increment(alpha: float, side_weights: Tuple[float, float], eps: float, h: float,
                     rng: np.random.Generator, size=None):
    """
    eps * L_h for the stable measure with side densities (c_1, c_2), exact in law.

    alpha = 1 且不对称时时间缩放带对数位置项:
    L_h = scale h Z + (2/pi) skew scale h ln(scale h) + shift h
    """
    if not 0 < alpha < 2:
        raise DomainError(f"alpha must lie in (0, 2), got {alpha}")
    if h <= 0:
        raise PreconditionError(f"h must be positive, got {h}")
    scale, skew, shift = stable_parameters(alpha, *side_weights)
    z = standard_stable(alpha, skew, rng, size)
    out = eps * (scale * h ** (1.0 / alpha) * z + shift * h + stable_log_drift(alpha, scale, skew, h))
    return float(out) if size is None else out


# ---- regular variation utilities ----

def rv_ratio_profile(tails: TailSpec, lambda_grid: Iterable[float], u_grid: Iterable[float],
                     side: str = "plus") -> np.ndarray:
    """max_lambda |H(lambda u)/H(u) - lambda^-r| for each u in u_grid."""
    lam = np.asarray(list(lambda_grid), dtype=float)
    u = np.asarray(list(u_grid), dtype=float)
    if np.any(lam < 0.5) or np.any(lam > 2.0):
        raise PreconditionError("lambda_grid must lie inside [1/2, 2]")
    if np.any(u < 1.0) or np.any(np.diff(u) <= 0):
        raise PreconditionError("u_grid must be increasing and >= 1")
    if side == "minus" and tails.c_minus == 0.0:
        return np.zeros_like(u)
    ratio = tails.side(np.outer(u, lam), side) / tails.side(u, side)[:, None]
    return np.max(np.abs(ratio - lam[None, :] ** (-tails.r)), axis=1)


def rv_ratio_check(tails: TailSpec, lambda_grid: Iterable[float], u_grid: Iterable[float],
                   side: str = "plus") -> float:
    return float(np.max(rv_ratio_profile(tails, lambda_grid, u_grid, side)))
