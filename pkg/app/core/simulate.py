# -*- coding: utf-8 -*-
"""
Path Simulator - dX = -U'(X) dt + eps dL

职责:
- 两次 big jump 之间用 Euler 积分 small-jump 动力学, 到达时刻原子地注入 eps*W_k
- ExactStable 模式: 每个子步直接使用精确 stable 增量, 没有单独的 big jump 过程
- 停止时刻: sigma (离开井内区间), T (进入其他收缩井), tau (进入其他极小值的 Delta 球),
  S (离开鞍点邻域), sigma_Delta (离开本井 Delta 球)
- 诊断: tube 偏差、快照、轨迹 dump

路径完全由 (seed, path_index) 决定, 与 worker 数量无关。
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.config import get_settings
from app.core import kernels
from app.core.errors import PreconditionError, StateOverflow
from app.core.levy import (
    LevyModel,
    decompose,
    draw_big_jump,
    sample_interjump_time,
    stable_parameters,
    standard_stable,
)
from app.core.potential import Landscape, flow_path
from app.core.rng import path_streams

logger = logging.getLogger(__name__)

SIGMA = "sigma"
BIG_T = "big_t"
TAU = "tau"
SADDLE_S = "saddle_s"
DELTA = "delta"
TIME = "time"


class SimConfig(BaseModel):
    """单个 eps 下的模拟参数 (不变量在加载实验配置时已检查)"""

    model_config = ConfigDict(frozen=True)

    eps: float = Field(gt=0, lt=1)
    rho: float
    gamma: float = Field(gt=0)
    h: float = Field(default=1e-3, gt=0)
    horizon: float = Field(gt=0)
    overflow: float = Field(default=1e6, gt=0)
    delta: float = Field(gt=0)
    seed: int = Field(default=0, ge=0)
    mode: Literal["decomposed", "exact_stable"] = "decomposed"
    # 收缩井 / sigma 区间 / 鞍点球使用的绝对宽度; 默认 eps^gamma
    margin: Optional[float] = Field(default=None, gt=0)

    @field_validator("rho")
    @classmethod
    def _rho_range(cls, v: float) -> float:
        if not 0.5 < v < 1:
            raise ValueError("rho must lie in (1/2, 1)")
        return v

    @property
    def margin_value(self) -> float:
        return self.margin if self.margin is not None else self.eps ** self.gamma


@dataclass(frozen=True)
class ExitRecord:
    """一次停止事件; kind=None 且 censored=True 表示 horizon 之前没有触发"""
    well: int
    kind: Optional[str]
    t: float
    landing: Optional[int]
    jumps: int
    overflow: bool = False
    censored: bool = False
    x: float = math.nan
    jump_log: Tuple[Tuple[float, float], ...] = field(default=(), compare=False, repr=False)

    def to_json(self) -> Dict[str, Any]:
        return {
            "well": self.well,
            "kind": self.kind,
            "t": self.t,
            "landing": self.landing,
            "jumps": self.jumps,
            "overflow": self.overflow,
            "censored": self.censored,
        }


@dataclass(frozen=True)
class StoppingRule:
    """
    停止条件: enter=True 时进入任一区间触发, 否则离开全部区间触发;
    time_limit 给出确定性停止时刻。
    """
    intervals: np.ndarray
    enter: bool
    time_limit: Optional[float] = None

    @classmethod
    def leave_interval(cls, lo: float, hi: float) -> "StoppingRule":
        return cls(np.array([[lo, hi]], dtype=float), enter=False)

    @classmethod
    def leave_ball(cls, center: float, radius: float) -> "StoppingRule":
        return cls.leave_interval(center - radius, center + radius)

    @classmethod
    def enter_any(cls, intervals: Sequence[Tuple[float, float]]) -> "StoppingRule":
        arr = np.array(list(intervals), dtype=float).reshape(-1, 2)
        return cls(arr, enter=True)

    @classmethod
    def time_reached(cls, t: float) -> "StoppingRule":
        return cls(np.empty((0, 2)), enter=True, time_limit=float(t))

    @classmethod
    def never(cls) -> "StoppingRule":
        return cls(np.empty((0, 2)), enter=True)


@dataclass
class PathState:
    """
    可续跑的路径状态

    噪声缓冲区与游标、下一次 big jump 时刻都保存在这里,
    因此 simulate_until 在网格时刻截断后继续与一次运行结果逐位相同。
    """
    x: float
    t: float
    g: int
    next_jump: float
    jumps: int
    noise: np.random.Generator
    jump_rng: np.random.Generator
    z: np.ndarray
    s: np.ndarray
    pos: int
    overflowed: bool = False
    jump_log: List[Tuple[float, float]] = field(default_factory=list)
    keep_log: bool = False


@dataclass(frozen=True)
class TubeResult:
    deviation: float
    jump_time: float
    duration: float
    overflowed: bool


class PathSimulator:
    """
    一个 (landscape, model, SimConfig) 组合上的路径模拟器

    Args:
        landscape: analyze() 的结果
        model: Lévy 三元组
        cfg: 模拟参数
        noise_block: 每次补充噪声缓冲区的个数 (默认取 Settings.noise_block)
    """

    def __init__(self, landscape: Landscape, model: LevyModel, cfg: SimConfig,
                 noise_block: Optional[int] = None):
        if not cfg.delta < landscape.delta_0:
            raise PreconditionError("delta must be smaller than Delta_0",
                                    data={"delta": cfg.delta, "delta_0": landscape.delta_0})
        self.landscape = landscape
        self.model = model
        self.cfg = cfg
        self.margin = cfg.margin_value
        self.noise_block = noise_block or get_settings().noise_block
        self.decomposition = decompose(model, cfg.eps, cfg.rho)
        self._coefs = landscape.potential.drift_coefficients

        if cfg.mode == "exact_stable":
            if model.inner.kind != "stable":
                raise PreconditionError("exact_stable mode needs a stable Lévy measure")
            alpha = model.inner.alpha
            scale, skew, shift = stable_parameters(alpha, *model.side_densities)
            self._alpha, self._skew = alpha, skew
            self._mean = cfg.eps * (model.mu + shift)
            self._sd = cfg.eps * math.sqrt(model.d)
            self._stable_scale = cfg.eps * scale
            self._inv_alpha = 1.0 / alpha
            # alpha = 1: eps L_dt 含 (2/pi) skew eps scale dt ln(scale dt)
            self._log_coef = 2.0 / math.pi * skew * cfg.eps * scale if alpha == 1.0 else 0.0
            self._log_scale = scale
            self._beta = 0.0
        else:
            self._alpha, self._skew = 0.0, 0.0
            self._mean = self.decomposition.small_mean
            self._sd = math.sqrt(self.decomposition.small_var)
            self._stable_scale = 0.0
            self._inv_alpha = 0.5
            self._log_coef, self._log_scale = 0.0, 1.0
            self._beta = self.decomposition.beta
        logger.debug(f"simulator ready: mode={cfg.mode} beta={self._beta:.6g} "
                     f"mean={self._mean:.6g} sd={self._sd:.6g}")

    # ---- state handling ----

    def _refill(self, state: PathState):
        n = self.noise_block
        if self._stable_scale != 0.0:
            state.z = state.noise.standard_normal(n) if self._sd != 0.0 else np.zeros(n)
            state.s = np.asarray(standard_stable(self._alpha, self._skew, state.noise, n), dtype=float)
        else:
            state.z = state.noise.standard_normal(n)
            state.s = state.z
        state.pos = 0

    def _next_arrival(self, state: PathState) -> float:
        if self._beta <= 0:
            return math.inf
        return state.t + sample_interjump_time(self.decomposition, state.jump_rng)

    def new_state(self, x0: float, path_index: int = 0, keep_log: bool = False) -> PathState:
        if not math.isfinite(x0):
            raise PreconditionError(f"start point must be finite, got {x0}")
        noise, jump_rng = path_streams(self.cfg.seed, path_index)
        empty = np.empty(0)
        state = PathState(x=float(x0), t=0.0, g=0, next_jump=math.inf, jumps=0,
                          noise=noise, jump_rng=jump_rng, z=empty, s=empty, pos=0,
                          keep_log=keep_log)
        state.next_jump = self._next_arrival(state)
        return state

    def _segment(self, state: PathState, t1: float, rule: StoppingRule) -> int:
        """Euler 到 t1 (refill 透明处理), 返回 kernels 状态码"""
        while True:
            x, t, g, pos, status = kernels.euler_segment(
                state.x, state.t, state.g, t1, self.cfg.h, self._coefs,
                self._mean, self._sd, self._stable_scale, self._inv_alpha,
                self._log_coef, self._log_scale,
                state.z, state.s, state.pos, rule.intervals, rule.enter, self.cfg.overflow,
            )
            state.x, state.t, state.g, state.pos = float(x), float(t), int(g), int(pos)
            if status == kernels.STARVED:
                self._refill(state)
                continue
            return status

    # ---- operations ----

    def step_interval(self, state: PathState, duration: float) -> PathState:
        """
        small-jump 动力学 (ExactStable 模式下为完整 stable 增量) 演化 duration,
        不注入 big jump。

        Raises:
            StateOverflow: |x| 超过 overflow
        """
        if duration < 0:
            raise PreconditionError(f"duration must be nonnegative, got {duration}")
        if duration == 0:
            return state
        status = self._segment(state, state.t + duration, StoppingRule.never())
        if status == kernels.OVERFLOW:
            state.overflowed = True
            raise StateOverflow(f"|x| exceeded {self.cfg.overflow}",
                                data={"t": state.t, "x": state.x})
        return state

    def _triggered(self, x: float, rule: StoppingRule) -> bool:
        inside = any(lo <= x <= hi for lo, hi in rule.intervals)
        return inside if rule.enter else not inside

    def simulate_until(self, state: PathState, rule: StoppingRule, well: int = 0,
                       kind: Optional[str] = None, horizon: Optional[float] = None,
                       classify=None) -> ExitRecord:
        """
        交替执行 Exp(beta) 间隔内的 Euler 演化与 big jump 注入, 每个子步和每次
        跳跃之后检查停止条件。

        Args:
            state: 路径状态 (原地推进)
            rule: 停止条件
            well: 记录中的起始井编号
            kind: 触发时写入记录的 stop kind
            horizon: 绝对时间上限 (默认 cfg.horizon)
            classify: x -> landing 编号

        Returns:
            ExitRecord; horizon 截断时 kind=None, censored=True
        """
        horizon = self.cfg.horizon if horizon is None else horizon
        limit = horizon if rule.time_limit is None else min(rule.time_limit, horizon)

        def record(kind_, censored=False, overflow=False, at_jump=False):
            # jumps 只计 stop_time 之前的到达; 触发停止的那次跳跃仍留在 jump_log 中
            landing = None
            if classify is not None and not censored and not overflow:
                landing = classify(state.x)
            return ExitRecord(
                well=well, kind=kind_, t=state.t, landing=landing,
                jumps=state.jumps - 1 if at_jump else state.jumps,
                overflow=overflow, censored=censored, x=state.x,
                jump_log=tuple(state.jump_log),
            )

        while True:
            seg_end = min(state.next_jump, limit)
            status = self._segment(state, seg_end, rule)
            if status == kernels.OVERFLOW:
                state.overflowed = True
                return record(None, censored=True, overflow=True)
            if status == kernels.HIT:
                return record(kind)
            if state.t >= limit and not state.next_jump <= limit:
                if rule.time_limit is not None and rule.time_limit <= horizon:
                    return record(kind or TIME)
                return record(None, censored=True)
            # big jump 到达 (左极限之后原子地加上 eps*W)
            w = draw_big_jump(self.model, self.decomposition, state.jump_rng)
            state.x += self.cfg.eps * w
            state.jumps += 1
            if state.keep_log:
                state.jump_log.append((state.t, self.cfg.eps * w))
            state.next_jump = self._next_arrival(state)
            if not abs(state.x) <= self.cfg.overflow:
                state.overflowed = True
                return record(None, censored=True, overflow=True, at_jump=True)
            if self._triggered(state.x, rule):
                return record(kind, at_jump=True)

    # ---- stopping times ----

    def _check_well(self, i: int):
        if not 1 <= i <= self.landscape.n:
            raise PreconditionError(f"well index must lie in 1..{self.landscape.n}, got {i}")

    def first_exit_sigma(self, i: int, x0: Optional[float] = None, path_index: int = 0) -> ExitRecord:
        """sigma^i: 离开 [s_{i-1}+margin, s_i-margin]; landing 为 Omega^j_eps 编号或 None"""
        self._check_well(i)
        x0 = self.landscape.minimum(i) if x0 is None else x0
        lo, hi = self.landscape.shrunk_well(i, self.margin)
        if not lo <= x0 <= hi:
            raise PreconditionError("sigma start must lie in the shrunk well",
                                    data={"well": i, "x0": x0, "interval": [lo, hi]})
        state = self.new_state(x0, path_index)
        rule = StoppingRule.leave_interval(*self.landscape.sigma_interval(i, self.margin))
        return self.simulate_until(state, rule, well=i, kind=SIGMA,
                                   classify=lambda x: self.landscape.shrunk_well_of(x, self.margin))

    def _big_t_rule(self, i: int) -> StoppingRule:
        return StoppingRule.enter_any(
            [self.landscape.shrunk_well(k, self.margin) for k in range(1, self.landscape.n + 1) if k != i]
        )

    def transition_big_t(self, i: int, x0: Optional[float] = None, path_index: int = 0) -> ExitRecord:
        """T^i: 首次进入 union_{k != i} Omega^k_eps (鞍点间隙中的落点继续演化)"""
        self._check_well(i)
        x0 = self.landscape.minimum(i) if x0 is None else x0
        lo, hi = self.landscape.shrunk_well(i, self.margin)
        if not lo <= x0 <= hi:
            raise PreconditionError("T start must lie in the shrunk well",
                                    data={"well": i, "x0": x0})
        state = self.new_state(x0, path_index)
        return self.simulate_until(state, self._big_t_rule(i), well=i, kind=BIG_T,
                                   classify=lambda x: self.landscape.shrunk_well_of(x, self.margin))

    def _tau_rule(self, i: int) -> StoppingRule:
        d = self.cfg.delta
        return StoppingRule.enter_any(
            [(m - d, m + d) for k, m in enumerate(self.landscape.minima, start=1) if k != i]
        )

    def transition_tau(self, i: int, x0: Optional[float] = None, path_index: int = 0) -> ExitRecord:
        """tau^i: 首次进入 union_{k != i} B_Delta(m_k)"""
        self._check_well(i)
        m = self.landscape.minimum(i)
        x0 = m if x0 is None else x0
        if not abs(x0 - m) <= self.cfg.delta:
            raise PreconditionError("tau start must lie in B_Delta(m_i)", data={"well": i, "x0": x0})
        state = self.new_state(x0, path_index)
        return self.simulate_until(state, self._tau_rule(i), well=i, kind=TAU,
                                   classify=lambda x: self.landscape.ball_index(x, self.cfg.delta))

    def instrumented_transition(self, i: int, path_index: int = 0) -> Tuple[ExitRecord, ExitRecord, ExitRecord]:
        """
        同一条轨迹 (同一 seed / path_index) 上的 (sigma, T, tau)

        要求 B_Delta(m_k) 包含在 Omega^k_eps 内, 否则三者的嵌套关系不成立。
        """
        self._check_well(i)
        for k in range(1, self.landscape.n + 1):
            lo, hi = self.landscape.shrunk_well(k, self.margin)
            m = self.landscape.minimum(k)
            if not (lo <= m - self.cfg.delta and m + self.cfg.delta <= hi):
                raise PreconditionError("B_Delta(m_k) must lie inside Omega^k_eps",
                                        data={"well": k, "delta": self.cfg.delta, "margin": self.margin})
        return (
            self.first_exit_sigma(i, path_index=path_index),
            self.transition_big_t(i, path_index=path_index),
            self.transition_tau(i, path_index=path_index),
        )

    def saddle_escape(self, j: int, x0: Optional[float] = None, path_index: int = 0,
                      keep_log: bool = False) -> ExitRecord:
        """S: 离开 B_{2 margin}(s_j); keep_log=True 时记录中保留 (时刻, eps*W) 跳跃日志"""
        s = self.landscape.saddle(j)
        if s is None:
            raise PreconditionError(f"saddle index must lie in 1..{self.landscape.n - 1}, got {j}")
        radius = 2.0 * self.margin
        x0 = s if x0 is None else x0
        if not abs(x0 - s) <= radius:
            raise PreconditionError("saddle start must lie in B_{2 margin}(s_j)",
                                    data={"saddle": j, "x0": x0})
        state = self.new_state(x0, path_index, keep_log=keep_log)
        return self.simulate_until(state, StoppingRule.leave_ball(s, radius), well=0, kind=SADDLE_S,
                                   classify=lambda x: self.landscape.shrunk_well_of(x, self.margin))

    def delta_exit(self, i: int, x0: Optional[float] = None, path_index: int = 0) -> ExitRecord:
        """sigma_Delta: 离开 B_Delta(m_i)"""
        self._check_well(i)
        m = self.landscape.minimum(i)
        x0 = m if x0 is None else x0
        state = self.new_state(x0, path_index)
        return self.simulate_until(state, StoppingRule.leave_ball(m, self.cfg.delta), well=i, kind=DELTA,
                                   classify=lambda x: self.landscape.ball_index(x, self.cfg.delta))

    # ---- diagnostics ----

    def tube_deviation(self, x0: float, duration: float, path_index: int = 0) -> TubeResult:
        """
        仅 small-jump 动力学运行到 min(duration, 独立 Exp(beta) 时刻),
        返回与 flow_path 给出的确定性流在同一网格上的最大偏差。
        """
        inside = any(
            lo <= x0 <= hi
            for lo, hi in (self.landscape.sigma_interval(i, self.margin) for i in range(1, self.landscape.n + 1))
        )
        if not inside:
            raise PreconditionError("tube start must lie in some sigma interval", data={"x0": x0})
        noise, jump_rng = path_streams(self.cfg.seed, path_index)
        jump_time = (sample_interjump_time(self.decomposition, jump_rng)
                     if self.decomposition.beta > 0 else math.inf)
        span = min(duration, jump_time)
        n = int(math.ceil(span / self.cfg.h)) + 1
        z = noise.standard_normal(n)
        reference = flow_path(self.landscape.potential, x0, span, self.cfg.h)
        sup, overflowed = kernels.tube_sup_deviation(
            float(x0), float(span), self.cfg.h, self._coefs,
            self.decomposition.small_mean, math.sqrt(self.decomposition.small_var), z, reference,
            self.cfg.overflow,
        )
        return TubeResult(deviation=float(sup), jump_time=jump_time, duration=span, overflowed=bool(overflowed))

    def snapshot(self, i: int, times: Sequence[float], path_index: int = 0) -> np.ndarray:
        """X at the given increasing model times, started at m_i (nan after overflow)."""
        self._check_well(i)
        times = [float(t) for t in times]
        if any(t < 0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
            raise PreconditionError("snapshot times must be nonnegative and nondecreasing")
        state = self.new_state(self.landscape.minimum(i), path_index)
        horizon = max(times + [0.0])
        out = np.full(len(times), np.nan)
        for k, t in enumerate(times):
            if t > state.t:
                rec = self.simulate_until(state, StoppingRule.time_reached(t), well=i, horizon=horizon)
                if rec.overflow:
                    break
            out[k] = state.x
        return out

    def trace(self, x0: float, duration: float, stride: int = 1, path_index: int = 0) -> np.ndarray:
        """(t, x) rows every `stride` Euler steps, big jumps included."""
        if stride < 1:
            raise PreconditionError(f"stride must be >= 1, got {stride}")
        state = self.new_state(x0, path_index)
        rows = [(0.0, state.x)]
        n = int(math.floor(duration / (stride * self.cfg.h) + 1e-9))
        horizon = max(duration, n * stride * self.cfg.h)
        for k in range(1, n + 1):
            t = k * stride * self.cfg.h
            rec = self.simulate_until(state, StoppingRule.time_reached(t), horizon=horizon)
            if rec.overflow:
                break
            rows.append((state.t, state.x))
        return np.asarray(rows, dtype=float)


def classify_positions(landscape: Landscape, positions: np.ndarray, radius: float) -> List[Optional[int]]:
    """Ball index of each position (None outside every B_radius(m_k) or after overflow)."""
    return [None if not np.isfinite(x) else landscape.ball_index(float(x), radius) for x in positions]
