# -*- coding: utf-8 -*-
"""
The Golden Schema - declarative experiment configuration
所有实验 (analyze / exitlaw / transitions / meta / shorttime / gauss / saddle / tube)
共用的配置结构, 由 TOML 文件加载后经 validate() 检查参数约束。
"""
import math
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.core.errors import PotentialError, PreconditionError
from app.core.levy import InnerProfile, LevyModel, TailSpec
from app.core.potential import Landscape, PolynomialPotential, analyze
from app.core.simulate import SimConfig

ExperimentKind = Literal["analyze", "exitlaw", "transitions", "meta", "shorttime", "gauss", "saddle", "tube"]


class PotentialBlock(BaseModel):
    """[potential] U(x) = sum coefficients[k] x^k"""
    model_config = ConfigDict(extra="forbid")

    coefficients: List[float] = Field(..., min_length=5, description="升幂系数 a_0..a_deg")
    search_radius: Optional[float] = Field(default=None, gt=0, description="临界点搜索半径, 默认 Cauchy 界")

    def build(self) -> PolynomialPotential:
        return PolynomialPotential(tuple(self.coefficients))


class TailBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    r: float = Field(..., gt=0)
    c_plus: float = Field(..., gt=0)
    c_minus: float = Field(default=0.0, ge=0)
    sv: Literal["constant", "logpower"] = "constant"
    p: float = Field(default=0.0, ge=-2, le=2, description="LogPower 指数")


class LevyBlock(BaseModel):
    """[levy] generating triplet; 没有 [levy.tails] 表示纯 Brownian"""
    model_config = ConfigDict(extra="forbid")

    d: float = Field(default=0.0, ge=0, description="Gaussian 方差")
    mu: float = 0.0
    inner: Literal["stable", "truncated"] = "truncated"
    alpha: Optional[float] = Field(default=None, gt=0, lt=2)
    tails: Optional[TailBlock] = None

    def build(self) -> LevyModel:
        tails = None
        if self.tails is not None:
            tails = TailSpec(
                r=self.tails.r,
                c_plus=self.tails.c_plus,
                c_minus=self.tails.c_minus,
                sv_power=self.tails.p if self.tails.sv == "logpower" else None,
            )
        if self.inner == "stable":
            alpha = self.alpha if self.alpha is not None else (tails.r if tails else None)
            if alpha is None:
                raise PreconditionError("stable inner profile needs alpha or a tail block")
            inner = InnerProfile.stable(alpha)
        else:
            inner = InnerProfile.truncated()
        return LevyModel(d=self.d, mu=self.mu, tails=tails, inner=inner)


class RunBlock(BaseModel):
    """[run] eps sweep 与数值参数"""
    model_config = ConfigDict(extra="forbid")

    eps: List[float] = Field(..., min_length=1)
    rho: float
    gamma: float
    delta: Optional[float] = Field(default=None, description="B_Delta 半径, 默认 Delta_0/4")
    h: float = Field(default=1e-3, gt=0)
    horizon: Optional[float] = Field(default=None, gt=0, description="默认 horizon_factor/lambda^i(eps)")
    horizon_factor: float = Field(default=50.0, gt=0)
    overflow: float = Field(default=1e6, gt=0)
    n_paths: int = 1000
    seed: int = Field(default=0, ge=0)
    mode: Literal["decomposed", "exact_stable"] = "decomposed"
    margin: Optional[float] = Field(default=None, gt=0, description="覆盖 eps^gamma 的收缩宽度")
    dump_records: bool = False
    trace_stride: Optional[int] = Field(default=None, ge=1)


class ExperimentBlock(BaseModel):
    """[experiment] 实验类型与实验特有参数"""
    model_config = ConfigDict(extra="forbid")

    kind: ExperimentKind = "analyze"
    well: int = Field(default=1, ge=1)
    stop: Literal["sigma", "big_t", "tau"] = "sigma"
    times: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    joint: bool = True
    delta_exponent: float = Field(default=0.5, gt=0)
    short_time: float = Field(default=1.0, gt=0)
    saddle: int = Field(default=1, ge=1)
    tube_duration: Optional[float] = Field(default=None, gt=0)
    instrumented: int = Field(default=0, ge=0, description="transitions: 同时记录 sigma/T/tau 的路径数")
    mean_tolerance: float = Field(default=0.2, gt=0, description="lambda * mean 允许偏离 1 的幅度")
    allowed_inversions: int = Field(default=1, ge=0, description="eps 扫描趋势检验允许的逆序数")
    saddle_threshold: float = Field(default=0.05, gt=0)
    tube_fraction: float = Field(default=0.01, gt=0)
    slope_tolerance: float = Field(default=0.25, gt=0)
    output: Optional[str] = Field(default=None, description="输出目录, 默认 Settings.output_root")


class ExperimentConfig(BaseModel):
    """完整的实验配置"""
    model_config = ConfigDict(
        extra="forbid",
        json_schema_extra={
            "example": {
                "potential": {"coefficients": [0.0, 0.0, -0.5, 0.0, 0.25]},
                "levy": {"inner": "stable", "tails": {"r": 1.0, "c_plus": 1.0, "c_minus": 1.0}},
                "run": {"eps": [0.05], "rho": 0.7, "gamma": 0.05, "n_paths": 2000},
                "experiment": {"kind": "exitlaw", "well": 1},
            }
        },
    )

    potential: PotentialBlock
    levy: LevyBlock
    run: RunBlock
    experiment: ExperimentBlock = Field(default_factory=ExperimentBlock)

    def landscape(self) -> Landscape:
        return analyze(self.potential.build(), search_radius=self.potential.search_radius)

    def delta_for(self, landscape: Landscape) -> float:
        if self.run.delta is not None:
            return self.run.delta
        return landscape.delta_0 / 4.0 if math.isfinite(landscape.delta_0) else 1.0

    def sim_config(self, eps: float, landscape: Landscape, horizon: float) -> SimConfig:
        run = self.run
        return SimConfig(
            eps=eps, rho=run.rho, gamma=run.gamma, h=run.h, horizon=horizon,
            overflow=run.overflow, delta=self.delta_for(landscape), seed=run.seed,
            mode=run.mode, margin=run.margin,
        )


def validate(config: ExperimentConfig) -> List[str]:
    """
    检查参数约束, 返回违反的约束名 (空列表表示合法)

    约束: 1/2<rho<1, 0<gamma<(1-rho)/4, 2gamma<rho<1-2gamma, r(2rho-1)+gamma>0,
    eps in (0,1), 0<delta<Delta_0, n_paths>=1; sigma 实验另外要求 m_i in Omega^i_eps
    """
    run = config.run
    rho, gamma = run.rho, run.gamma
    violations: List[str] = []
    if not rho > 0.5:
        violations.append("1/2<rho")
    if not rho < 1:
        violations.append("rho<1")
    if not gamma > 0:
        violations.append("gamma>0")
    if not gamma < (1 - rho) / 4:
        violations.append("gamma<(1-rho)/4")
    if not 2 * gamma < rho < 1 - 2 * gamma:
        violations.append("2gamma<rho<1-2gamma")
    tails = config.levy.tails
    if tails is not None and not tails.r * (2 * rho - 1) + gamma > 0:
        violations.append("r(2rho-1)+gamma>0")
    if any(not 0 < e < 1 for e in run.eps):
        violations.append("eps in (0,1)")
    if run.n_paths < 1:
        violations.append("n_paths>=1")

    try:
        config.levy.build()
    except PreconditionError as e:
        violations.append(f"levy: {e.message}")
    if run.mode == "exact_stable" and config.levy.inner != "stable":
        violations.append("exact_stable needs inner = stable")
    if config.experiment.kind != "gauss" and tails is None:
        violations.append("levy.tails required")

    try:
        landscape = config.landscape()
    except PotentialError as e:
        violations.append(f"potential: {e.message}")
        return violations

    delta = config.delta_for(landscape)
    if not 0 < delta < landscape.delta_0:
        violations.append("delta<Delta_0")
    exp = config.experiment
    if exp.well > landscape.n:
        violations.append("well<=n")
    if exp.kind == "saddle" and exp.saddle > landscape.n - 1:
        violations.append("saddle<=n-1")
    if exp.kind == "shorttime" and tails is not None and not exp.delta_exponent < tails.r:
        violations.append("delta_exponent<r")
    if exp.kind == "exitlaw" and exp.stop in ("sigma", "big_t"):
        for e in run.eps:
            if not 0 < e < 1:
                continue
            margin = run.margin if run.margin is not None else e ** gamma
            for i in range(1, landscape.n + 1):
                lo, hi = landscape.shrunk_well(i, margin)
                if not lo <= landscape.minimum(i) <= hi:
                    violations.append("m_i in Omega^i_eps")
                    break
            else:
                continue
            break
    return violations


def default_horizon(config: ExperimentConfig, rate: float) -> float:
    """run.horizon, 否则 horizon_factor / rate"""
    if config.run.horizon is not None:
        return config.run.horizon
    return config.run.horizon_factor / rate if rate > 0 else math.inf
