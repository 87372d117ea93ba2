# -*- coding: utf-8 -*-
"""
Statistical verification layer

- ExitSample: 可合并的出井样本 (merge 结合律, 按 path 序拼接)
- ks_exponential: lambda * sigma 对 Exp(1) 的 KS 检验; exponential_shape: 尺度自由的指数性检验
- exit_split_test: 落点比例对 q_ij/q_i 的 z 检验
- empirical_generator: 从 tau 样本估计 Q (delta method 标准误)
- fdd_test / fdd_joint_test: 快照对 e^{tQ} 的卡方检验
- short_time_localization, decreasing_trend, gaussian_slope_fit
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from app.core.errors import (
    ExcessCensoring,
    PreconditionError,
    TooFewSamples,
    UnclassifiedExcess,
)
from app.core.levy import LevyModel, tail_total
from app.core.limitchain import GeneratorMatrix, chain_transition_matrix
from app.core.simulate import ExitRecord

logger = logging.getLogger(__name__)

MIN_SAMPLES = 100
MAX_CENSORING = 0.01
MAX_UNCLASSIFIED = 0.05
Z_LIMIT = 3.0


@dataclass(frozen=True)
class ExitSample:
    """
    一个井的出井样本

    times / landings 只包含未截断的记录; censored 为截断 (horizon / overflow) 记录数
    """
    well: int
    times: Tuple[float, ...]
    landings: Tuple[Optional[int], ...]
    eps: float
    rate_used: float
    censored: int = 0

    def __post_init__(self):
        if len(self.times) != len(self.landings):
            raise PreconditionError("times and landings must have the same length")
        if any(not t > 0 for t in self.times):
            raise PreconditionError("exit times must be positive")

    @classmethod
    def from_records(cls, records: Iterable[ExitRecord], eps: float, rate_used: float,
                     well: Optional[int] = None) -> "ExitSample":
        records = list(records)
        if well is None:
            well = records[0].well if records else 0
        kept = [r for r in records if not r.censored]
        return cls(
            well=well,
            times=tuple(r.t for r in kept),
            landings=tuple(r.landing for r in kept),
            eps=eps,
            rate_used=rate_used,
            censored=len(records) - len(kept),
        )

    def merge(self, other: "ExitSample") -> "ExitSample":
        if (self.well, self.eps, self.rate_used) != (other.well, other.eps, other.rate_used):
            raise PreconditionError("can only merge samples of the same well, eps and rate")
        return ExitSample(
            well=self.well,
            times=self.times + other.times,
            landings=self.landings + other.landings,
            eps=self.eps,
            rate_used=self.rate_used,
            censored=self.censored + other.censored,
        )

    @property
    def n(self) -> int:
        return len(self.times)

    @property
    def total(self) -> int:
        return self.n + self.censored

    @property
    def censoring_fraction(self) -> float:
        return self.censored / self.total if self.total else 0.0

    def rescaled(self) -> np.ndarray:
        return self.rate_used * np.asarray(self.times, dtype=float)


def _check_sample(sample: ExitSample, min_samples: int = MIN_SAMPLES):
    if sample.n < min_samples:
        raise TooFewSamples(f"need >= {min_samples} uncensored times, got {sample.n}",
                            data={"well": sample.well, "n": sample.n})
    if sample.censoring_fraction >= MAX_CENSORING:
        raise ExcessCensoring(
            f"censoring fraction {sample.censoring_fraction:.4f} >= {MAX_CENSORING}",
            data={"well": sample.well, "censored": sample.censored, "total": sample.total},
        )


@dataclass(frozen=True)
class KSResult:
    statistic: float
    p_value: float
    n: int
    mean_rescaled: float

    def passed(self, level: float = 0.01) -> bool:
        return self.p_value > level


def ks_exponential(sample: ExitSample, min_samples: int = MIN_SAMPLES) -> KSResult:
    """
    {lambda * sigma_k} 对 Exp(1) 的单样本 KS 检验, p 值取 Kolmogorov 极限分布

    Raises:
        TooFewSamples: 未截断样本少于 min_samples
        ExcessCensoring: 截断比例 >= 1%
    """
    _check_sample(sample, min_samples)
    x = sample.rescaled()
    statistic = float(stats.kstest(x, "expon").statistic)
    p_value = float(stats.kstwobign.sf(math.sqrt(len(x)) * statistic))
    return KSResult(statistic=statistic, p_value=p_value, n=len(x), mean_rescaled=float(np.mean(x)))


@dataclass(frozen=True)
class ShapeResult:
    statistic: float
    critical_value: float
    level: float
    n: int
    scale: float

    @property
    def passed(self) -> bool:
        return self.statistic < self.critical_value


def exponential_shape(sample: ExitSample, level: float = 0.01,
                      min_samples: int = MIN_SAMPLES) -> ShapeResult:
    """
    Anderson-Darling 指数性检验, 尺度取样本均值 (不要求 lambda * mean = 1)

    与 ks_exponential 互补: 有限 eps 下速率有 O(eps) 偏差时, 只检验分布形状。

    Args:
        level: 显著性水平, 须为 scipy 提供临界值的水平之一 (0.15, 0.10, 0.05, 0.025, 0.01)
    """
    _check_sample(sample, min_samples)
    x = sample.rescaled()
    res = stats.anderson(x, dist="expon")
    levels = np.asarray(res.significance_level, dtype=float) / 100.0
    hit = np.flatnonzero(np.isclose(levels, level))
    if hit.size == 0:
        raise PreconditionError(f"no critical value tabulated for level {level}",
                                data={"levels": levels.tolist()})
    return ShapeResult(statistic=float(res.statistic), critical_value=float(res.critical_values[hit[0]]),
                       level=level, n=len(x), scale=float(np.mean(x)))


@dataclass(frozen=True)
class SplitResult:
    z: Dict[int, float]
    observed: Dict[int, float]
    expected: Dict[int, float]
    n: int
    unlanded: int

    @property
    def max_abs_z(self) -> float:
        return max((abs(v) for v in self.z.values()), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_abs_z <= Z_LIMIT


def exit_split_test(sample: ExitSample, gen: GeneratorMatrix) -> SplitResult:
    """
    z_j = (p_hat_j - q_ij/q_i) / SE_j, SE_j 取原假设下的二项标准误

    落点为 None (鞍点间隙) 的记录不计入分母, 单独报告
    """
    landed = [j for j in sample.landings if j is not None]
    if not landed:
        raise TooFewSamples("no landings to test", data={"well": sample.well})
    n = len(landed)
    counts = Counter(landed)
    i = sample.well
    z, observed, expected = {}, {}, {}
    for j in range(1, gen.n + 1):
        if j == i:
            continue
        p0 = gen.ratio(i, j)
        p_hat = counts.get(j, 0) / n
        se = math.sqrt(p0 * (1.0 - p0) / n)
        if se > 0:
            z[j] = (p_hat - p0) / se
        else:
            z[j] = 0.0 if p_hat == p0 else math.copysign(math.inf, p_hat - p0)
        observed[j], expected[j] = p_hat, p0
    return SplitResult(z=z, observed=observed, expected=expected, n=n,
                       unlanded=len(sample.landings) - n)


def empirical_generator(samples: Mapping[int, ExitSample], n_wells: int, eps: float,
                        model: LevyModel, min_samples: int = MIN_SAMPLES) -> GeneratorMatrix:
    """
    从 tau 样本估计生成元

    q_hat_i = 1/(H(1/eps) mean tau^i), q_hat_ij = q_hat_i * (落点到 j 的比例);
    标准误用 delta method。没有样本的井整行为 nan 并记入 missing。
    """
    h = tail_total(model, 1.0 / eps)
    q = np.full((n_wells, n_wells), np.nan)
    se = np.full((n_wells, n_wells), np.nan)
    missing = []
    for i in range(1, n_wells + 1):
        sample = samples.get(i)
        if sample is None:
            missing.append(i)
            continue
        _check_sample(sample, min_samples)
        times = np.asarray(sample.times, dtype=float)
        n = len(times)
        mean = float(np.mean(times))
        qi = 1.0 / (h * mean)
        qi_se = qi * float(np.std(times, ddof=1)) / math.sqrt(n) / mean
        landed = [j for j in sample.landings if j is not None]
        counts = Counter(landed)
        n_landed = max(len(landed), 1)
        for j in range(1, n_wells + 1):
            if j == i:
                continue
            p = counts.get(j, 0) / n_landed
            q[i - 1, j - 1] = qi * p
            se[i - 1, j - 1] = math.sqrt(p * p * qi_se ** 2 + qi * qi * p * (1.0 - p) / n_landed)
        q[i - 1, i - 1] = -qi
        se[i - 1, i - 1] = qi_se
    return GeneratorMatrix(q=q, se=se, missing=tuple(missing))


@dataclass(frozen=True)
class FddResult:
    t: float
    statistic: float
    p_value: float
    n: int
    unclassified_fraction: float
    observed: List[int] = field(default_factory=list)
    expected: List[float] = field(default_factory=list)

    def passed(self, level: float = 0.01) -> bool:
        return self.p_value > level


def _chi_square(observed: np.ndarray, probs: np.ndarray) -> Tuple[float, float]:
    """
    卡方拟合; 期望为 0 的类别不参与统计量, 但若其中有观测则 p = 0
    """
    support = probs > 0
    if np.any(observed[~support] > 0):
        return math.inf, 0.0
    obs = observed[support].astype(float)
    if obs.size < 2:
        return 0.0, 1.0
    exp = probs[support] / probs[support].sum() * obs.sum()
    res = stats.chisquare(obs, exp)
    return float(res.statistic), float(res.pvalue)


def _check_unclassified(labels: Sequence[Optional[int]]) -> Tuple[List[int], float]:
    classified = [c for c in labels if c is not None]
    frac = 1.0 - len(classified) / len(labels) if labels else 0.0
    if frac >= MAX_UNCLASSIFIED:
        raise UnclassifiedExcess(f"{frac:.4f} of snapshots lie outside every B_Delta(m_j)",
                                 data={"fraction": frac})
    return classified, frac


def fdd_test(snapshots: Sequence[Sequence[Optional[int]]], times: Sequence[float],
             gen: GeneratorMatrix, i0: int) -> List[FddResult]:
    """
    每个 t_k: 观测井计数对 e^{t_k Q} 第 i0 行的卡方检验

    Args:
        snapshots: snapshots[k] 为 t_k 时刻全部路径的井编号 (None = 未分类)
        times: 重标时间 t_k
    """
    if len(snapshots) != len(times):
        raise PreconditionError("one snapshot column per time point is required")
    out = []
    for labels, t in zip(snapshots, times):
        classified, frac = _check_unclassified(labels)
        observed = np.bincount(np.asarray(classified, dtype=int) - 1, minlength=gen.n)[: gen.n]
        probs = chain_transition_matrix(gen, t)[i0 - 1]
        statistic, p_value = _chi_square(observed, probs)
        out.append(FddResult(t=float(t), statistic=statistic, p_value=p_value, n=len(classified),
                             unclassified_fraction=frac, observed=observed.tolist(),
                             expected=(probs * len(classified)).tolist()))
    return out


def fdd_joint_test(first: Sequence[Optional[int]], second: Sequence[Optional[int]],
                   t1: float, t2: float, gen: GeneratorMatrix, i0: int) -> FddResult:
    """
    两时刻联合表 (a, b) 对 P(t1)[i0, a] * P(t2 - t1)[a, b] 的卡方检验
    """
    if not 0 <= t1 <= t2:
        raise PreconditionError("need 0 <= t1 <= t2")
    if len(first) != len(second):
        raise PreconditionError("paired snapshots must have equal length")
    _check_unclassified(first)
    _check_unclassified(second)
    pairs = [(a, b) for a, b in zip(first, second) if a is not None and b is not None]
    n = gen.n
    observed = np.zeros(n * n, dtype=int)
    for a, b in pairs:
        observed[(a - 1) * n + (b - 1)] += 1
    p1 = chain_transition_matrix(gen, t1)[i0 - 1]
    p12 = chain_transition_matrix(gen, t2 - t1)
    probs = (p1[:, None] * p12).ravel()
    statistic, p_value = _chi_square(observed, probs)
    unclassified = 1.0 - len(pairs) / len(first) if len(first) else 0.0
    return FddResult(t=float(t2), statistic=statistic, p_value=p_value, n=len(pairs),
                     unclassified_fraction=unclassified, observed=observed.tolist(),
                     expected=(probs * len(pairs)).tolist())


def short_time_localization(positions: Sequence[float], minimum: float, radius: float,
                            delta_exponent: float, r: float) -> float:
    """
    X^eps_{t/eps^delta} 落在 B_radius(m_i) 之外的路径比例 (overflow 记为之外)

    Raises:
        PreconditionError: delta_exponent 不在 (0, r) 内
    """
    if not 0 < delta_exponent < r:
        raise PreconditionError(f"delta exponent must lie in (0, {r}), got {delta_exponent}")
    x = np.asarray(positions, dtype=float)
    if x.size == 0:
        raise TooFewSamples("no positions given")
    outside = ~(np.abs(x - minimum) <= radius)
    return float(np.mean(outside))


def decreasing_trend(values: Sequence[float], allowed_inversions: int = 0) -> bool:
    """True when values[k+1] > values[k] happens at most allowed_inversions times."""
    v = np.asarray(values, dtype=float)
    return int(np.sum(np.diff(v) > 0)) <= allowed_inversions


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    rvalue: float


def gaussian_slope_fit(eps: Sequence[float], mean_times: Sequence[float]) -> SlopeFit:
    """ln(mean exit time) ~ slope / eps^2 + intercept, least squares"""
    e = np.asarray(eps, dtype=float)
    m = np.asarray(mean_times, dtype=float)
    if e.size < 2 or e.size != m.size:
        raise PreconditionError("need at least two (eps, mean) pairs")
    if np.any(m <= 0):
        raise PreconditionError("mean exit times must be positive")
    res = stats.linregress(1.0 / e ** 2, np.log(m))
    return SlopeFit(slope=float(res.slope), intercept=float(res.intercept),
                    stderr=float(res.stderr), rvalue=float(res.rvalue))
