# -*- coding: utf-8 -*-
"""
Hot loops (Euler / RK4) compiled with numba.

这里的函数只做纯数值计算, 不持有 RNG: 随机数由调用方按块预先抽取后传入,
因此同一路径的结果与 worker 数量和调度无关。
"""
import math

import numpy as np

try:
    from numba import njit
    _USE_NUMBA = True
except ImportError:  # pragma: no cover
    _USE_NUMBA = False


def _jit(fn):
    """Numba-JIT `fn` (cache) if Numba is available."""
    return njit(cache=True)(fn) if _USE_NUMBA else fn


# euler_segment 返回的状态码
REACHED = 0
HIT = 1
OVERFLOW = 2
STARVED = 3


@_jit
def horner(coefs, x):
    """Evaluate sum coefs[k] x^k (ascending coefficients)."""
    acc = 0.0
    for k in range(coefs.shape[0] - 1, -1, -1):
        acc = acc * x + coefs[k]
    return acc


@_jit
def rk4_step(coefs, x, dt):
    k1 = horner(coefs, x)
    k2 = horner(coefs, x + 0.5 * dt * k1)
    k3 = horner(coefs, x + 0.5 * dt * k2)
    k4 = horner(coefs, x + dt * k3)
    return x + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


@_jit
def rk4_flow(coefs, x0, t, h, overflow):
    """Integrate x' = drift(x) up to time t. Returns (x, overflowed)."""
    x = x0
    done = 0.0
    k = 0
    while t - done > 1e-12 * h:
        dt = h if t - done > h * (1.0 + 1e-9) else t - done
        x = rk4_step(coefs, x, dt)
        if not (abs(x) <= overflow):
            return x, True
        k += 1
        done = k * h if dt == h else t
    return x, False


@_jit
def rk4_grid(coefs, x0, duration, h):
    """RK4 trajectory sampled on the Euler grid (last partial step shortened)."""
    n_full = int(math.floor(duration / h * (1.0 + 1e-12)))
    rest = duration - n_full * h
    n = n_full + (1 if rest > 1e-12 * h else 0)
    out = np.empty(n + 1)
    out[0] = x0
    x = x0
    for k in range(n):
        dt = h if k < n_full else rest
        x = rk4_step(coefs, x, dt)
        out[k + 1] = x
    return out


@_jit
def tamed_drift(coefs, x, dt):
    """
    Euler 漂移位移 drift(x)*dt / (1 + |drift(x)*dt|)

    |x| 很大 (远处落点的 big jump 之后) 时一步位移不超过 1, 不会越过原点发散;
    极小值附近与 drift(x)*dt 只差二阶项。
    """
    b = horner(coefs, x) * dt
    return b / (1.0 + abs(b))


@_jit
def triggered(x, intervals, enter):
    inside = False
    for k in range(intervals.shape[0]):
        if intervals[k, 0] <= x <= intervals[k, 1]:
            inside = True
            break
    if enter:
        return inside
    return not inside


@_jit
def euler_segment(x, t, g, t1, h, coefs, mean, sd, stable_scale, inv_alpha, log_coef, log_scale,
                  z, s, pos, intervals, enter, overflow):
    """
    Euler 积分 [t, t1], 每个子步之后检查停止条件。

    子步端点是全局网格 g*h 与 t1 (跳跃时刻 / horizon) 的并, 因此在网格点上
    截断后继续积分与一次性积分逐位相同。g 为 t 之前 (含) 最后一个网格点的编号。

    增量: tamed_drift(x, dt) + mean*dt + sd*sqrt(dt)*z + stable_scale*dt^(1/alpha)*s
          + log_coef*dt*ln(log_scale*dt)  (alpha = 1 非对称 stable 的对数位置项)

    Returns:
        (x, t, g, pos, status) -- status 见模块常量; STARVED 表示噪声缓冲区用尽,
        调用方补充后从返回的 (x, t, g) 继续即可。
    """
    while t < t1:
        if pos >= z.shape[0]:
            return x, t, g, pos, STARVED
        grid_next = (g + 1) * h
        if t1 >= grid_next - 1e-9 * h:
            t_new = grid_next if grid_next < t1 else t1
            g += 1
        else:
            t_new = t1
        dt = t_new - t
        dx = tamed_drift(coefs, x, dt) + mean * dt
        if sd != 0.0:
            dx += sd * math.sqrt(dt) * z[pos]
        if stable_scale != 0.0:
            dx += stable_scale * dt ** inv_alpha * s[pos]
        if log_coef != 0.0 and dt > 0.0:
            dx += log_coef * dt * math.log(log_scale * dt)
        x = x + dx
        pos += 1
        t = t_new
        if not (abs(x) <= overflow):
            return x, t, g, pos, OVERFLOW
        if triggered(x, intervals, enter):
            return x, t, g, pos, HIT
    return x, t, g, pos, REACHED


@_jit
def tube_sup_deviation(x0, duration, h, coefs, mean, sd, z, reference, overflow):
    """
    small-jump 动力学与参考轨迹的最大偏差。

    reference 为 rk4_grid(coefs, x0, duration, h) 给出的确定性流, 两者共用同一网格
    (最后一步短于 h)。

    Returns:
        (sup_deviation, overflowed)
    """
    n_full = int(math.floor(duration / h * (1.0 + 1e-12)))
    rest = duration - n_full * h
    x = x0
    sup = 0.0
    for k in range(reference.shape[0] - 1):
        dt = h if k < n_full else rest
        x = x + tamed_drift(coefs, x, dt) + mean * dt + sd * math.sqrt(dt) * z[k]
        if not (abs(x) <= overflow):
            return sup, True
        dev = abs(x - reference[k + 1])
        if dev > sup:
            sup = dev
    return sup, False
