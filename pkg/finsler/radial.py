"""
Radial Solutions on Wulff Balls and Annuli
H₀-径向解：Wulff 球屏障 ω、环形区域上的径向 ODE、单调 k → ∞ 极限与边界渐近检查

径向方程 (t^{n−1}|w'|^{p−2}w')' = t^{n−1} f(w) 用守恒型有限体积格式离散，
阻尼 Newton 迭代求解三对角系统。
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize
from scipy.integrate import solve_ivp, trapezoid
from scipy.linalg import solve_banded

from .config import get_config_value
from .errors import (InconclusiveError, NoConvergenceError, NonpositiveInputError,
                     OutsideBallError, OutsideDomainError)
from .nonlinearity import Nonlinearity, OsgoodClass
from .norms import DualEvaluator, MinkowskiNorm
from .ode1d import Interval1DProblem, LargeSolution1D, cached_profile, solve_interval
from .performance_monitor import get_performance_monitor

logger = logging.getLogger(__name__)

# 舍入下限的放大系数与判定停滞的连续步数
ROUNDOFF_FACTOR = 16.0
STAGNATION_STEPS = 8


# ---------------------------------------------------------------- Wulff ball barrier

def solve_omega(R: float, p: float, nl: Nonlinearity) -> LargeSolution1D:
    """(0, 2R) 上 γ = 1 的一维爆破解 ω"""
    if not R > 0:
        raise NonpositiveInputError(f"R 必须 > 0，实际为 {R}")
    if abs(p - nl.p) > 1e-12:
        raise ValueError(f"p={p} 与非线性项的 p={nl.p} 不一致")
    return solve_interval(Interval1DProblem(0.0, 2.0 * R, 1.0, nl))


@dataclass(frozen=True, eq=False)
class WulffBallProblem:
    center: np.ndarray
    R: float
    norm: MinkowskiNorm
    nl: Nonlinearity
    dual: Optional[DualEvaluator] = None

    def __post_init__(self):
        if not self.R > 0:
            raise NonpositiveInputError(f"R 必须 > 0，实际为 {self.R}")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.dual is None:
            object.__setattr__(self, "dual", DualEvaluator(self.norm))

    @property
    def p(self) -> float:
        return self.nl.p

    @cached_property
    def omega(self) -> LargeSolution1D:
        return solve_omega(self.R, self.p, self.nl)

    def local_bound(self) -> float:
        """W_{R/2}(x₀) 上的上界 ω(R/2)"""
        return self.omega.evaluate(0.5 * self.R)


def wulff_barrier(prob: WulffBallProblem, x) -> float:
    """v(x) = ω(R − H₀(x − x₀))"""
    r = prob.dual.evaluate(np.asarray(x, dtype=float) - prob.center).value
    if r >= prob.R:
        raise OutsideBallError(f"H₀(x − x₀) = {r:.6g} ≥ R = {prob.R}")
    return prob.omega.evaluate(prob.R - r)


# ---------------------------------------------------------------- radial profiles

@dataclass(frozen=True, eq=False)
class AnnulusProblem:
    """H₀-环形区域 {R1 < H₀(x − center) < R2} 上的径向问题"""
    center: np.ndarray
    R1: float
    R2: float
    norm: MinkowskiNorm
    nl: Nonlinearity
    dim: int = 2
    dual: Optional[DualEvaluator] = None

    def __post_init__(self):
        if not 0 < self.R1 < self.R2:
            raise ValueError(f"环形区域需要 0 < R1 < R2，实际为 ({self.R1}, {self.R2})")
        if self.dim < 2:
            raise ValueError("环形区域的维数必须 ≥ 2")
        if self.norm.dim != self.dim:
            raise ValueError(f"范数维数 {self.norm.dim} 与 dim={self.dim} 不一致")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.dual is None:
            object.__setattr__(self, "dual", DualEvaluator(self.norm))

    @property
    def p(self) -> float:
        return self.nl.p

    @property
    def width(self) -> float:
        return self.R2 - self.R1

    def radius(self, x) -> float:
        """H₀(x − center)"""
        return self.dual.evaluate(np.asarray(x, dtype=float) - self.center).value


@dataclass(frozen=True, eq=False)
class RadialProfile:
    grid: np.ndarray
    values: np.ndarray
    blowup_end: str
    dim: int
    p: float
    k_ceiling: Optional[float] = None
    ks: Tuple[float, ...] = ()
    residual: float = 0.0
    iterations: int = 0
    interior_converged: bool = False

    def __post_init__(self):
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("径向网格必须严格递增")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("径向剖面含有非有限值")

    def __call__(self, t):
        return np.interp(t, self.grid, self.values)

    @property
    def inner(self) -> float:
        return float(self.grid[0])

    @property
    def outer(self) -> float:
        return float(self.grid[-1])

    def is_decreasing(self, tol: float = 1e-10) -> bool:
        return bool(np.all(np.diff(self.values) <= tol * (1.0 + np.abs(self.values[:-1]))))

    def rows(self) -> List[Tuple[float, float]]:
        return list(zip(self.grid.tolist(), self.values.tolist()))


def lift_profile(prob: AnnulusProblem, profile: RadialProfile, points) -> np.ndarray:
    """u(x) = w(H₀(x − center))，把径向剖面还原为 n 维解"""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    radii = np.array([prob.radius(x) for x in points])
    outside = (radii <= prob.R1) | (radii >= prob.R2)
    if np.any(outside):
        raise OutsideDomainError(f"{int(outside.sum())} 个点不在环形区域 ({prob.R1}, {prob.R2}) 内")
    return profile(radii)


def graded_grid(start: float, end: float, points: int, exponent: float, cluster: str = "left") -> np.ndarray:
    """代数加密网格；cluster 指定加密端"""
    s = np.linspace(0.0, 1.0, points + 1)
    if cluster == "left":
        return start + (end - start) * s ** exponent
    return end - (end - start) * (1.0 - s) ** exponent


class _RadialSystem:
    """有限体积离散：通量 t_{i+1/2}^{n−1} g(D)，控制体 V_i = (t_{i+1/2}^n − t_{i−1/2}^n)/n"""

    def __init__(self, t: np.ndarray, dim: int, p: float, nl: Optional[Nonlinearity],
                 left: Optional[float], right: float, eps: float = 0.0):
        self.t = t
        self.n = dim
        self.p = p
        self.nl = nl
        # left 为 None 表示 t = 0 处的对称条件
        self.left = left
        self.right = right
        self.eps = eps
        mid = 0.5 * (t[1:] + t[:-1])
        self.dt = np.diff(t)
        self.area = mid ** (dim - 1)
        ends = np.concatenate([[t[0]], mid, [t[-1]]])
        self.volume = (ends[1:] ** dim - ends[:-1] ** dim) / dim
        self.free = slice(1 if left is not None else 0, len(t) - 1)

    def assemble(self, w_free: np.ndarray) -> np.ndarray:
        w = np.empty_like(self.t)
        w[self.free] = w_free
        if self.left is not None:
            w[0] = self.left
        w[-1] = self.right
        return w

    def _flux(self, w):
        D = np.diff(w) / self.dt
        base = D * D + self.eps * self.eps
        g = base ** ((self.p - 2.0) / 2.0) * D
        dg = base ** ((self.p - 4.0) / 2.0) * ((self.p - 1.0) * D * D + self.eps * self.eps) if self.p != 2 \
            else np.ones_like(D)
        return self.area * g, self.area * dg / self.dt

    def residual(self, w_free):
        """R_i = (通量差)/V_i − f(w_i)，以及用于相对误差的尺度"""
        w = self.assemble(w_free)
        flux, _ = self._flux(w)
        padded = np.concatenate([[0.0], flux, [0.0]])
        div = (padded[1:] - padded[:-1]) / self.volume
        fw = self.nl.f(w)
        res = (div - fw)[self.free]
        scale = (np.abs(padded[1:]) + np.abs(padded[:-1])) / self.volume + np.abs(fw)
        return res, scale[self.free]

    def jacobian(self, w_free):
        """三对角 Jacobian 的带状存储 (3, m)"""
        w = self.assemble(w_free)
        _, dflux = self._flux(w)
        vol = self.volume
        upper_c = np.concatenate([dflux, [0.0]]) / vol
        lower_c = np.concatenate([[0.0], dflux]) / vol
        diag = -upper_c - lower_c - self.nl.df(w)
        idx = np.arange(len(self.t))[self.free]
        ab = np.zeros((3, len(idx)))
        ab[1] = diag[idx]
        ab[0, 1:] = upper_c[idx[:-1]]
        ab[2, :-1] = lower_c[idx[1:]]
        return ab


def radial_divergence(t, w, dim: int, p: float) -> np.ndarray:
    """内部节点处 t_i^{n−1}·(离散通量差)/V_i，对 w = t², p = 2 精确给出 2n t^{n−1}"""
    t = np.asarray(t, dtype=float)
    w = np.asarray(w, dtype=float)
    system = _RadialSystem(t, dim, p, None, float(w[0]), float(w[-1]))
    flux, _ = system._flux(w)
    div = (flux[1:] - flux[:-1]) / system.volume[1:-1]
    return t[1:-1] ** (dim - 1) * div


def _relative(res: np.ndarray, scale: np.ndarray) -> np.ndarray:
    return np.abs(res) / np.maximum(scale, 1e-300)


def _roundoff_level(system: _RadialSystem, w_free: np.ndarray, diag: np.ndarray, scale: np.ndarray) -> float:
    """把 w 扰动一个机器精度后相对残差的变化量，即该网格上可达到的残差下限"""
    if not w_free.size:
        return 0.0
    size = float(np.max(np.abs(system.assemble(w_free))))
    return float(np.max(np.finfo(float).eps * size * np.abs(diag) / np.maximum(scale, 1e-300)))


def _newton(system: _RadialSystem, w_free: np.ndarray, label: str) -> Tuple[np.ndarray, float, int]:
    """阻尼 Newton：按相对残差的 2-范数回溯

    加密端的单元宽度接近机器精度时，相对残差存在舍入下限。线搜索停滞且残差
    已低于 max(tol, C·舍入下限) 时视为收敛；C·舍入下限不超过 radial.roundoff_ceiling。
    """
    max_iter = get_config_value('radial.newton_max_iterations', 200)
    tol = get_config_value('radial.residual_tolerance', 1e-8)
    ceiling = max(tol, get_config_value('radial.roundoff_ceiling', 1e-5))
    res, scale = system.residual(w_free)
    rel = float(np.max(_relative(res, scale))) if res.size else 0.0
    best = (w_free.copy(), rel)
    floor = tol
    stagnant = 0
    for iteration in range(1, max_iter + 1):
        if rel <= tol:
            return w_free, rel, iteration - 1
        ab = system.jacobian(w_free)
        floor = max(tol, min(ceiling, ROUNDOFF_FACTOR * _roundoff_level(system, w_free, ab[1], scale)))
        step = solve_banded((1, 1), ab, -res)
        merit = float(np.linalg.norm(_relative(res, scale)))
        alpha = 1.0
        while alpha > 1e-12:
            trial = w_free + alpha * step
            trial_res, trial_scale = system.residual(trial)
            if np.all(np.isfinite(trial_res)) and \
                    np.linalg.norm(_relative(trial_res, trial_scale)) <= (1.0 - 1e-4 * alpha) * merit:
                break
            alpha *= 0.5
        else:
            if best[1] <= floor:
                logger.debug(f"{label}: 线搜索在舍入误差水平停滞 (相对残差 {best[1]:.3e} ≤ {floor:.3e})")
                return best[0], best[1], iteration - 1
            logger.warning(f"{label}: 线搜索失败，停止于相对残差 {rel:.3e}")
            break
        w_free = trial
        res, scale = trial_res, trial_scale
        rel = float(np.max(_relative(res, scale))) if res.size else 0.0
        logger.debug(f"{label}: 迭代 {iteration}, α={alpha:.3g}, 相对残差 {rel:.3e}")
        if rel < 0.5 * best[1]:
            stagnant = 0
        else:
            stagnant += 1
        if rel < best[1]:
            best = (w_free.copy(), rel)
        if stagnant >= STAGNATION_STEPS and best[1] <= floor:
            logger.debug(f"{label}: 连续 {stagnant} 步无明显下降，接受相对残差 {best[1]:.3e}")
            return best[0], best[1], iteration
    if best[1] <= floor:
        return best[0], best[1], max_iter
    raise NoConvergenceError(f"{label}: Newton 未收敛 (相对残差 {best[1]:.3e})", best=best)


def _annulus_grid(prob: AnnulusProblem) -> np.ndarray:
    return graded_grid(prob.R1, prob.R2, get_config_value('radial.grid_points', 2000),
                       get_config_value('radial.clustering_exponent', 3.0), cluster="left")


def _solve_profile(t, dim, p, nl, left, right, initial, label) -> Tuple[np.ndarray, float, int]:
    guess = initial.copy()
    # |w'| 的尺度取 边界值/区间长度，与初值的梯度无关
    scale = max(float(np.max(np.abs(guess))) / (t[-1] - t[0]), 1e-12)
    eps = 1e-8 * scale if p != 2 else 0.0
    system = _RadialSystem(t, dim, p, nl, left, right, eps)
    w_free, rel, iterations = _newton(system, guess[system.free], label)
    return system.assemble(w_free), rel, iterations


def solve_annulus_k(prob: AnnulusProblem, k: float, initial: Optional[np.ndarray] = None) -> RadialProfile:
    """w(R1) = k, w(R2) = 0 的两点边值问题"""
    if not k > 0:
        raise NonpositiveInputError(f"k 必须 > 0，实际为 {k}")
    t = _annulus_grid(prob)
    if initial is None:
        initial = k * (prob.R2 - t) / prob.width
    else:
        initial = np.asarray(initial, dtype=float).copy()
        initial[0] = k
    label = f"annulus k={k:.4g}"
    try:
        values, rel, iterations = _solve_profile(t, prob.dim, prob.p, prob.nl, k, 0.0, initial, label)
    except NoConvergenceError as e:
        best_free, best_rel = e.best
        values = initial.copy()
        values[1:-1] = best_free
        values[-1] = 0.0
        raise NoConvergenceError(str(e), best=RadialProfile(t, values, "left", prob.dim, prob.p, k, (k,),
                                                            best_rel)) from e
    return RadialProfile(t, values, "left", prob.dim, prob.p, k, (k,), rel, iterations)


def _k_doubling(solve_k, interior_mask, label: str) -> RadialProfile:
    max_doublings = get_config_value('radial.max_doublings', 40)
    stop = get_config_value('radial.stop_tolerance', 1e-6)
    monitor = get_performance_monitor()
    previous: Optional[RadialProfile] = None
    ks: List[float] = []
    with monitor.track(label) as info:
        for j in range(max_doublings + 1):
            k = 2.0 ** j
            current = solve_k(k, None if previous is None else previous.values)
            ks.append(k)
            info['iterations'] += current.iterations
            if previous is not None:
                mask = interior_mask(current.grid)
                change = float(np.max(np.abs(current.values[mask] - previous.values[mask])))
                size = max(1.0, float(np.max(np.abs(current.values[mask]))))
                logger.debug(f"{label}: k=2^{j}, 内部变化 {change:.3e}")
                if change <= stop * size:
                    logger.info(f"{label}: 在 k=2^{j} 处稳定 (内部变化 {change:.3e})")
                    return RadialProfile(current.grid, current.values, current.blowup_end, current.dim,
                                         current.p, k, tuple(ks), current.residual, info['iterations'], True)
            previous = current
    raise NoConvergenceError(f"{label}: {max_doublings} 次加倍后仍未稳定", best=previous)


def solve_annulus_large(prob: AnnulusProblem) -> RadialProfile:
    """k = 2^j 的单调序列，直到 t ≥ R1 + (R2−R1)/20 上的变化 < 1e-6"""
    threshold = prob.R1 + prob.width / 20.0
    return _k_doubling(lambda k, init: solve_annulus_k(prob, k, init),
                       lambda grid: grid >= threshold, "radial.solve_annulus_large")


def solve_ball_k(R: float, dim: int, nl: Nonlinearity, k: float,
                 initial: Optional[np.ndarray] = None) -> RadialProfile:
    """Wulff 球上 w'(0) = 0, w(R) = k 的径向问题"""
    t = graded_grid(0.0, R, get_config_value('radial.grid_points', 2000),
                    get_config_value('radial.clustering_exponent', 3.0), cluster="right")
    if initial is None:
        # 中心处 w' = 0 的抛物型初值
        initial = k * (0.5 + 0.5 * (t / R) ** 2)
    else:
        initial = np.asarray(initial, dtype=float).copy()
        initial[-1] = k
    values, rel, iterations = _solve_profile(t, dim, nl.p, nl, None, k, initial, f"ball k={k:.4g}")
    return RadialProfile(t, values, "right", dim, nl.p, k, (k,), rel, iterations)


def solve_ball_large(R: float, dim: int, p: float, nl: Nonlinearity) -> RadialProfile:
    """W_R 上的径向爆破解（t = R 处爆破）"""
    if abs(p - nl.p) > 1e-12:
        raise ValueError(f"p={p} 与非线性项的 p={nl.p} 不一致")
    threshold = R - R / 20.0
    return _k_doubling(lambda k, init: solve_ball_k(R, dim, nl, k, init),
                       lambda grid: grid <= threshold, "radial.solve_ball_large")


# ---------------------------------------------------------------- verifiers

def annulus_asym_check(profile: RadialProfile, nl: Nonlinearity, p: float,
                       max_offset: Optional[float] = None) -> List[Tuple[float, float]]:
    """(t − R1, Ψ(w(t))/(t − R1)) 表；仅对 (A1) 非线性有意义"""
    if profile.blowup_end != "left":
        raise ValueError("annulus_asym_check 需要在内边界爆破的剖面")
    ko = cached_profile(nl)
    if ko.osgood != OsgoodClass.A1_DIVERGES:
        raise InconclusiveError("环形渐近检查只适用于满足 (A1) 的非线性")
    R1 = profile.inner
    limit = max_offset if max_offset is not None else 0.5 * (profile.outer - R1)
    rows = []
    for t, w in zip(profile.grid[1:], profile.values[1:]):
        offset = t - R1
        if offset > limit or w <= 0:
            break
        rows.append((float(offset), float(ko.psi(w) / offset)))
    return rows


def energy_identity_check(profile: RadialProfile, nl: Nonlinearity, window: int = 20,
                          tolerance: float = 0.05) -> Dict[str, Any]:
    """检查 (t^β|w'|^p)' = (p/(p−1)) t^β w' f(w)，β = p(n−1)/(p−1)"""
    t, w = profile.grid, profile.values
    p, n = profile.p, profile.dim
    beta = p * (n - 1) / (p - 1.0)
    mid = 0.5 * (t[1:] + t[:-1])
    slope = np.diff(w) / np.diff(t)
    Q = mid ** beta * np.abs(slope) ** p
    node_slope = np.gradient(w, t)
    rhs = p / (p - 1.0) * t ** beta * node_slope * nl.f(w)

    lo = profile.inner + 0.05 * (profile.outer - profile.inner)
    hi = profile.inner + 0.8 * (profile.outer - profile.inner)
    errors = []
    for start in range(0, len(mid) - window, window):
        a, b = start, start + window
        if mid[a] < lo or mid[b] > hi:
            continue
        integral = trapezoid(rhs[a + 1:b + 1], t[a + 1:b + 1]) + \
            rhs[a + 1] * (t[a + 1] - mid[a]) + rhs[b] * (mid[b] - t[b])
        change = Q[b] - Q[a]
        if abs(integral) > 0:
            errors.append(abs(change - integral) / abs(integral))
    worst = max(errors) if errors else 0.0
    inside = (mid >= lo) & (mid <= hi)
    monotone = bool(np.all(np.diff(Q[inside]) <= 1e-10 * np.max(Q[inside])))
    return {
        "windows": len(errors),
        "max_relative_error": worst,
        "nonincreasing_in_t": monotone,
        "passed": worst <= tolerance and monotone,
    }


def shoot_annulus(prob: AnnulusProblem, k: float, points: Optional[np.ndarray] = None) -> RadialProfile:
    """从 R2 出发（w = 0, w' = −s）向内积分，调节 s 使 w(R1) = k"""
    n, p = prob.dim, prob.p

    def rhs(t, y):
        w, v = y
        slope = math.copysign(abs(v / t ** (n - 1)) ** (1.0 / (p - 1.0)), v)
        return [slope, t ** (n - 1) * float(prob.nl.f(w))]

    def blown(t, y):
        return y[0] - 10.0 * k
    blown.terminal = True

    def shoot(log_s, t_eval=None):
        s = math.exp(log_s)
        v0 = -prob.R2 ** (n - 1) * s ** (p - 1.0)
        return solve_ivp(rhs, (prob.R2, prob.R1), [0.0, v0], method='DOP853', rtol=1e-12, atol=1e-14,
                         events=blown, t_eval=t_eval, dense_output=False)

    def gap(log_s):
        sol = shoot(log_s)
        if sol.status == 1:
            return math.log(10.0)
        return math.log(max(sol.y[0, -1], 1e-300) / k)

    lo, hi = -1.0, 1.0
    while gap(lo) > 0:
        lo *= 2.0
    while gap(hi) < 0:
        hi *= 2.0
    log_s = optimize.brentq(gap, lo, hi, xtol=1e-14, rtol=1e-14)
    grid = _annulus_grid(prob) if points is None else np.asarray(points, dtype=float)
    sol = shoot(log_s, t_eval=grid[::-1])
    values = sol.y[0][::-1].copy()
    values[0] = k
    return RadialProfile(grid, values, "left", n, p, k, (k,))
