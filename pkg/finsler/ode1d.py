"""
One-Dimensional Large Solutions
一维爆破解：隐式积分反演、ℓ(t) 映射、(A2) 平坦区构造与边界渐近检查
"""

import json
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from .cache import MemoCache, array_key
from .config import get_config_value
from .errors import (BracketFailError, DivergentIntegralError, NoRootError,
                     NonpositiveInputError, OutOfRangeError)
from .nonlinearity import (KOProfile, Nonlinearity, OsgoodClass, keller_integral,
                           ko_constant, ko_profile)
from .performance_monitor import get_performance_monitor

logger = logging.getLogger(__name__)

# 积分值与 KO 剖面的记忆化缓存
_integrals = MemoCache(get_config_value('ode1d.memo_size', 20000), name="keller_integrals")
_profiles = MemoCache(256, name="ko_profiles")

BRACKET_LIMIT = 60 * math.log(2.0)


def nl_key(nl: Nonlinearity) -> str:
    return array_key(json.dumps(nl.to_config(), sort_keys=True))


def cached_integral(nl: Nonlinearity, base: float, lower: float) -> float:
    key = (nl_key(nl), float(base), float(lower))
    return _integrals.get_or_compute(key, lambda: keller_integral(nl, base, lower))


def cached_profile(nl: Nonlinearity) -> KOProfile:
    return _profiles.get_or_compute(nl_key(nl), lambda: ko_profile(nl))


@dataclass(frozen=True)
class Interval1DProblem:
    """γ^p (|u'|^{p−2}u')' = f(u) 在 (a, b) 上、两端爆破"""
    a: float
    b: float
    gamma: float
    nl: Nonlinearity

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"区间需要 a < b，实际为 ({self.a}, {self.b})")
        if not self.gamma > 0:
            raise NonpositiveInputError(f"γ 必须 > 0，实际为 {self.gamma}")

    @property
    def p(self) -> float:
        return self.nl.p

    @property
    def half_width(self) -> float:
        return 0.5 * (self.b - self.a)

    @property
    def center(self) -> float:
        return 0.5 * (self.a + self.b)

    def distance(self, x: float) -> float:
        return min(x - self.a, self.b - x)

    def scale(self) -> float:
        return self.gamma * ko_constant(self.p)


def _require_ko(prob: Interval1DProblem):
    if not prob.nl.ko_holds:
        raise DivergentIntegralError(
            f"(KO) 不成立 (F 的尾部指数 {prob.nl.tail_exponent:.4g} ≤ p={prob.p:.4g})，爆破解不存在")


def ell_of_t(prob: Interval1DProblem, t: float) -> float:
    """ℓ(t) = γ((p−1)/p)^{1/p} ∫₀^∞ ds/{F(s+t)−F(t)}^{1/p}"""
    if not t > 0:
        raise NonpositiveInputError(f"ℓ 的自变量必须 > 0，实际为 {t}")
    _require_ko(prob)
    return prob.scale() * cached_integral(prob.nl, t, t)


def collar_length(prob: Interval1DProblem) -> Optional[float]:
    """(A2) 时的 L(γ)，(A1) 时为 None"""
    _require_ko(prob)
    return cached_profile(prob.nl).L_for(prob.gamma)


def solve_v0(prob: Interval1DProblem, delta: float) -> float:
    """求 t₀ 使 ℓ(t₀) = delta（在 log t 上括区间 + Brent）"""
    if not delta > 0:
        raise NonpositiveInputError(f"delta 必须 > 0，实际为 {delta}")
    _require_ko(prob)
    L = collar_length(prob)
    if L is not None and delta >= L * (1.0 - 1e-12):
        raise NoRootError(f"delta={delta:.6g} ≥ L={L:.6g}，需要平坦区构造")

    log_delta = math.log(delta)

    def gap(y):
        return math.log(ell_of_t(prob, math.exp(y))) - log_delta

    lo, hi, step = 0.0, 0.0, 1.0
    while gap(lo) < 0:
        lo = max(lo - step, -BRACKET_LIMIT)
        step *= 2.0
        if lo <= -BRACKET_LIMIT and gap(lo) < 0:
            raise BracketFailError(f"ℓ(t) 在 t ≥ 2^-60 上始终小于 {delta}")
    step = 1.0
    while gap(hi) > 0:
        hi = min(hi + step, BRACKET_LIMIT)
        step *= 2.0
        if hi >= BRACKET_LIMIT and gap(hi) > 0:
            raise BracketFailError(f"ℓ(t) 在 t ≤ 2^60 上始终大于 {delta}")
    if lo == hi:
        return math.exp(lo)
    y = optimize.brentq(gap, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    return math.exp(y)


def _invert_integral(prob: Interval1DProblem, v0: float, target: float) -> float:
    """求 u > v0 使 γc·∫_u^∞ (F(s)−F(v0))^{-1/p} ds = target"""
    c = prob.scale()
    log_target = math.log(target)

    def gap(y):
        return math.log(c * cached_integral(prob.nl, v0, v0 + math.exp(y))) - log_target

    lo, hi = -1.0, 1.0
    while gap(lo) < 0:
        lo *= 2.0
        if lo < -700:
            return v0
    while gap(hi) > 0:
        hi *= 2.0
        if hi > 700:
            return math.inf
    y = optimize.brentq(gap, lo, hi, xtol=get_config_value('ode1d.inversion_xtol', 1e-13),
                        rtol=4 * np.finfo(float).eps)
    return v0 + math.exp(y)


def eval_solution(prob: Interval1DProblem, c_m: float, v0: float, x: float) -> float:
    """由隐式积分反演 u(x)；在 |x − c_m| 上单调递增"""
    ell_v0 = prob.scale() * cached_integral(prob.nl, v0, v0) if v0 > 0 else collar_length(prob)
    target = ell_v0 - abs(x - c_m)
    if target >= ell_v0:
        return v0
    if target <= 0:
        return math.inf
    return _invert_integral(prob, v0, target)


@dataclass(frozen=True)
class LargeSolution1D:
    problem: Interval1DProblem
    c_m: float
    v0: float
    flat_zone: Optional[Tuple[float, float]] = None

    def evaluate(self, x: float) -> float:
        prob = self.problem
        if not prob.a <= x <= prob.b:
            raise OutOfRangeError(f"x={x} 不在 [{prob.a}, {prob.b}] 内")
        if x == prob.a or x == prob.b:
            return math.inf
        if self.flat_zone is None:
            return eval_solution(prob, self.c_m, self.v0, x)
        lo, hi = self.flat_zone
        if lo <= x <= hi:
            return 0.0
        # 边界层：blow-up 点到平坦区边缘的距离正好是 L
        edge = lo if x < lo else hi
        return eval_solution(prob, edge, 0.0, x)

    def __call__(self, x):
        if np.ndim(x) == 0:
            return self.evaluate(float(x))
        return np.array([self.evaluate(float(v)) for v in np.ravel(x)]).reshape(np.shape(x))

    @property
    def profile(self):
        return self


def solve_interval(prob: Interval1DProblem) -> LargeSolution1D:
    """构造 (a, b) 上的一维爆破解"""
    _require_ko(prob)
    monitor = get_performance_monitor()
    with monitor.track("ode1d.solve_interval"):
        delta = prob.half_width
        L = collar_length(prob)
        if L is not None and delta >= L * (1.0 - 1e-12):
            zone = (prob.a + L, prob.b - L)
            logger.info(f"(A2) 平坦区 [{zone[0]:.6g}, {zone[1]:.6g}]，L={L:.6g}")
            return LargeSolution1D(prob, prob.center, 0.0, zone)
        v0 = solve_v0(prob, delta)
        logger.info(f"一维爆破解: (a,b)=({prob.a}, {prob.b}), γ={prob.gamma}, v₀={v0:.10g}")
        return LargeSolution1D(prob, prob.center, v0)


@dataclass(frozen=True)
class AsymptoticRow:
    delta: float
    ratio_left: float
    ratio_right: float

    @property
    def deviation(self) -> float:
        return max(abs(self.ratio_left - 1.0), abs(self.ratio_right - 1.0))

    def to_dict(self) -> Dict[str, float]:
        return {"delta": self.delta, "ratio_left": self.ratio_left, "ratio_right": self.ratio_right}


def asym_check_1d(sol: LargeSolution1D, margins: Sequence[float]) -> List[AsymptoticRow]:
    """γ·Ψ(u(x))/δ(x) 在 x = a+m 与 x = b−m 处的比值表"""
    prob = sol.problem
    profile = cached_profile(prob.nl)
    rows = []
    for m in margins:
        if not 0 < m < prob.half_width:
            raise OutOfRangeError(f"margin {m} 超出 (0, {prob.half_width})")
        left = profile.psi(sol.evaluate(prob.a + m)) * prob.gamma / m
        right = profile.psi(sol.evaluate(prob.b - m)) * prob.gamma / m
        rows.append(AsymptoticRow(float(m), float(left), float(right)))
        logger.debug(f"δ={m:.3g}: ratio_left={left:.8f}, ratio_right={right:.8f}")
    return rows


def ell_limits(prob: Interval1DProblem, levels: int = 40) -> Dict[str, object]:
    """ℓ 在 t → ∞ 与 t → 0⁺ 的行为"""
    _require_ko(prob)
    large = [(10.0 ** k, ell_of_t(prob, 10.0 ** k)) for k in range(1, 5)]
    small = [(2.0 ** -k, ell_of_t(prob, 2.0 ** -k)) for k in range(1, levels + 1, 3)]
    L = collar_length(prob)
    if L is None:
        behaviour = "unbounded"
    else:
        behaviour = "converges_to_L"
    return {
        "large_t": large,
        "small_t": small,
        "decreasing_at_infinity": all(b[1] < a[1] for a, b in zip(large, large[1:])),
        "small_t_behaviour": behaviour,
        "L": L,
    }


def _stencil(sol: LargeSolution1D, x: float, h: float) -> Tuple[float, float, float]:
    u = [sol.evaluate(x + k * h) for k in (-2, -1, 0, 1, 2)]
    du = (-u[4] + 8 * u[3] - 8 * u[1] + u[0]) / (12 * h)
    d2u = (-u[4] + 16 * u[3] - 30 * u[2] + 16 * u[1] - u[0]) / (12 * h * h)
    return u[2], du, d2u


def ode_residual_1d(sol: LargeSolution1D, xs: Sequence[float], step: Optional[float] = None) -> np.ndarray:
    """γ^p (p−1)|u'|^{p−2}u'' − f(u) 的相对残差（五点差分）"""
    prob = sol.problem
    p = prob.p
    h = step or 1e-3 * prob.half_width
    residuals = []
    for x in xs:
        u, du, d2u = _stencil(sol, float(x), h)
        lhs = prob.gamma ** p * (p - 1.0) * abs(du) ** (p - 2.0) * d2u
        rhs = float(prob.nl.f(u))
        scale = max(abs(rhs), abs(lhs), 1e-12)
        residuals.append(abs(lhs - rhs) / scale)
    return np.asarray(residuals)


def residual_points(prob: Interval1DProblem, count: int = 100) -> np.ndarray:
    """远离中心与端点的检验点（p > 2 时中心处 u'' 不有界）"""
    offsets = np.linspace(0.1, 0.9, count // 2) * prob.half_width
    return np.sort(np.concatenate([prob.center - offsets, prob.center + offsets]))


def is_convex(sol: LargeSolution1D, xs: Sequence[float]) -> bool:
    """均匀网格上二阶差分 ≥ −1e-8（相对 u 的量级）"""
    xs = np.asarray(xs, dtype=float)
    u = sol(xs)
    second = u[:-2] - 2.0 * u[1:-1] + u[2:]
    return bool(np.all(second >= -1e-8 * (1.0 + np.abs(u[1:-1]))))
