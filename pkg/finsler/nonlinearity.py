"""
Nonlinearities and Keller–Osserman Profiles
非线性项 f、原函数 F、Keller–Osserman 剖面 Ψ 与其反函数 Φ，以及 (KO)/(A1)/(A2) 判别
"""

import logging
import math
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize
from scipy.special import logsumexp
from sklearn.linear_model import LinearRegression

from .config import get_config_value
from .errors import (ConfigValidationError, DivergentIntegralError, InconclusiveError,
                     NegativeInputError, NonpositiveInputError, OutOfRangeError)

logger = logging.getLogger(__name__)


class OsgoodClass(str, Enum):
    A1_DIVERGES = "A1_diverges"
    A2_CONVERGES = "A2_converges"


class Nonlinearity(ABC):
    """单调非线性项 f(t)；负半轴按奇延拓处理，F 相应为偶函数"""

    kind: str = "abstract"

    def __init__(self, p: float = 2.0):
        if p < 2:
            raise ConfigValidationError(f"p 必须 ≥ 2，实际为 {p}")
        self.p = float(p)

    @abstractmethod
    def f(self, t) -> np.ndarray:
        ...

    @abstractmethod
    def df(self, t) -> np.ndarray:
        ...

    @abstractmethod
    def F(self, t) -> np.ndarray:
        ...

    @abstractmethod
    def log_F_at_log(self, y: float) -> float:
        """log F(e^y)，用于远端积分避免溢出"""
        ...

    @property
    @abstractmethod
    def tail_exponent(self) -> float:
        """F(s) ~ C s^E (s → ∞) 中的 E"""
        ...

    @property
    @abstractmethod
    def zero_exponent(self) -> float:
        """F(s) ~ c s^e (s → 0⁺) 中的 e"""
        ...

    @abstractmethod
    def params(self) -> Dict[str, Any]:
        ...

    def F_increment(self, base: float, s: float) -> float:
        """F(base+s) − F(base)，对小 s 保持相对精度"""
        return float(self.F(base + s) - self.F(base))

    @property
    def ko_holds(self) -> bool:
        return self.tail_exponent > self.p

    @property
    def psi_closed_form(self) -> bool:
        return False

    def to_config(self) -> Dict[str, Any]:
        return {"kind": self.kind, "p": self.p, **self.params()}

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.params()}, p={self.p})"


def _power_increment(base: float, s: float, exponent: float) -> float:
    """((base+s)^e − base^e)/e 的稳定形式"""
    if base <= 0.0:
        return s ** exponent / exponent
    return base ** exponent * math.expm1(exponent * math.log1p(s / base)) / exponent


class PowerNonlinearity(Nonlinearity):
    """f(t) = t^q"""

    kind = "power"

    def __init__(self, q: float, p: float = 2.0):
        super().__init__(p)
        if not q > 0:
            raise ConfigValidationError(f"power 非线性要求 q > 0，实际为 {q}")
        self.q = float(q)

    def f(self, t):
        t = np.asarray(t, dtype=float)
        return np.sign(t) * np.abs(t) ** self.q

    def df(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        with np.errstate(divide='ignore'):
            return self.q * np.maximum(t, 1e-300) ** (self.q - 1.0)

    def F(self, t):
        return np.abs(np.asarray(t, dtype=float)) ** (self.q + 1.0) / (self.q + 1.0)

    def F_increment(self, base, s):
        return _power_increment(base, s, self.q + 1.0)

    def log_F_at_log(self, y):
        return (self.q + 1.0) * y - math.log(self.q + 1.0)

    @property
    def tail_exponent(self):
        return self.q + 1.0

    @property
    def zero_exponent(self):
        return self.q + 1.0

    @property
    def psi_closed_form(self):
        return self.ko_holds

    def psi_constant(self) -> Tuple[float, float]:
        """Ψ(t) = K·t^{-a} 的 (K, a)"""
        p, q = self.p, self.q
        a = (q + 1.0 - p) / p
        K = ((p - 1.0) * (q + 1.0) / p) ** (1.0 / p) * p / (q + 1.0 - p)
        return K, a

    def params(self):
        return {"q": self.q}


class PowerSumNonlinearity(Nonlinearity):
    """f(t) = Σ cᵢ t^{qᵢ}"""

    kind = "power_sum"

    def __init__(self, terms: Sequence[Sequence[float]], p: float = 2.0):
        super().__init__(p)
        parsed = [(float(c), float(q)) for c, q in terms]
        if not parsed or any(c <= 0 or q <= 0 for c, q in parsed):
            raise ConfigValidationError("power_sum 的每一项都需要 c > 0 且 q > 0")
        self.terms = sorted(parsed, key=lambda cq: cq[1])

    def f(self, t):
        t = np.asarray(t, dtype=float)
        return np.sign(t) * sum(c * np.abs(t) ** q for c, q in self.terms)

    def df(self, t):
        t = np.maximum(np.abs(np.asarray(t, dtype=float)), 1e-300)
        return sum(c * q * t ** (q - 1.0) for c, q in self.terms)

    def F(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        return sum(c * t ** (q + 1.0) / (q + 1.0) for c, q in self.terms)

    def F_increment(self, base, s):
        return sum(c * _power_increment(base, s, q + 1.0) for c, q in self.terms)

    def log_F_at_log(self, y):
        return float(logsumexp([math.log(c) + (q + 1.0) * y - math.log(q + 1.0) for c, q in self.terms]))

    @property
    def tail_exponent(self):
        return self.terms[-1][1] + 1.0

    @property
    def zero_exponent(self):
        return self.terms[0][1] + 1.0

    def params(self):
        return {"terms": [[c, q] for c, q in self.terms]}


class TabulatedNonlinearity(Nonlinearity):
    """分段线性插值的 f，末端按最后十倍区间拟合的幂律外推"""

    kind = "table"

    def __init__(self, points: Sequence[Sequence[float]], p: float = 2.0):
        super().__init__(p)
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
            raise ConfigValidationError("table 非线性需要至少 3 个 (t, f) 样本")
        t, fv = pts[:, 0], pts[:, 1]
        if t[0] != 0.0 or fv[0] != 0.0:
            raise ConfigValidationError("table 非线性要求首个样本为 (0, 0)")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(fv) <= 0):
            raise ConfigValidationError("table 非线性要求 t 与 f(t) 严格递增")
        self.t = t
        self.fv = fv
        self.slopes = np.diff(fv) / np.diff(t)
        self.Fv = np.concatenate([[0.0], np.cumsum(0.5 * (fv[1:] + fv[:-1]) * np.diff(t))])

        # 末端幂律 f ≈ C t^β
        decade = t >= t[-1] / 10.0
        decade &= t > 0
        if decade.sum() < 2:
            decade = t > 0
        model = LinearRegression().fit(np.log(t[decade]).reshape(-1, 1), np.log(fv[decade]))
        self.beta = float(model.coef_[0])
        self.tail_coeff = float(fv[-1] / t[-1] ** self.beta)
        self.grows_unbounded = self.beta > 0
        if not self.grows_unbounded:
            logger.warning(f"table 非线性末端增长指数 β={self.beta:.4g} ≤ 0，f 不趋于无穷")

    def _segment(self, t):
        return np.clip(np.searchsorted(self.t, t, side='right') - 1, 0, len(self.t) - 2)

    def _f_pos(self, t):
        tail = self.tail_coeff * np.maximum(t, self.t[-1]) ** self.beta
        return np.where(t <= self.t[-1], np.interp(t, self.t, self.fv), tail)

    def f(self, t):
        t = np.asarray(t, dtype=float)
        return np.sign(t) * self._f_pos(np.abs(t))

    def df(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        inside = self.slopes[self._segment(t)]
        tail = self.tail_coeff * self.beta * np.maximum(t, self.t[-1]) ** (self.beta - 1.0)
        return np.where(t < self.t[-1], inside, tail)

    def _F_pos(self, t):
        idx = self._segment(t)
        d = t - self.t[idx]
        inside = self.Fv[idx] + self.fv[idx] * d + 0.5 * self.slopes[idx] * d ** 2
        E = self.beta + 1.0
        tt = np.maximum(t, self.t[-1])
        tail = self.Fv[-1] + self.tail_coeff / E * (tt ** E - self.t[-1] ** E)
        return np.where(t <= self.t[-1], inside, tail)

    def F(self, t):
        return self._F_pos(np.abs(np.asarray(t, dtype=float)))

    def F_increment(self, base, s):
        idx = int(self._segment(base))
        if base + s <= self.t[idx + 1] and base < self.t[-1]:
            return float(self.f(base) * s + 0.5 * self.slopes[idx] * s * s)
        if base >= self.t[-1]:
            return float(self.tail_coeff * _power_increment(base, s, self.beta + 1.0))
        return float(self.F(base + s) - self.F(base))

    def log_F_at_log(self, y):
        if y <= math.log(self.t[-1]):
            return float(np.log(self.F(math.exp(y))))
        E = self.beta + 1.0
        B = self.tail_coeff / E
        A = self.Fv[-1] - B * self.t[-1] ** E
        return math.log(B) + E * y + math.log1p(A / B * math.exp(-E * y))

    @property
    def tail_exponent(self):
        return self.beta + 1.0

    @cached_property
    def ko_holds(self) -> bool:
        # 外推尾部只在 t ≥ t_end 上是幂律，用逐段倍增积分判别
        return ko_tail_test(self, float(self.t[-1]))

    @property
    def zero_exponent(self):
        return 2.0

    def params(self):
        return {"points": np.column_stack([self.t, self.fv]).tolist()}


def nonlinearity_from_config(cfg: Dict[str, Any], p: Optional[float] = None) -> Nonlinearity:
    """解析 {"kind": "power", "q": 3} 之类的配置"""
    kind = cfg.get("kind")
    p_value = float(cfg.get("p", p if p is not None else 2.0))
    try:
        if kind == "power":
            return PowerNonlinearity(float(cfg["q"]), p_value)
        if kind == "power_sum":
            return PowerSumNonlinearity(cfg["terms"], p_value)
        if kind in ("table", "tabulated"):
            return TabulatedNonlinearity(cfg["points"], p_value)
    except KeyError as e:
        raise ConfigValidationError(f"非线性配置缺少字段 {e}") from e
    raise ConfigValidationError(f"未知的非线性类型 '{kind}'")


# ---------------------------------------------------------------- quadrature

def ko_constant(p: float) -> float:
    return ((p - 1.0) / p) ** (1.0 / p)


def _quad(fun: Callable[[float], float], a: float, b: float) -> float:
    if b <= a:
        return 0.0
    rel_tol = get_config_value('quadrature.rel_tol', 1e-12)
    limit = get_config_value('quadrature.limit', 400)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, _ = integrate.quad(fun, a, b, epsabs=0.0, epsrel=rel_tol, limit=limit)
    return value


def ko_tail_test(nl: Nonlinearity, start: float = 1.0) -> bool:
    """按 [2^{k−1}s₀, 2^k s₀] 上的 ∫F^{-1/p} 逐段判别 (KO)

    部分和超过 divergence_threshold 或相邻段之比不小于 1 时判为发散。
    """
    if not start > 0:
        raise NonpositiveInputError(f"起点必须 > 0，实际为 {start}")
    p = nl.p
    levels = get_config_value('quadrature.osgood_levels', 40)
    threshold = get_config_value('quadrature.divergence_threshold', 1e6)
    y0 = math.log(start)

    def piece(y):
        return math.exp(y - nl.log_F_at_log(y) / p)

    increments: List[float] = []
    running = 0.0
    for k in range(1, levels + 1):
        inc = _quad(piece, y0 + (k - 1) * math.log(2.0), y0 + k * math.log(2.0))
        running += inc
        increments.append(inc)
        if running > threshold:
            logger.debug(f"(KO) 尾部部分积分在第 {k} 段超过阈值")
            return False
    ratio = increments[-1] / increments[-2]
    logger.debug(f"(KO) 尾部相邻段之比 {ratio:.6g}")
    return ratio < 1.0 - 1e-9


def keller_integral(nl: Nonlinearity, base: float, lower: float) -> float:
    """∫_lower^∞ (F(s) − F(base))^{-1/p} ds，lower ≥ base ≥ 0

    近端用 s = base + σ^m 消去代数奇性，远端用 s = s₀ w^{-1/(e-1)} 把尾部压到 (0,1]。
    (KO) 不成立时返回 +∞。
    """
    p = nl.p
    e = nl.tail_exponent / p
    if e <= 1.0 or not nl.ko_holds:
        return math.inf
    if lower < base:
        raise ValueError("lower 必须 ≥ base")

    log_F_base = nl.log_F_at_log(math.log(base)) if base > 0.0 else -math.inf

    def log_increment(log_s):
        log_F = nl.log_F_at_log(log_s)
        if log_F_base > -math.inf:
            log_F += math.log1p(-math.exp(log_F_base - log_F))
        return log_F

    total = 0.0
    start = lower
    if base > 0.0 and lower < 2.0 * base:
        # s = base + σ^m，m = p/(p−1) 使被积函数在 σ = 0 处有界
        m = p / (p - 1.0)

        def near(sigma):
            inc = nl.F_increment(base, sigma ** m)
            return m * sigma ** (m - 1.0) * inc ** (-1.0 / p)

        total += _quad(near, (lower - base) ** (1.0 / m), base ** (1.0 / m))
        start = 2.0 * base
    elif base == 0.0 and lower == 0.0:
        ratio = nl.zero_exponent / p
        if ratio >= 1.0:
            return math.inf
        m = 1.0 / (1.0 - ratio)

        def near_zero(sigma):
            return m * sigma ** (m - 1.0) * float(nl.F(sigma ** m)) ** (-1.0 / p)

        total += _quad(near_zero, 0.0, 1.0)
        start = 1.0

    split = max(start, 1.0)
    if start < split:
        # 中段在 log s 上积分，覆盖多个数量级
        def middle(y):
            return math.exp(y - log_increment(y) / p)

        total += _quad(middle, math.log(start), math.log(split))

    log_s0 = math.log(split)

    def far(w):
        log_s = log_s0 - math.log(w) / (e - 1.0)
        return math.exp(-log_increment(log_s) / p + log_s0 - math.log(e - 1.0) - e / (e - 1.0) * math.log(w))

    total += _quad(far, 0.0, 1.0)
    return total


def primitive_F(nl: Nonlinearity, x: float) -> float:
    if x < 0:
        raise NegativeInputError(f"F 的自变量必须 ≥ 0，实际为 {x}")
    return float(nl.F(x))


def psi(nl: Nonlinearity, r: float) -> float:
    """Ψ(r) = ((p−1)/p)^{1/p} ∫_r^∞ F(s)^{-1/p} ds，发散时返回 +∞"""
    if not r > 0:
        raise NonpositiveInputError(f"Ψ 的自变量必须 > 0，实际为 {r}")
    if not nl.ko_holds:
        return math.inf
    return ko_constant(nl.p) * keller_integral(nl, 0.0, r)


def psi_at_zero(nl: Nonlinearity) -> float:
    """lim_{r→0⁺} Ψ(r)；(A1) 时为 +∞"""
    if not nl.ko_holds:
        return math.inf
    return ko_constant(nl.p) * keller_integral(nl, 0.0, 0.0)


def _phi_numeric(nl: Nonlinearity, s: float, psi_zero: float) -> float:
    if s >= psi_zero:
        raise OutOfRangeError(f"s={s} 超出 Ψ 的值域上界 {psi_zero:.6g}")
    log_s = math.log(s)

    def gap(y):
        return math.log(psi(nl, math.exp(y))) - log_s

    lo, hi = -1.0, 1.0
    while gap(lo) < 0:
        lo *= 2.0
        if lo < -700:
            raise OutOfRangeError(f"无法为 Φ({s}) 找到左端括区间")
    while gap(hi) > 0:
        hi *= 2.0
        if hi > 700:
            raise OutOfRangeError(f"无法为 Φ({s}) 找到右端括区间")
    y = optimize.brentq(gap, lo, hi, xtol=1e-13, rtol=1e-12)
    return math.exp(y)


class KOProfile:
    """Keller–Osserman 剖面：Ψ、Φ 与 Osgood 分类"""

    def __init__(self, nl: Nonlinearity, osgood: Optional[OsgoodClass] = None, L: Optional[float] = None):
        self.nl = nl
        self.ko_holds = nl.ko_holds
        self.osgood = osgood
        # γ = 1 时的 L
        self.L = L

    def psi(self, r: float) -> float:
        if isinstance(self.nl, PowerNonlinearity) and self.nl.psi_closed_form:
            if not r > 0:
                raise NonpositiveInputError(f"Ψ 的自变量必须 > 0，实际为 {r}")
            K, a = self.nl.psi_constant()
            return K * r ** (-a)
        return psi(self.nl, r)

    def psi_many(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if isinstance(self.nl, PowerNonlinearity) and self.nl.psi_closed_form:
            K, a = self.nl.psi_constant()
            return K * values ** (-a)
        return np.array([self.psi(v) for v in values.ravel()]).reshape(values.shape)

    def phi(self, s: float) -> float:
        return phi(self, s)

    def L_for(self, gamma: float) -> Optional[float]:
        return None if self.L is None else gamma * self.L

    def to_dict(self) -> Dict[str, Any]:
        return {
            "nonlinearity": self.nl.to_config(),
            "ko_holds": self.ko_holds,
            "osgood": self.osgood.value if self.osgood else None,
            "L": self.L,
        }


def phi(profile: KOProfile, s: float) -> float:
    """Φ = Ψ⁻¹；幂次情形用闭式，否则在 log r 上做括区间求根"""
    if not s > 0:
        raise NonpositiveInputError(f"Φ 的自变量必须 > 0，实际为 {s}")
    nl = profile.nl
    if not nl.ko_holds:
        raise DivergentIntegralError("(KO) 不成立，Φ 无定义")
    if isinstance(nl, PowerNonlinearity):
        K, a = nl.psi_constant()
        return (K / s) ** (1.0 / a)
    psi_zero = profile.L if profile.L is not None else psi_at_zero(nl)
    return _phi_numeric(nl, s, psi_zero)


# ---------------------------------------------------------------- Osgood

@dataclass
class OsgoodResult:
    osgood: OsgoodClass
    partials: List[float] = field(default_factory=list)
    # γ = 1 时的 L；仅 (A2)
    L: Optional[float] = None

    def L_for(self, gamma: float) -> Optional[float]:
        return None if self.L is None else gamma * self.L


def classify_osgood(nl: Nonlinearity, gamma: float = 1.0) -> OsgoodResult:
    """按 ε = 2^{-k} 的部分积分 ∫_ε^1 F^{-1/p} 判别 (A1)/(A2)"""
    p = nl.p
    levels = get_config_value('quadrature.osgood_levels', 40)
    threshold = get_config_value('quadrature.divergence_threshold', 1e6)
    tol = 1e-8

    def piece(y):
        return math.exp(y - nl.log_F_at_log(y) / p)

    partials: List[float] = []
    increments: List[float] = []
    extrapolated: List[float] = []
    running = 0.0
    for k in range(1, levels + 1):
        inc = _quad(piece, -k * math.log(2.0), -(k - 1) * math.log(2.0))
        running += inc
        partials.append(running)
        increments.append(inc)
        if running > threshold:
            logger.debug(f"Osgood 部分积分在 k={k} 超过阈值，判为 (A1)")
            return OsgoodResult(OsgoodClass.A1_DIVERGES, partials)
        if k >= 2:
            ratio = inc / increments[-2]
            if ratio < 1.0:
                extrapolated.append(running + inc * ratio / (1.0 - ratio))
            else:
                extrapolated.append(math.inf)

    ratios = [b / a for a, b in zip(increments[:-1], increments[1:])]
    last_ratio = ratios[-1]
    stable = abs(ratios[-1] - ratios[-2]) < 1e-6
    if stable and last_ratio >= 1.0 - 1e-9:
        return OsgoodResult(OsgoodClass.A1_DIVERGES, partials)

    if len(extrapolated) >= 2 and math.isfinite(extrapolated[-1]):
        change = abs(extrapolated[-1] - extrapolated[-2])
        if stable and change < tol * (1.0 + abs(extrapolated[-1])):
            L = ko_constant(p) * keller_integral(nl, 0.0, 0.0)
            logger.debug(f"Osgood 判为 (A2)，L(γ=1)={L:.10g}")
            return OsgoodResult(OsgoodClass.A2_CONVERGES, partials, L)

    raise InconclusiveError(f"Osgood 判别在 k={levels} 时仍不确定 (部分和 {running:.6g})")


def ko_profile(nl: Nonlinearity) -> KOProfile:
    if not nl.ko_holds:
        return KOProfile(nl, None, None)
    result = classify_osgood(nl)
    return KOProfile(nl, result.osgood, result.L)


def ko_report(nl: Nonlinearity) -> Dict[str, Any]:
    """KO/Osgood 分类报告，可直接序列化为 JSON"""
    report: Dict[str, Any] = {
        "nonlinearity": nl.to_config(),
        "p": nl.p,
        "ko_holds": nl.ko_holds,
        "tail_exponent": nl.tail_exponent,
        "zero_exponent": nl.zero_exponent,
        "psi_closed_form": nl.psi_closed_form,
        "osgood": None,
        "L": None,
    }
    if isinstance(nl, TabulatedNonlinearity):
        report["tail_growth_ok"] = nl.grows_unbounded
    try:
        result = classify_osgood(nl)
        report["osgood"] = result.osgood.value
        report["L"] = result.L
    except InconclusiveError as e:
        report["osgood"] = "inconclusive"
        report["osgood_error"] = str(e)
    if nl.ko_holds:
        report["psi_samples"] = {str(r): psi(nl, r) for r in (0.1, 1.0, 10.0)}
    return report
