"""
Minkowski Norms
Minkowski 范数族、对偶范数 H₀ 以及结构恒等式的数值验证

所有范数对象构造后不可变，运算均为纯函数，可并发调用。
"""

import json
import logging
import math
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from threading import Lock
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize
from scipy.interpolate import CubicSpline

from .config import get_config_value
from .errors import InvalidNormError, SolverStallWarning, ZeroVectorError

logger = logging.getLogger(__name__)

# 小于该欧氏长度的向量视为零向量
ZERO_TOL = 1e-14
FD_STEP = np.finfo(float).eps ** (1.0 / 3.0)


def _as_points(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _frozen(array) -> np.ndarray:
    arr = np.array(array, dtype=float)
    arr.setflags(write=False)
    return arr


def _fd_jacobian(fun, X: np.ndarray) -> np.ndarray:
    """中心差分求 fun 的 Jacobian，步长 h = ε^{1/3}(1+|x|)，结果对称化"""
    X = np.atleast_2d(X)
    n = X.shape[-1]
    step = FD_STEP * (1.0 + np.linalg.norm(X, axis=-1))
    J = np.empty(X.shape + (n,))
    for k in range(n):
        offset = np.zeros_like(X)
        offset[..., k] = step
        J[..., :, k] = (fun(X + offset) - fun(X - offset)) / (2.0 * step[..., None])
    return 0.5 * (J + np.swapaxes(J, -1, -2))


class MinkowskiNorm(ABC):
    """Minkowski 范数的抽象基类；value/gradient 支持 (..., n) 批量输入"""

    family: str = "abstract"
    symmetric: bool = True
    # 仅用于验证的非 Minkowski 范数（例如 ℓ^q, q≠2）
    minkowski: bool = True

    @property
    @abstractmethod
    def dim(self) -> int:
        ...

    @abstractmethod
    def value(self, X) -> np.ndarray:
        ...

    @abstractmethod
    def gradient(self, X) -> np.ndarray:
        """∇H，调用方保证 X 非零"""
        ...

    @abstractmethod
    def params(self) -> Dict[str, Any]:
        ...

    def half_sq_gradient(self, X) -> np.ndarray:
        """∇(H²/2) = H∇H，在原点取 0"""
        X = _as_points(X)
        norm = np.linalg.norm(X, axis=-1)
        safe = np.where(norm[..., None] > ZERO_TOL, X, 1.0)
        out = self.value(safe)[..., None] * self.gradient(safe)
        return np.where(norm[..., None] > ZERO_TOL, out, 0.0)

    def half_sq_hessian(self, X) -> np.ndarray:
        """∇²(H²/2)；默认对 ∇(H²/2) 做中心差分"""
        X = _as_points(X)
        single = X.ndim == 1
        H = _fd_jacobian(self.half_sq_gradient, X)
        return H[0] if single else H

    def dual_closed_form(self, xi: np.ndarray) -> Optional[np.ndarray]:
        """有闭式时返回 H₀(ξ)（批量），否则 None"""
        return None

    def dual_gradient_closed_form(self, xi: np.ndarray) -> Optional[np.ndarray]:
        return None

    def to_config(self) -> Dict[str, Any]:
        return {"family": self.family, "params": self.params(), "dim": self.dim}

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.params()}, dim={self.dim})"


@dataclass(frozen=True, eq=False, repr=False)
class EuclideanNorm(MinkowskiNorm):
    n: int = 2
    family = "euclidean"

    @property
    def dim(self) -> int:
        return self.n

    def value(self, X):
        return np.linalg.norm(_as_points(X), axis=-1)

    def gradient(self, X):
        X = _as_points(X)
        return X / np.linalg.norm(X, axis=-1)[..., None]

    def half_sq_gradient(self, X):
        return _as_points(X).copy()

    def half_sq_hessian(self, X):
        X = _as_points(X)
        return np.broadcast_to(np.eye(self.n), X.shape + (self.n,)).copy()

    def dual_closed_form(self, xi):
        return np.linalg.norm(xi, axis=-1)

    def dual_gradient_closed_form(self, xi):
        return xi / np.linalg.norm(xi, axis=-1)[..., None]

    def params(self):
        return {}


@dataclass(frozen=True, eq=False, repr=False)
class Scaled1DNorm(MinkowskiNorm):
    """一维范数 H(t) = γ|t|"""
    gamma: float = 1.0
    family = "scaled1d"

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidNormError(f"scaled1d 要求 γ > 0，实际为 {self.gamma}")

    @property
    def dim(self) -> int:
        return 1

    def value(self, X):
        return self.gamma * np.abs(_as_points(X)[..., 0])

    def gradient(self, X):
        return self.gamma * np.sign(_as_points(X))

    def half_sq_gradient(self, X):
        return self.gamma ** 2 * _as_points(X)

    def half_sq_hessian(self, X):
        X = _as_points(X)
        return np.full(X.shape + (1,), self.gamma ** 2)

    def dual_closed_form(self, xi):
        return np.abs(xi[..., 0]) / self.gamma

    def dual_gradient_closed_form(self, xi):
        return np.sign(xi) / self.gamma

    def params(self):
        return {"gamma": self.gamma}


@dataclass(frozen=True, eq=False, repr=False)
class LinearMapNorm(MinkowskiNorm):
    """H_A(x) = |Ax|"""
    A: np.ndarray = field(default_factory=lambda: np.eye(2))
    family = "linear_map"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise InvalidNormError(f"linear_map 需要方阵，实际形状 {A.shape}")
        if not np.isfinite(A).all() or np.linalg.cond(A) > 1e12:
            raise InvalidNormError("linear_map 的矩阵 A 不可逆")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "_gram", _frozen(A.T @ A))
        object.__setattr__(self, "_inv", _frozen(np.linalg.inv(A)))

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def value(self, X):
        return np.linalg.norm(_as_points(X) @ self.A.T, axis=-1)

    def gradient(self, X):
        X = _as_points(X)
        return (X @ self._gram) / self.value(X)[..., None]

    def half_sq_gradient(self, X):
        return _as_points(X) @ self._gram

    def half_sq_hessian(self, X):
        X = _as_points(X)
        return np.broadcast_to(self._gram, X.shape + (self.dim,)).copy()

    def dual_closed_form(self, xi):
        # H₀(ξ) = |A^{-T}ξ|
        return np.linalg.norm(xi @ self._inv, axis=-1)

    def dual_gradient_closed_form(self, xi):
        Y = xi @ self._inv
        return (Y @ self._inv.T) / np.linalg.norm(Y, axis=-1)[..., None]

    def params(self):
        return {"A": self.A.tolist()}


@dataclass(frozen=True, eq=False, repr=False)
class LambdaMuNorm(MinkowskiNorm):
    """H_{λ,μ}(x) = sqrt(λ·sqrt(Σx⁴) + μ·Σx²)"""
    lam: float = 1.0
    mu: float = 1.0
    n: int = 2
    family = "lambda_mu"

    def __post_init__(self):
        if self.lam < 0 or not self.mu > 0:
            raise InvalidNormError(f"lambda_mu 要求 λ ≥ 0, μ > 0，实际为 ({self.lam}, {self.mu})")

    @property
    def dim(self) -> int:
        return self.n

    def value(self, X):
        X = _as_points(X)
        s4 = np.sqrt(np.sum(X ** 4, axis=-1))
        return np.sqrt(self.lam * s4 + self.mu * np.sum(X ** 2, axis=-1))

    def half_sq_gradient(self, X):
        X = _as_points(X)
        root = np.sqrt(np.sum(X ** 4, axis=-1))[..., None]
        quartic = np.divide(X ** 3, root, out=np.zeros_like(X), where=root > 0)
        return self.lam * quartic + self.mu * X

    def gradient(self, X):
        X = _as_points(X)
        return self.half_sq_gradient(X) / self.value(X)[..., None]

    def half_sq_hessian(self, X):
        X = _as_points(X)
        s4 = np.sum(X ** 4, axis=-1)[..., None, None]
        root = np.sqrt(s4)
        cube = X ** 3
        diag = np.zeros(X.shape + (self.n,))
        idx = np.arange(self.n)
        diag[..., idx, idx] = 3.0 * X ** 2
        hess = diag / root - 2.0 * cube[..., :, None] * cube[..., None, :] / (root * s4)
        return self.lam * hess + self.mu * np.eye(self.n)

    def params(self):
        return {"lambda": self.lam, "mu": self.mu}


@dataclass(frozen=True, eq=False, repr=False)
class BlockPQNorm(MinkowskiNorm):
    """H_{q,P,Λ}(x) = (Σᵢ λᵢ ‖x⁽ⁱ⁾‖_{pᵢ}^q)^{1/q}"""
    q: float = 2.0
    sizes: Tuple[int, ...] = (1, 1)
    exponents: Tuple[float, ...] = (2.0, 2.0)
    weights: Tuple[float, ...] = (1.0, 1.0)
    family = "block_pq"

    def __post_init__(self):
        sizes = tuple(int(m) for m in self.sizes)
        exponents = tuple(float(p) for p in self.exponents)
        weights = tuple(float(w) for w in self.weights)
        if not (len(sizes) == len(exponents) == len(weights)) or not sizes:
            raise InvalidNormError("block_pq 的分块、指数与权重长度必须一致")
        if self.q < 1 or min(exponents) < 1 or min(sizes) < 1 or min(weights) <= 0:
            raise InvalidNormError("block_pq 要求 q, pᵢ ≥ 1、mᵢ ≥ 1、λᵢ > 0")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "exponents", exponents)
        object.__setattr__(self, "weights", weights)
        bounds = np.concatenate([[0], np.cumsum(sizes)])
        object.__setattr__(self, "_slices", tuple(slice(bounds[i], bounds[i + 1]) for i in range(len(sizes))))

    @property
    def dim(self) -> int:
        return int(sum(self.sizes))

    @property
    def is_weighted_euclidean(self) -> bool:
        return self.q == 2 and all(p == 2 for p in self.exponents)

    def _block_norms(self, X):
        return [np.sum(np.abs(X[..., s]) ** p, axis=-1) ** (1.0 / p)
                for s, p in zip(self._slices, self.exponents)]

    def value(self, X):
        X = _as_points(X)
        total = sum(w * N ** self.q for w, N in zip(self.weights, self._block_norms(X)))
        return total ** (1.0 / self.q)

    def gradient(self, X):
        X = _as_points(X)
        H = self.value(X)
        grad = np.zeros_like(X)
        for s, p, w, N in zip(self._slices, self.exponents, self.weights, self._block_norms(X)):
            block = X[..., s]
            with np.errstate(divide='ignore', invalid='ignore'):
                scale = w * np.where(N > 0, N ** (self.q - p), 0.0) * H ** (1.0 - self.q)
            grad[..., s] = scale[..., None] * np.sign(block) * np.abs(block) ** (p - 1.0)
        return grad

    def _diag_weights(self) -> np.ndarray:
        return np.concatenate([np.full(m, w) for m, w in zip(self.sizes, self.weights)])

    def dual_closed_form(self, xi):
        if not self.is_weighted_euclidean:
            return None
        return np.sqrt(np.sum(xi ** 2 / self._diag_weights(), axis=-1))

    def dual_gradient_closed_form(self, xi):
        if not self.is_weighted_euclidean:
            return None
        scaled = xi / self._diag_weights()
        return scaled / self.dual_closed_form(xi)[..., None]

    def params(self):
        return {"q": self.q, "sizes": list(self.sizes), "exponents": list(self.exponents),
                "weights": list(self.weights)}


@dataclass(frozen=True, eq=False, repr=False)
class RandersNorm(MinkowskiNorm):
    """H(x) = |x| + ⟨T, x⟩，要求 ‖T‖ ≤ 1"""
    T: np.ndarray = field(default_factory=lambda: np.zeros(2))
    family = "randers"
    symmetric = False

    def __post_init__(self):
        T = np.atleast_1d(np.asarray(self.T, dtype=float))
        if np.linalg.norm(T) > 1.0:
            raise InvalidNormError(f"Randers 范数要求 ‖T‖ ≤ 1，实际为 {np.linalg.norm(T):.6g}")
        object.__setattr__(self, "T", _frozen(T))

    @property
    def dim(self) -> int:
        return self.T.shape[0]

    def value(self, X):
        X = _as_points(X)
        return np.linalg.norm(X, axis=-1) + X @ self.T

    def gradient(self, X):
        X = _as_points(X)
        return X / np.linalg.norm(X, axis=-1)[..., None] + self.T

    def params(self):
        return {"T": self.T.tolist()}


@dataclass(frozen=True, eq=False, repr=False)
class QNorm(MinkowskiNorm):
    """ℓ^q 范数；q ≠ 2 时只是半正定，仅供验证器使用"""
    q: float = 4.0
    n: int = 2
    family = "qnorm"

    def __post_init__(self):
        if self.q < 1:
            raise InvalidNormError("qnorm 要求 q ≥ 1")
        object.__setattr__(self, "minkowski", self.q == 2)

    @property
    def dim(self) -> int:
        return self.n

    def value(self, X):
        return np.sum(np.abs(_as_points(X)) ** self.q, axis=-1) ** (1.0 / self.q)

    def gradient(self, X):
        X = _as_points(X)
        H = self.value(X)[..., None]
        return np.sign(X) * (np.abs(X) / H) ** (self.q - 1.0)

    def params(self):
        return {"q": self.q}


_FAMILIES = {
    "euclidean": lambda params, dim: EuclideanNorm(n=int(dim)),
    "scaled1d": lambda params, dim: Scaled1DNorm(gamma=float(params["gamma"])),
    "linear_map": lambda params, dim: LinearMapNorm(A=np.asarray(params["A"], dtype=float)),
    "lambda_mu": lambda params, dim: LambdaMuNorm(lam=float(params["lambda"]), mu=float(params["mu"]), n=int(dim)),
    "block_pq": lambda params, dim: BlockPQNorm(q=float(params["q"]), sizes=tuple(params["sizes"]),
                                                exponents=tuple(params["exponents"]),
                                                weights=tuple(params["weights"])),
    "randers": lambda params, dim: RandersNorm(T=np.asarray(params["T"], dtype=float)),
    "qnorm": lambda params, dim: QNorm(q=float(params["q"]), n=int(dim)),
}


def norm_from_config(cfg: Dict[str, Any]) -> MinkowskiNorm:
    """从 {"family", "params", "dim"} 构造范数"""
    family = cfg.get("family")
    if family not in _FAMILIES:
        raise InvalidNormError(f"未知的范数族 '{family}'，可选: {sorted(_FAMILIES)}")
    params = cfg.get("params", {}) or {}
    try:
        norm = _FAMILIES[family](params, cfg.get("dim", 2))
    except KeyError as e:
        raise InvalidNormError(f"范数族 {family} 缺少参数 {e}") from e
    if "dim" in cfg and int(cfg["dim"]) != norm.dim:
        raise InvalidNormError(f"dim={cfg['dim']} 与参数推出的维数 {norm.dim} 不一致")
    return norm


def norm_to_config(norm: MinkowskiNorm) -> Dict[str, Any]:
    return norm.to_config()


# ---------------------------------------------------------------- primal ops

def eval_H(norm: MinkowskiNorm, x) -> float:
    return float(norm.value(_as_points(x)))


def _require_nonzero(x) -> np.ndarray:
    x = _as_points(x)
    if np.linalg.norm(x) <= ZERO_TOL:
        raise ZeroVectorError("H 在原点不可微")
    return x


def grad_H(norm: MinkowskiNorm, x) -> np.ndarray:
    return norm.gradient(_require_nonzero(x))


def hess_half_H2(norm: MinkowskiNorm, x) -> np.ndarray:
    return norm.half_sq_hessian(_require_nonzero(x))


# ---------------------------------------------------------------- dual norm

@dataclass(frozen=True)
class DualValue:
    value: float
    # H-单位球面上的极大点，同时就是 ∇H₀(ξ)
    maximizer: np.ndarray
    stalled: bool = False


class DualEvaluator:
    """H₀(ξ) = sup ⟨ξ,x⟩/H(x) 的数值求值器"""

    def __init__(self, base: MinkowskiNorm, seeds_per_dim: Optional[int] = None,
                 tolerance: Optional[float] = None):
        self.base = base
        self.seeds_per_dim = seeds_per_dim or get_config_value('norms.dual_seeds_per_dim', 64)
        self.tolerance = tolerance or get_config_value('norms.dual_tolerance', 1e-12)
        self._table: Optional[CubicSpline] = None
        self._table_lock = Lock()

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def has_closed_form(self) -> bool:
        sample = np.ones((1, self.dim))
        return self.base.dual_closed_form(sample) is not None

    def _seed_directions(self) -> np.ndarray:
        n = self.dim
        m = self.seeds_per_dim * n
        if n == 2:
            angles = 2.0 * np.pi * np.arange(2 * m) / (2 * m)
            return np.column_stack([np.cos(angles), np.sin(angles)])
        rng = np.random.default_rng(12345)
        U = rng.normal(size=(m, n))
        U = np.vstack([U, np.eye(n), -np.eye(n)])
        return U / np.linalg.norm(U, axis=1)[:, None]

    def evaluate(self, xi) -> DualValue:
        """计算 H₀(ξ) 与对应的极大点"""
        xi = _as_points(xi).reshape(-1)
        size = float(np.linalg.norm(xi))
        if size == 0.0:
            return DualValue(0.0, np.zeros_like(xi))
        closed = self.base.dual_closed_form(xi[None, :])
        if closed is not None:
            grad = self.base.dual_gradient_closed_form(xi[None, :])[0]
            return DualValue(float(closed[0]), grad)

        unit = xi / size
        if self.dim == 1:
            candidates = np.array([[1.0], [-1.0]])
            ratios = (candidates @ unit) / self.base.value(candidates)
            best = int(np.argmax(ratios))
            x_star = candidates[best] / self.base.value(candidates[best])
            return DualValue(float(ratios[best]) * size, x_star)

        seeds = self._seed_directions()
        ratios = (seeds @ unit) / self.base.value(seeds)
        order = np.argsort(-ratios)
        grid_best = float(ratios[order[0]])
        if self.dim == 2:
            value, x_star = self._refine_planar(unit, seeds, order[:2], len(seeds))
        else:
            value, x_star = self._refine_ascent(unit, seeds[order[:4]])

        stalled = value < grid_best * (1.0 - 1e-12)
        if stalled:
            warnings.warn(f"对偶范数上升未改进采样值 (ξ={xi.tolist()})", SolverStallWarning, stacklevel=2)
            x_star = seeds[order[0]] / self.base.value(seeds[order[0]])
            value = grid_best
        return DualValue(value * size, x_star, stalled)

    def _refine_planar(self, unit, seeds, candidates, count) -> Tuple[float, np.ndarray]:
        spacing = 2.0 * np.pi / count

        def negative_ratio(theta):
            u = np.array([math.cos(theta), math.sin(theta)])
            return -float(u @ unit) / float(self.base.value(u))

        best_value, best_theta = -np.inf, 0.0
        for idx in candidates:
            center = math.atan2(seeds[idx, 1], seeds[idx, 0])
            res = optimize.minimize_scalar(negative_ratio, bounds=(center - spacing, center + spacing),
                                           method='bounded', options={'xatol': self.tolerance})
            if -res.fun > best_value:
                best_value, best_theta = -res.fun, float(res.x)
        u = np.array([math.cos(best_theta), math.sin(best_theta)])
        return best_value, u / float(self.base.value(u))

    def _refine_ascent(self, unit, starts) -> Tuple[float, np.ndarray]:
        def objective(x):
            H = float(self.base.value(x))
            val = float(x @ unit)
            grad = unit / H - val * self.base.gradient(x) / H ** 2
            return -val / H, -grad

        best_value, best_x = -np.inf, starts[0]
        for start in starts:
            res = optimize.minimize(objective, start, jac=True, method='BFGS', options={'gtol': 1e-11})
            x = res.x / np.linalg.norm(res.x)
            value = float(x @ unit) / float(self.base.value(x))
            if value > best_value:
                best_value, best_x = value, x
        return best_value, best_x / float(self.base.value(best_x))

    def value_many(self, X) -> np.ndarray:
        """批量求 H₀；二维数值情形使用周期样条角度表"""
        X = _as_points(X)
        closed = self.base.dual_closed_form(X)
        if closed is not None:
            return closed
        if self.dim != 2:
            flat = X.reshape(-1, self.dim)
            return np.array([self.evaluate(x).value for x in flat]).reshape(X.shape[:-1])
        table = self._angle_table()
        radius = np.linalg.norm(X, axis=-1)
        angle = np.mod(np.arctan2(X[..., 1], X[..., 0]), 2.0 * np.pi)
        return radius * table(angle)

    def _angle_table(self) -> CubicSpline:
        with self._table_lock:
            if self._table is None:
                size = get_config_value('geometry.dual_table_size', 4096)
                angles = np.linspace(0.0, 2.0 * np.pi, size + 1)
                values = np.array([self.evaluate([math.cos(a), math.sin(a)]).value for a in angles[:-1]])
                values = np.append(values, values[0])
                self._table = CubicSpline(angles, values, bc_type='periodic')
                logger.debug(f"已建立 {self.base.family} 对偶范数角度表 ({size} 点)")
            return self._table


def dual_H0(dual: DualEvaluator, xi) -> float:
    return dual.evaluate(xi).value


def grad_H0(dual: DualEvaluator, x) -> np.ndarray:
    """∇H₀(x)：取对偶问题的极大点（包络定理）"""
    x = _require_nonzero(x)
    return dual.evaluate(x).maximizer


# ---------------------------------------------------------------- θ bounds

@dataclass(frozen=True)
class ThetaBounds:
    theta1: float
    theta2: float

    def __post_init__(self):
        if self.theta1 > self.theta2:
            raise ValueError(f"θ₁={self.theta1} 大于 θ₂={self.theta2}")

    @property
    def is_valid(self) -> bool:
        return self.theta1 > 0


def _sphere_extremes(fun, dim: int, sweep: int) -> Tuple[float, float]:
    """欧氏单位球面上 fun 的最小值与最大值（扫描 + 局部细化）"""
    if dim == 1:
        vals = fun(np.array([[1.0], [-1.0]]))
        return float(vals.min()), float(vals.max())

    if dim == 2:
        angles = 2.0 * np.pi * np.arange(sweep) / sweep
        vals = fun(np.column_stack([np.cos(angles), np.sin(angles)]))
        spacing = 2.0 * np.pi / sweep

        def on_circle(theta, sign):
            return sign * float(fun(np.array([math.cos(theta), math.sin(theta)])))

        extremes = []
        for idx, sign in ((int(np.argmin(vals)), 1.0), (int(np.argmax(vals)), -1.0)):
            res = optimize.minimize_scalar(on_circle, args=(sign,), method='bounded',
                                           bounds=(angles[idx] - spacing, angles[idx] + spacing),
                                           options={'xatol': 1e-12})
            extremes.append(sign * min(res.fun, sign * vals[idx]))
        return extremes[0], extremes[1]

    rng = np.random.default_rng(7)
    U = rng.normal(size=(max(sweep // 10, 200 * dim), dim))
    U = np.vstack([U, np.eye(dim), -np.eye(dim)])
    U /= np.linalg.norm(U, axis=1)[:, None]
    vals = fun(U)
    extremes = []
    for idx, sign in ((int(np.argmin(vals)), 1.0), (int(np.argmax(vals)), -1.0)):
        res = optimize.minimize(lambda y: sign * float(fun(y / np.linalg.norm(y))), U[idx],
                                method='Nelder-Mead', options={'xatol': 1e-12, 'fatol': 1e-14})
        extremes.append(sign * min(res.fun, sign * vals[idx]))
    return extremes[0], extremes[1]


def theta_bounds(norm: MinkowskiNorm, sweep: Optional[int] = None) -> ThetaBounds:
    """θ₁ = min_{|x|=1} H(x)，θ₂ = max_{|x|=1} H(x)"""
    sweep = sweep or get_config_value('norms.theta_sweep', 20000)
    lo, hi = _sphere_extremes(norm.value, norm.dim, sweep)
    return ThetaBounds(max(lo, 0.0), hi)


def dual_theta_bounds(dual: DualEvaluator, sweep: int = 4096) -> ThetaBounds:
    """H₀ 在欧氏单位球面上的界"""
    lo, hi = _sphere_extremes(dual.value_many, dual.dim, sweep)
    return ThetaBounds(max(lo, 0.0), hi)


# ---------------------------------------------------------------- verification

@dataclass
class CheckResult:
    name: str
    passed: bool
    worst_residual: float
    tolerance: float
    informational: bool = False
    note: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "worst_residual": float(self.worst_residual),
            "tolerance": float(self.tolerance),
            "informational": self.informational,
            "note": self.note,
        }


@dataclass
class ValidityReport:
    family: str
    dim: int
    samples: int
    seed: int
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.informational)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family,
            "dim": self.dim,
            "samples": self.samples,
            "seed": self.seed,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)


def _unit_samples(rng, count: int, dim: int, with_axes: bool = False) -> np.ndarray:
    U = rng.normal(size=(count, dim))
    if with_axes:
        U = np.vstack([np.eye(dim), -np.eye(dim), U])
    return U / np.linalg.norm(U, axis=1)[:, None]


def verify_minkowski(norm: MinkowskiNorm, samples: int, seed: int = 0,
                     dual: Optional[DualEvaluator] = None) -> ValidityReport:
    """抽样检查范数公理与 H/H₀ 恒等式；失败作为报告条目而非异常"""
    if samples < 1:
        raise ValueError("samples 必须 ≥ 1")
    rng = np.random.default_rng(seed)
    dual = dual or DualEvaluator(norm)
    n = norm.dim
    report = ValidityReport(norm.family, n, samples, seed)
    add = report.checks.append

    U = _unit_samples(rng, samples, n)
    radii = np.exp(rng.uniform(-2.0, 2.0, size=samples))
    X = U * radii[:, None]
    HX = norm.value(X)

    # 正性
    positivity = float(np.min(norm.value(_unit_samples(rng, samples, n, with_axes=True))))
    add(CheckResult("positivity", positivity > 0.0, positivity, 0.0,
                    note="min H on unit sphere"))

    # 齐次性：非对称范数只对 t > 0 成立
    t = np.exp(rng.uniform(-3.0, 3.0, size=samples))
    if norm.symmetric:
        t = t * rng.choice([-1.0, 1.0], size=samples)
    homog = np.max(np.abs(norm.value(t[:, None] * X) - np.abs(t) * HX) / (1.0 + np.abs(t) * HX))
    add(CheckResult("homogeneity", homog <= 1e-10, homog, 1e-10))
    if not norm.symmetric:
        sym = float(np.max(np.abs(norm.value(-X) - HX) / (1.0 + HX)))
        add(CheckResult("absolute_homogeneity", sym <= 1e-10, sym, 1e-10, informational=True,
                        note="H(-x) = H(x)"))

    # 强凸性
    threshold = get_config_value('norms.convexity_threshold', 1e-8)
    per_dim = get_config_value('norms.convexity_samples_per_dim', 256)
    S = _unit_samples(rng, per_dim * n, n, with_axes=True)
    if n == 2:
        diagonals = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]) / math.sqrt(2.0)
        S = np.vstack([S, diagonals])
    min_eig = float(np.min(np.linalg.eigvalsh(norm.half_sq_hessian(S))))
    add(CheckResult("strong_convexity", min_eig > threshold, min_eig, threshold,
                    note="min eigenvalue of Hessian of H^2/2"))

    # 三角不等式
    Y = _unit_samples(rng, samples, n) * np.exp(rng.uniform(-2.0, 2.0, size=samples))[:, None]
    HY = norm.value(Y)
    triangle = float(np.max((norm.value(X + Y) - HX - HY) / (HX + HY)))
    add(CheckResult("triangle", triangle <= 1e-12, max(triangle, 0.0), 1e-12))

    # Euler 恒等式
    G = norm.gradient(X)
    euler = float(np.max(np.abs(np.sum(G * X, axis=1) - HX) / (1.0 + HX)))
    add(CheckResult("euler", euler <= 1e-9, euler, 1e-9))

    # 梯度界
    bound = math.sqrt(float(np.sum(norm.value(np.eye(n)) ** 2)))
    grad_excess = float(np.max(np.linalg.norm(G, axis=1) - bound))
    add(CheckResult("gradient_bound", grad_excess <= 1e-9, max(grad_excess, 0.0), 1e-9))

    # 范数等价
    bounds = theta_bounds(norm)
    absx = np.linalg.norm(X, axis=1)
    equiv = float(np.max(np.maximum(bounds.theta1 * absx - HX, HX - bounds.theta2 * absx) / (1.0 + HX)))
    add(CheckResult("norm_equivalence", bounds.is_valid and equiv <= 1e-9, max(equiv, 0.0), 1e-9,
                    note=f"theta=({bounds.theta1:.6g}, {bounds.theta2:.6g})"))

    # 单调性配对
    for p in (2, 3, 4):
        flux_x = (HX ** (p - 1))[:, None] * G
        flux_y = (HY ** (p - 1))[:, None] * norm.gradient(Y)
        pairing = np.sum((flux_x - flux_y) * (X - Y), axis=1)
        scale = 1.0 + HX ** p + HY ** p
        worst = float(np.min(pairing / scale))
        add(CheckResult(f"monotonicity_p{p}", worst >= -1e-10, max(-worst, 0.0), 1e-10))

    # H-Hölder 与对偶恒等式
    Xi = _unit_samples(rng, samples, n) * np.exp(rng.uniform(-2.0, 2.0, size=samples))[:, None]
    holder, dual_unit, dual_inverse = 0.0, 0.0, 0.0
    for x, xi, g in zip(X, Xi, G):
        h0_xi = dual.evaluate(xi).value
        holder = max(holder, (float(xi @ x) - h0_xi * float(norm.value(x))) / (1.0 + h0_xi * float(norm.value(x))))
        dual_unit = max(dual_unit, abs(dual.evaluate(g).value - 1.0))
        dx = dual.evaluate(x)
        recon = dx.value * norm.gradient(dx.maximizer)
        dual_inverse = max(dual_inverse, float(np.linalg.norm(recon - x) / np.linalg.norm(x)))
    add(CheckResult("holder", holder <= 1e-9, max(holder, 0.0), 1e-9))
    add(CheckResult("dual_unit", dual_unit <= 1e-6, dual_unit, 1e-6, note="|H0(grad H(x)) - 1|"))
    add(CheckResult("dual_inverse", dual_inverse <= 1e-5, dual_inverse, 1e-5,
                    note="|H0(x) grad H(grad H0(x)) - x| / |x|"))

    failed = [c.name for c in report.checks if not c.passed and not c.informational]
    if failed:
        logger.info(f"{norm.family} 范数验证未通过: {failed}")
    else:
        logger.info(f"✅ {norm.family} 范数验证通过 ({samples} 样本)")
    return report
