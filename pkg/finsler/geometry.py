"""
Planar Domains and Anisotropic Distance
平面 C² 区域、各向异性距离 δ_{H₀}、内/外 Wulff 球与管状邻域查询
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from matplotlib.path import Path as PolygonPath
from scipy import optimize
from scipy.interpolate import CubicSpline
from scipy.spatial import cKDTree

from .cache import MemoCache
from .config import get_config_value
from .errors import BallViolationError, ConfigValidationError, OutsideDomainError
from .norms import DualEvaluator, MinkowskiNorm, ThetaBounds, dual_theta_bounds, norm_from_config

logger = logging.getLogger(__name__)

# δ_{H₀} 不超过该值·max(1, diam) 的点视为在 ∂Ω 上
BOUNDARY_TOLERANCE = 1e-12

Curve = Callable[[np.ndarray], np.ndarray]


class Domain2D:
    """由稠密有序边界采样描述的有界平面区域（逆时针）"""

    def __init__(self, curve: Curve, d1: Curve, d2: Curve, period: float,
                 samples: Optional[int] = None, name: str = "custom"):
        self.name = name
        self.period = float(period)
        self.samples = samples or get_config_value('geometry.boundary_samples', 4096)
        s = self.period * np.arange(self.samples) / self.samples
        points, first, second = curve(s), d1(s), d2(s)

        signed_area = 0.5 * np.sum(points[:, 0] * np.roll(points[:, 1], -1) - np.roll(points[:, 0], -1) * points[:, 1])
        if signed_area < 0:
            # 反转参数方向使边界逆时针
            self._curve = lambda t: curve(self.period - np.asarray(t))
            self._d1 = lambda t: -d1(self.period - np.asarray(t))
            self._d2 = lambda t: d2(self.period - np.asarray(t))
            points, first, second = self._curve(s), self._d1(s), self._d2(s)
        else:
            self._curve, self._d1, self._d2 = curve, d1, d2

        self.param = s
        self.points = points
        speed = np.linalg.norm(first, axis=1)
        self.tangents = first / speed[:, None]
        self.normals = np.column_stack([self.tangents[:, 1], -self.tangents[:, 0]])
        self.curvature = (first[:, 0] * second[:, 1] - first[:, 1] * second[:, 0]) / speed ** 3
        self.arclength = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(
            np.vstack([points, points[:1]]), axis=0), axis=1))])
        self._path = PolygonPath(points)
        self._validate()
        logger.debug(f"区域 {name}: {self.samples} 个边界样本，面积 {self.area:.6g}")

    # ------------------------------------------------------------ shapes

    @classmethod
    def disk(cls, r: float = 1.0, center=(0.0, 0.0), samples: Optional[int] = None) -> "Domain2D":
        return cls.ellipse(r, r, center, samples, name="disk")

    @classmethod
    def ellipse(cls, a: float, b: float, center=(0.0, 0.0), samples: Optional[int] = None,
                name: str = "ellipse") -> "Domain2D":
        if not (a > 0 and b > 0):
            raise ConfigValidationError(f"椭圆半轴必须为正，实际为 ({a}, {b})")
        c = np.asarray(center, dtype=float)
        return cls(lambda t: np.column_stack([c[0] + a * np.cos(t), c[1] + b * np.sin(t)]),
                   lambda t: np.column_stack([-a * np.sin(t), b * np.cos(t)]),
                   lambda t: np.column_stack([-a * np.cos(t), -b * np.sin(t)]),
                   2.0 * np.pi, samples, name)

    @classmethod
    def from_spline(cls, knots: np.ndarray, nodes: np.ndarray, samples: Optional[int] = None,
                    name: str = "spline") -> "Domain2D":
        """周期三次样条曲线；nodes 首尾相同"""
        spline = CubicSpline(knots, nodes, bc_type='periodic')
        period = float(knots[-1] - knots[0])
        return cls(lambda t: spline(knots[0] + np.mod(t, period)),
                   lambda t: spline(knots[0] + np.mod(t, period), 1),
                   lambda t: spline(knots[0] + np.mod(t, period), 2),
                   period, samples, name)

    @classmethod
    def wulff(cls, dual: DualEvaluator, r: float = 1.0, center=(0.0, 0.0),
              samples: Optional[int] = None) -> "Domain2D":
        """Wulff 球 W_r(x₀) = {H₀(x − x₀) < r} 的边界"""
        count = get_config_value('geometry.dual_table_size', 4096)
        theta = np.linspace(0.0, 2.0 * np.pi, count + 1)
        u = np.column_stack([np.cos(theta), np.sin(theta)])
        nodes = np.asarray(center, dtype=float) + r * u / dual.value_many(u)[:, None]
        nodes[-1] = nodes[0]
        return cls.from_spline(theta, nodes, samples, name="wulff")

    @classmethod
    def polygon(cls, vertices, samples: Optional[int] = None) -> "Domain2D":
        """以弦长为参数的周期样条光滑多边形顶点"""
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
            raise ConfigValidationError("polygon 至少需要 3 个二维顶点")
        closed = np.vstack([verts, verts[:1]])
        knots = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(closed, axis=0), axis=1))])
        if np.any(np.diff(knots) <= 0):
            raise ConfigValidationError("polygon 含有重复顶点")
        return cls.from_spline(knots, closed, samples, name="polygon")

    @classmethod
    def from_config(cls, cfg: Any, samples: Optional[int] = None) -> "Domain2D":
        if isinstance(cfg, list):
            return cls.polygon(cfg, samples)
        shape = cfg.get("shape", "polygon" if "vertices" in cfg else None)
        center = cfg.get("center", [0.0, 0.0])
        if shape == "disk":
            return cls.disk(float(cfg.get("r", 1.0)), center, samples)
        if shape == "ellipse":
            return cls.ellipse(float(cfg["a"]), float(cfg["b"]), center, samples)
        if shape == "wulff":
            dual = DualEvaluator(norm_from_config(cfg["norm"]))
            return cls.wulff(dual, float(cfg.get("r", 1.0)), center, samples)
        if shape == "polygon":
            return cls.polygon(cfg["vertices"], samples)
        raise ConfigValidationError(f"未知的区域形状 '{shape}'")

    # ------------------------------------------------------------ properties

    def _validate(self):
        gap = np.linalg.norm(self._curve(np.array([0.0])) - self._curve(np.array([self.period])))
        if gap > 1e-12 * (1.0 + self.diameter):
            raise ConfigValidationError(f"边界曲线不闭合 (首尾距离 {gap:.3e})")
        if not np.all(np.isfinite(self.curvature)) or np.max(np.abs(self.curvature)) > 1e8:
            raise ConfigValidationError("边界曲率无界，区域不是 C²")
        if self._self_intersects():
            raise ConfigValidationError("边界曲线自相交")

    def _self_intersects(self, max_segments: int = 512) -> bool:
        stride = max(1, self.samples // max_segments)
        pts = self.points[::stride]
        a, b = pts, np.roll(pts, -1, axis=0)
        m = len(pts)

        def orient(p, q, r):
            return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

        A, B = a[:, None, :], b[:, None, :]
        C, D = a[None, :, :], b[None, :, :]
        crosses = (orient(A, B, C) * orient(A, B, D) < 0) & (orient(C, D, A) * orient(C, D, B) < 0)
        i, j = np.indices((m, m))
        gap = np.abs(i - j)
        crosses &= (gap > 1) & (gap < m - 1)
        return bool(np.any(crosses))

    @property
    def bounding_box(self) -> Tuple[float, float, float, float]:
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    @cached_property
    def diameter(self) -> float:
        pts = self.points[::max(1, self.samples // 1024)]
        return float(np.max(np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)))

    @property
    def area(self) -> float:
        x, y = self.points[:, 0], self.points[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @property
    def max_curvature(self) -> float:
        return float(np.max(np.abs(self.curvature)))

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self._path.contains_points(pts)

    def point_at(self, s) -> np.ndarray:
        return self._curve(np.atleast_1d(np.asarray(s, dtype=float)))

    def normal_at(self, s) -> np.ndarray:
        d = self._d1(np.atleast_1d(np.asarray(s, dtype=float)))
        t = d / np.linalg.norm(d, axis=1)[:, None]
        return np.column_stack([t[:, 1], -t[:, 0]])

    def nearest_index(self, z) -> int:
        return int(np.argmin(np.linalg.norm(self.points - np.asarray(z, dtype=float), axis=1)))

    def grid(self, h: float) -> Tuple[np.ndarray, np.ndarray]:
        """覆盖包围盒的均匀网格 (xs, ys)，网格线经过原点的整数倍"""
        x0, y0, x1, y1 = self.bounding_box
        xs = h * np.arange(math.floor(x0 / h) - 1, math.ceil(x1 / h) + 2)
        ys = h * np.arange(math.floor(y0 / h) - 1, math.ceil(y1 / h) + 2)
        return xs, ys


@dataclass(frozen=True)
class BallPair:
    x_int: np.ndarray
    x_ext: np.ndarray
    z: np.ndarray
    R: float


class AnisotropicDistanceField:
    """δ_{H₀}(x) = min{H₀(x − z) | z ∈ ∂Ω}"""

    def __init__(self, domain: Domain2D, dual: DualEvaluator):
        if dual.dim != 2:
            raise ConfigValidationError("距离场只支持二维范数")
        self.domain = domain
        self.dual = dual
        self.norm: MinkowskiNorm = dual.base
        self._cache = MemoCache(50000, name="delta_queries")
        self._tree = cKDTree(domain.points)
        self._bounds: Optional[ThetaBounds] = None
        self._ball_radius: Optional[float] = None

    @property
    def dual_bounds(self) -> ThetaBounds:
        if self._bounds is None:
            self._bounds = dual_theta_bounds(self.dual)
        return self._bounds

    # ------------------------------------------------------------ distance queries

    def _h0(self, diff) -> np.ndarray:
        return self.dual.value_many(diff)

    def delta_H0(self, x) -> Tuple[float, np.ndarray]:
        """单点查询：采样最小值 + 曲线参数上的局部一维细化"""
        x = np.asarray(x, dtype=float)
        if not self.domain.contains(x)[0]:
            raise OutsideDomainError(f"点 {x.tolist()} 不在区域内")
        key = (float(x[0]), float(x[1]))
        cached = self._cache.get(key)
        if cached is not None:
            return cached

        values = self._h0(x - self.domain.points)
        i = int(np.argmin(values))
        spacing = self.domain.period / self.domain.samples
        s_i = self.domain.param[i]

        def objective(s):
            return float(self._h0(x - self.domain.point_at(s))[0])

        res = optimize.minimize_scalar(objective, bounds=(s_i - spacing, s_i + spacing), method='bounded',
                                       options={'xatol': 1e-13 * max(1.0, self.domain.period)})
        if res.fun < values[i]:
            result = (max(float(res.fun), 0.0), self.domain.point_at(res.x)[0])
        else:
            result = (max(float(values[i]), 0.0), self.domain.points[i].copy())
        return self._cache.put(key, result)

    def delta_many(self, points, with_nearest: bool = False, stride: int = 8):
        """批量 δ_{H₀}：粗采样定位 + 局部全分辨率搜索 + 抛物线细化"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        N = self.domain.samples
        coarse = self.domain.points[::stride]
        deltas = np.empty(len(pts))
        nearest = np.empty((len(pts), 2))
        chunk = max(1, 400000 // len(coarse))
        offsets = np.arange(-stride, stride + 1)
        for start in range(0, len(pts), chunk):
            block = pts[start:start + chunk]
            values = self._h0(block[:, None, :] - coarse[None, :, :])
            centre = np.argmin(values, axis=1) * stride
            idx = (centre[:, None] + offsets[None, :]) % N
            local = self._h0(block[:, None, :] - self.domain.points[idx])
            j = np.argmin(local, axis=1)
            best = idx[np.arange(len(block)), j]
            v0 = local[np.arange(len(block)), j]
            vm = self._h0(block - self.domain.points[(best - 1) % N])
            vp = self._h0(block - self.domain.points[(best + 1) % N])
            curvature = vp - 2.0 * v0 + vm
            safe = curvature > 1e-300
            shift = np.where(safe, 0.5 * (vm - vp) / np.where(safe, curvature, 1.0), 0.0)
            shift = np.clip(shift, -0.5, 0.5)
            refined = np.minimum(v0, v0 + 0.5 * shift * (vp - vm) + 0.5 * curvature * shift ** 2)
            deltas[start:start + len(block)] = np.maximum(refined, 0.0)
            s = self.domain.param[best] + shift * self.domain.period / N
            nearest[start:start + len(block)] = self.domain.point_at(s)
        if with_nearest:
            return deltas, nearest
        return deltas

    def euclidean_distance_many(self, points) -> np.ndarray:
        """欧氏距离（KD 树最近样本 + 抛物线细化）"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        N = self.domain.samples
        _, best = self._tree.query(pts)
        v0 = np.linalg.norm(pts - self.domain.points[best], axis=1)
        vm = np.linalg.norm(pts - self.domain.points[(best - 1) % N], axis=1)
        vp = np.linalg.norm(pts - self.domain.points[(best + 1) % N], axis=1)
        curvature = vp - 2.0 * v0 + vm
        safe = curvature > 1e-300
        shift = np.clip(np.where(safe, 0.5 * (vm - vp) / np.where(safe, curvature, 1.0), 0.0), -0.5, 0.5)
        return np.minimum(v0, v0 + 0.5 * shift * (vp - vm) + 0.5 * curvature * shift ** 2)

    def delta_gradient(self, x, h: float = 1e-6) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        grad = np.empty(2)
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            grad[k] = (self.delta_H0(x + e)[0] - self.delta_H0(x - e)[0]) / (2.0 * h)
        return grad

    def representation_residual(self, x, h: float = 1e-6) -> float:
        """‖z(x) + δ∇H(∇δ) − x‖"""
        delta, z = self.delta_H0(x)
        grad = self.delta_gradient(x, h)
        return float(np.linalg.norm(z + delta * self.norm.gradient(grad) - np.asarray(x, dtype=float)))

    # ------------------------------------------------------------ Wulff balls

    def _touching_check(self, center, R: float, z_index: int, sign: float) -> bool:
        """sign=+1: 内球 {H₀(x_c − y) < R}；sign=−1: 外球 {H₀(y − x_c) < R}"""
        pts = self.domain.points
        diff = (center - pts) if sign > 0 else (pts - center)
        values = self._h0(diff)
        arc = np.abs(self.domain.arclength[:-1] - self.domain.arclength[z_index])
        perimeter = self.domain.arclength[-1]
        arc = np.minimum(arc, perimeter - arc)
        window = max(1e-3, 3.0 * perimeter / self.domain.samples)
        if np.any(values < R - 1e-6):
            return False
        far = arc > window
        # 远离 z 的样本不能再与球面相切
        return not np.any(np.abs(values[far] - R) <= 1e-6)

    def interior_exterior_balls(self, z, R: float) -> BallPair:
        """z 处的内外 Wulff 球中心 x_int = z + R∇H(−ν)，x_ext = z − R∇H(−ν)

        ν 为 z 处的外法向。∂Ω 上 ∇δ_{H₀} 与 −ν 同向，∇H 零次齐次，
        所以表示公式 x = z + δ∇H(∇δ) 沿这条法线给出的就是上述闭式。
        """
        z = np.asarray(z, dtype=float)
        i = self.domain.nearest_index(z)
        z = self.domain.points[i]
        direction = self.norm.gradient(-self.domain.normals[i])
        x_int = z + R * direction
        x_ext = z - R * direction

        if not self.domain.contains(x_int)[0] or not self._touching_check(x_int, R, i, +1.0):
            raise BallViolationError(f"半径 R={R} 的内 Wulff 球在 z={z.tolist()} 处越过边界")
        if self.domain.contains(x_ext)[0] or not self._touching_check(x_ext, R, i, -1.0):
            raise BallViolationError(f"半径 R={R} 的外 Wulff 球在 z={z.tolist()} 处越过边界")
        return BallPair(x_int, x_ext, z.copy(), float(R))

    def uniform_ball_radius(self, count: int = 64) -> float:
        """c/max|κ| 按 H₀ 的 θ 界缩放后，用离散相切检查逐次减半验证"""
        if self._ball_radius is not None:
            return self._ball_radius
        bounds = self.dual_bounds
        R = 0.5 * bounds.theta1 / (bounds.theta2 * self.domain.max_curvature)
        indices = np.linspace(0, self.domain.samples, count, endpoint=False).astype(int)
        for _ in range(20):
            try:
                for i in indices:
                    self.interior_exterior_balls(self.domain.points[i], R)
                break
            except BallViolationError:
                R *= 0.5
        self._ball_radius = R
        logger.info(f"一致 Wulff 球半径估计 R={R:.6g}，管宽 μ={R / 2:.6g}")
        return R

    @property
    def tube_width(self) -> float:
        """δ_{H₀} 保持 C² 的管宽 μ 的估计"""
        return 0.5 * self.uniform_ball_radius()

    # ------------------------------------------------------------ grid queries

    def _interior_points(self, h: float) -> Tuple[np.ndarray, np.ndarray]:
        """网格点与其 δ_{H₀}；落在 ∂Ω 上 (δ ≈ 0) 的点剔除"""
        xs, ys = self.domain.grid(h)
        X, Y = np.meshgrid(xs, ys)
        pts = np.column_stack([X.ravel(), Y.ravel()])
        pts = pts[self.domain.contains(pts)]
        if len(pts) == 0:
            return pts, np.empty(0)
        deltas = self.delta_many(pts)
        keep = deltas > BOUNDARY_TOLERANCE * max(1.0, self.domain.diameter)
        return pts[keep], deltas[keep]

    def interior_grid(self, h: float) -> np.ndarray:
        return self._interior_points(h)[0]

    def tube(self, delta: float, grid_h: float) -> np.ndarray:
        """Ω_δ 与网格的交：δ_{H₀} < delta 的内部网格点"""
        if not (delta > 0 and grid_h > 0):
            raise ValueError("delta 与 grid_h 必须为正")
        pts, deltas = self._interior_points(grid_h)
        return pts[deltas < delta]

    def raster(self, h: float) -> List[Tuple[float, float, float]]:
        """(x, y, delta) 行，供 CSV 导出"""
        pts, deltas = self._interior_points(h)
        return [(float(x), float(y), float(d)) for (x, y), d in zip(pts, deltas)]


def distance_field_from_config(domain_cfg: Any, norm_cfg: Dict[str, Any]) -> AnisotropicDistanceField:
    norm = norm_from_config(norm_cfg)
    return AnisotropicDistanceField(Domain2D.from_config(domain_cfg), DualEvaluator(norm))
