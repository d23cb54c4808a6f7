"""
Two-Dimensional Dirichlet and Large Solutions
二维能量极小化求解器：Dirichlet 问题、单调 k 序列逼近爆破解、边界渐近与唯一性检查
"""

import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve
from sklearn.linear_model import LinearRegression

from .config import get_config_value
from .errors import (ConfigValidationError, DivergentIntegralError, NegativeInputError,
                     NoConvergenceError, NonconvexDetectedError, NonpositiveInputError,
                     NotStabilizedError)
from .geometry import BOUNDARY_TOLERANCE, AnisotropicDistanceField, Domain2D
from .nonlinearity import KOProfile, Nonlinearity, PowerNonlinearity
from .norms import ZERO_TOL, DualEvaluator, EuclideanNorm, MinkowskiNorm
from .ode1d import cached_profile
from .performance_monitor import get_performance_monitor
from .radial import solve_omega

logger = logging.getLogger(__name__)

BoundaryData = Union[float, Callable[[np.ndarray, np.ndarray], np.ndarray], None]
Source = Optional[Callable[[np.ndarray], np.ndarray]]

# 边界层节点的 δ 下限（以 h 为单位）
DELTA_FLOOR = 1e-3
# f' 在 0 处可能无界（q < 1）
DF_CAP = 1e30


@dataclass(frozen=True, eq=False)
class DirichletProblem:
    """−Δ_H^p u + f(u) = source 于 Ω，u = g 于 ∂Ω；g 为 None 时表示爆破边界"""
    domain: Domain2D
    norm: MinkowskiNorm
    nl: Nonlinearity
    g: BoundaryData = 0.0
    source: Source = None
    distance_field: Optional[AnisotropicDistanceField] = None

    def __post_init__(self):
        if self.norm.dim != 2:
            raise ConfigValidationError(f"二维求解器需要二维范数，实际维数 {self.norm.dim}")
        if not self.norm.minkowski:
            raise ConfigValidationError(f"{self.norm.family} 不是 Minkowski 范数，能量不是严格凸的")
        if self.g is not None and not callable(self.g) and float(self.g) < 0:
            raise NegativeInputError(f"边界数据 g 必须 ≥ 0，实际为 {self.g}")
        if self.distance_field is None:
            object.__setattr__(self, "distance_field",
                               AnisotropicDistanceField(self.domain, DualEvaluator(self.norm)))

    @property
    def p(self) -> float:
        return self.nl.p

    def with_data(self, g: BoundaryData) -> "DirichletProblem":
        return replace(self, g=g)


# ---------------------------------------------------------------- grid

def _complete_cells(active: np.ndarray, index: np.ndarray) -> np.ndarray:
    complete = active[:-1, :-1] & active[1:, :-1] & active[:-1, 1:] & active[1:, 1:]
    i, j = np.nonzero(complete)
    return np.column_stack([index[i, j], index[i + 1, j], index[i, j + 1], index[i + 1, j + 1]])


def _difference(plus: np.ndarray, minus: np.ndarray, size: int, h: float) -> sparse.csr_matrix:
    rows = np.arange(len(plus))
    data = np.concatenate([np.full(len(plus), 1.0 / h), np.full(len(minus), -1.0 / h)])
    return sparse.csr_matrix((data, (np.concatenate([rows, rows]), np.concatenate([plus, minus]))),
                             shape=(len(plus), size))


@dataclass(frozen=True, eq=False)
class DiscreteGrid:
    """均匀网格上落在区域内的活动节点；free 之外的节点承载边界数据"""
    h: float
    xs: np.ndarray
    ys: np.ndarray
    index: np.ndarray
    points: np.ndarray
    deltas: np.ndarray
    free: np.ndarray
    cells: np.ndarray
    weights: np.ndarray
    layer: float

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def free_count(self) -> int:
        return int(np.count_nonzero(self.free))

    @cached_property
    def gradient_operators(self) -> Tuple[sparse.csr_matrix, sparse.csr_matrix]:
        """每个完整单元四个角点上的单侧差分，行按角点 00, 10, 01, 11 分块"""
        n00, n10, n01, n11 = self.cells.T
        Gx = _difference(np.concatenate([n10, n10, n11, n11]), np.concatenate([n00, n00, n01, n01]),
                         self.size, self.h)
        Gy = _difference(np.concatenate([n01, n11, n01, n11]), np.concatenate([n00, n10, n00, n10]),
                         self.size, self.h)
        return Gx, Gy

    def with_layer(self, layer: float) -> "DiscreteGrid":
        """加厚边界层：δ < layer 的节点也变为边界节点"""
        return replace(self, free=self.free & (self.deltas >= layer), layer=float(layer))

    @classmethod
    def rectangle(cls, x0: float, y0: float, x1: float, y1: float, h: float) -> "DiscreteGrid":
        """矩形上的完整网格（梯形求积权重），外圈节点为边界节点"""
        nx, ny = int(round((x1 - x0) / h)), int(round((y1 - y0) / h))
        xs, ys = x0 + h * np.arange(nx + 1), y0 + h * np.arange(ny + 1)
        X, Y = np.meshgrid(xs, ys, indexing='ij')
        active = np.ones(X.shape, dtype=bool)
        index = np.arange(X.size).reshape(X.shape)
        deltas = np.minimum.reduce([X - x0, x1 - X, Y - y0, y1 - Y]).ravel()
        wx, wy = np.full(nx + 1, h), np.full(ny + 1, h)
        wx[[0, -1]] *= 0.5
        wy[[0, -1]] *= 0.5
        return cls(h, xs, ys, index, np.column_stack([X.ravel(), Y.ravel()]), deltas,
                   deltas > 0.5 * h, _complete_cells(active, index), np.outer(wx, wy).ravel(), 0.5 * h)


def build_grid(field: AnisotropicDistanceField, h: float, layer: Optional[float] = None) -> DiscreteGrid:
    """区域内的网格节点；δ_{H₀} < layer 或 8 邻域越界的节点组成边界层"""
    if not h > 0:
        raise NonpositiveInputError(f"网格步长必须 > 0，实际为 {h}")
    domain = field.domain
    if domain.diameter / h < 16:
        raise ConfigValidationError(f"h={h} 太粗：直径方向不足 16 个节点")
    if layer is None:
        layer = get_config_value('pde.layer_width', 3.0) * h * field.dual_bounds.theta2

    xs, ys = domain.grid(h)
    X, Y = np.meshgrid(xs, ys, indexing='ij')
    inside = domain.contains(np.column_stack([X.ravel(), Y.ravel()])).reshape(X.shape)
    candidate_deltas = field.delta_many(np.column_stack([X[inside], Y[inside]]))
    # 落在 ∂Ω 上的节点不算活动节点
    on_domain = candidate_deltas > BOUNDARY_TOLERANCE * max(1.0, domain.diameter)
    active = inside.copy()
    active[inside] = on_domain
    index = np.full(X.shape, -1, dtype=int)
    index[active] = np.arange(int(np.count_nonzero(active)))
    points = np.column_stack([X[active], Y[active]])
    deltas = candidate_deltas[on_domain]

    nx, ny = active.shape
    padded = np.pad(active, 1, constant_values=False)
    surrounded = np.ones_like(active)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            surrounded &= padded[1 + di:1 + di + nx, 1 + dj:1 + dj + ny]
    free = surrounded[active] & (deltas >= layer)

    grid = DiscreteGrid(float(h), xs, ys, index, points, deltas, free, _complete_cells(active, index),
                        np.full(len(points), h * h), float(layer))
    logger.debug(f"网格 h={h}: {grid.size} 个活动节点，{grid.free_count} 个自由节点，边界层 {layer:.4g}")
    return grid


# ---------------------------------------------------------------- fields

@dataclass(frozen=True, eq=False)
class DiscreteField:
    grid: DiscreteGrid
    values: np.ndarray
    energy: float
    residual: float = 0.0
    iterations: int = 0
    k: Optional[float] = None
    energy_trace: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.values.shape != (self.grid.size,):
            raise ValueError(f"场的长度 {self.values.shape} 与网格节点数 {self.grid.size} 不符")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("离散场含有非有限值")

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.grid.free]

    @property
    def boundary_values(self) -> np.ndarray:
        return self.values[~self.grid.free]

    def rows(self) -> List[Tuple[float, float, float]]:
        return [(float(x), float(y), float(u)) for (x, y), u in zip(self.grid.points, self.values)]


def phi_many(profile: KOProfile, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    nl = profile.nl
    if isinstance(nl, PowerNonlinearity) and nl.ko_holds:
        K, a = nl.psi_constant()
        return (K / s) ** (1.0 / a)
    return np.array([profile.phi(float(v)) for v in s.ravel()]).reshape(s.shape)


def boundary_values(prob: DirichletProblem, grid: DiscreteGrid) -> np.ndarray:
    """边界层节点上的数据

    常数 g = c 时取半空间剖面 Φ(δ + Ψ(c))，它在 ∂Ω 上等于 c；
    g 为 None 时取 Φ(δ)。
    """
    fixed = ~grid.free
    deltas = np.maximum(grid.deltas[fixed], DELTA_FLOOR * grid.h)
    g = prob.g
    if g is None:
        return phi_many(cached_profile(prob.nl), deltas)
    if callable(g):
        return np.broadcast_to(np.asarray(g(grid.points[fixed], deltas), dtype=float), deltas.shape).copy()
    c = float(g)
    if c > 0 and prob.nl.ko_holds:
        profile = cached_profile(prob.nl)
        return phi_many(profile, deltas + profile.psi(c))
    return np.full(len(deltas), c)


# ---------------------------------------------------------------- energy

class _DiscreteEnergy:
    """J_h(u) = h²/4 Σ_单元 Σ_角点 (1/p)(H(∇_h u)² + ε²)^{p/2} + Σ w_i (F(u_i) − s_i u_i)"""

    def __init__(self, prob: DirichletProblem, grid: DiscreteGrid, eps: float = 0.0):
        self.norm = prob.norm
        self.nl = prob.nl
        self.p = prob.p
        self.grid = grid
        self.eps = float(eps)
        self.Gx, self.Gy = grid.gradient_operators
        self.cell_weight = 0.25 * grid.h ** 2
        self.source = np.zeros(grid.size) if prob.source is None else \
            np.broadcast_to(np.asarray(prob.source(grid.points), dtype=float), (grid.size,))

    def gradients(self, u: np.ndarray) -> np.ndarray:
        return np.column_stack([self.Gx @ u, self.Gy @ u])

    def parts(self, u: np.ndarray) -> Tuple[float, float]:
        s = self.norm.value(self.gradients(u)) ** 2 + self.eps ** 2
        gradient_term = self.cell_weight * float(np.sum(s ** (0.5 * self.p))) / self.p
        potential = float(np.sum(self.grid.weights * (self.nl.F(u) - self.source * u)))
        return gradient_term, potential

    def value(self, u: np.ndarray) -> float:
        return sum(self.parts(u))

    def gradient(self, u: np.ndarray) -> np.ndarray:
        G = self.gradients(u)
        s = self.norm.value(G) ** 2 + self.eps ** 2
        flux = (s ** (0.5 * self.p - 1.0))[:, None] * self.norm.half_sq_gradient(G)
        return (self.cell_weight * (self.Gx.T @ flux[:, 0] + self.Gy.T @ flux[:, 1])
                + self.grid.weights * (self.nl.f(u) - self.source))

    def hessian(self, u: np.ndarray) -> sparse.csr_matrix:
        G = self.gradients(u)
        s = self.norm.value(G) ** 2 + self.eps ** 2
        lengths = np.linalg.norm(G, axis=1)
        tiny = lengths <= ZERO_TOL * (1.0 + float(lengths.max(initial=0.0)))
        # 零梯度处 H²/2 不二阶可微，取任一方向上的 Hessian 作为次梯度保护
        safe = np.where(tiny[:, None], np.array([1.0, 0.0]), G)
        hess = self.norm.half_sq_hessian(safe)
        hg = self.norm.half_sq_gradient(G)
        a = s ** (0.5 * self.p - 1.0)
        with np.errstate(divide='ignore', invalid='ignore'):
            b = np.where(s > 0, (self.p - 2.0) * s ** (0.5 * self.p - 2.0), 0.0)
        D = a[:, None, None] * hess + b[:, None, None] * hg[:, :, None] * hg[:, None, :]

        w = self.cell_weight
        dxx = sparse.diags(w * D[:, 0, 0])
        dxy = sparse.diags(w * 0.5 * (D[:, 0, 1] + D[:, 1, 0]))
        dyy = sparse.diags(w * D[:, 1, 1])
        Gx, Gy = self.Gx, self.Gy
        K = Gx.T @ dxx @ Gx + Gx.T @ dxy @ Gy + Gy.T @ dxy @ Gx + Gy.T @ dyy @ Gy
        df = np.minimum(np.nan_to_num(self.nl.df(u), nan=DF_CAP, posinf=DF_CAP), DF_CAP)
        return (K + sparse.diags(self.grid.weights * df)).tocsr()


def energy_parts(prob: DirichletProblem, field: DiscreteField) -> Tuple[float, float]:
    """(梯度项, 位势项)"""
    return _DiscreteEnergy(prob, field.grid).parts(field.values)


def energy_J(prob: DirichletProblem, field: DiscreteField) -> float:
    """离散能量 J_h；常数场的梯度项为 0"""
    return sum(energy_parts(prob, field))


def _relative_residual(energy: _DiscreteEnergy, u: np.ndarray, grad: np.ndarray) -> float:
    """逐节点 |−Δ_H^p u + f(u) − s| / (1 + |f(u)| + |s|) 的最大值"""
    free = energy.grid.free
    if not np.any(free):
        return 0.0
    operator = grad / energy.grid.weights[free]
    scale = 1.0 + np.abs(energy.nl.f(u[free])) + np.abs(energy.source[free])
    return float(np.max(np.abs(operator) / scale))


def _newton(energy: _DiscreteEnergy, u: np.ndarray, tol: float, max_iterations: int,
            strict: bool) -> Tuple[np.ndarray, float, int, List[float]]:
    """自由节点上的阻尼 Newton + Armijo 回溯"""
    free = energy.grid.free
    u = u.copy()
    free_idx = np.flatnonzero(free)
    J = energy.value(u)
    trace = [J]
    rel = math.inf
    for iteration in range(max_iterations + 1):
        grad = energy.gradient(u)[free]
        rel = _relative_residual(energy, u, grad)
        logger.debug(f"Newton[ε={energy.eps:.2e}] 第 {iteration} 步: J={J:.12g}, 相对残差 {rel:.3e}")
        if rel <= tol:
            return u, rel, iteration, trace
        if iteration == max_iterations:
            break

        hess = energy.hessian(u)[free_idx][:, free_idx]
        shift = 1e-14 * max(float(hess.diagonal().max(initial=0.0)), 1.0)
        step = spsolve((hess + shift * sparse.identity(hess.shape[0])).tocsc(), -grad)
        slope = float(grad @ step)
        if not np.all(np.isfinite(step)) or not slope < 0:
            raise NonconvexDetectedError(f"Newton 方向不是下降方向 (斜率 {slope:.3e})，范数可能无效")

        roundoff = 1e3 * np.finfo(float).eps * (1.0 + abs(J))
        alpha = 1.0
        while True:
            trial = u.copy()
            trial[free] += alpha * step
            J_trial = energy.value(trial)
            if J_trial <= J + 1e-4 * alpha * slope:
                break
            if -alpha * slope <= roundoff:
                # 预期下降量已低于能量的舍入误差
                if J_trial > J + 1e-12 * (1.0 + abs(J)):
                    raise NonconvexDetectedError(
                        f"线搜索中能量上升 {J_trial - J:.3e}，离散能量不是凸的")
                break
            alpha *= 0.5
        u, J = trial, J_trial
        trace.append(J)

    if strict:
        raise NoConvergenceError(f"Newton 在 {max_iterations} 步内未收敛 (相对残差 {rel:.3e})", best=(u, rel))
    return u, rel, max_iterations, trace


def solve_dirichlet(prob: DirichletProblem, h: float, initial: Optional[np.ndarray] = None,
                    grid: Optional[DiscreteGrid] = None) -> DiscreteField:
    """极小化离散 J：ε 连续化 + Newton，最后一个阶段为 ε = 0"""
    grid = grid or build_grid(prob.distance_field, h)
    u = np.zeros(grid.size)
    if initial is not None:
        init = np.asarray(initial, dtype=float)
        if init.shape == (grid.size,):
            u[grid.free] = init[grid.free]
        elif init.shape == (grid.free_count,):
            u[grid.free] = init
        else:
            raise ValueError(f"初值长度 {init.shape} 与网格不符")
    u[~grid.free] = boundary_values(prob, grid)
    k = None if prob.g is None or callable(prob.g) else float(prob.g)

    schedule = [float(e) for e in get_config_value('pde.eps_schedule', [1e-2, 1e-4, 1e-6, 0.0])]
    if not schedule or schedule[-1] != 0.0:
        schedule.append(0.0)
    tol = get_config_value('pde.residual_tolerance', 1e-8)
    max_iterations = get_config_value('pde.max_iterations', 100)

    monitor = get_performance_monitor()
    with monitor.track("pde.solve_dirichlet") as info:
        exact = _DiscreteEnergy(prob, grid)
        scale = float(np.max(prob.norm.value(exact.gradients(u)), initial=0.0))
        if not scale > 0:
            scale = 1.0
        rel, trace = math.inf, []
        for stage, relative_eps in enumerate(schedule):
            energy = exact if relative_eps == 0.0 else _DiscreteEnergy(prob, grid, relative_eps * scale)
            final = stage == len(schedule) - 1
            try:
                u, rel, iterations, trace = _newton(energy, u, tol, max_iterations, strict=final)
            except NoConvergenceError as e:
                best_u, best_rel = e.best
                best = DiscreteField(grid, best_u, exact.value(best_u), best_rel, info['iterations'], k)
                raise NoConvergenceError(str(e), best=best) from e
            info['iterations'] += iterations
            logger.debug(f"ε 阶段 {stage}: ε={relative_eps * scale:.3e}, {iterations} 步, 残差 {rel:.3e}")

    field = DiscreteField(grid, u, exact.value(u), rel, info['iterations'], k, tuple(trace))
    logger.info(f"Dirichlet 求解完成: h={grid.h}, {grid.free_count} 个未知量, "
                f"{field.iterations} 步 Newton, 残差 {rel:.3e}")
    return field


# ---------------------------------------------------------------- large solutions

@dataclass(frozen=True, eq=False)
class LargeSolution2D:
    problem: DirichletProblem
    fields_by_k: Tuple[Tuple[float, DiscreteField], ...]
    limit: DiscreteField
    interior_converged: bool
    barrier_violations: int = 0

    @property
    def ks(self) -> List[float]:
        return [k for k, _ in self.fields_by_k]

    def is_increasing(self, tol: float = 1e-8) -> bool:
        """相邻 k 的场在所有共享节点上不减"""
        fields = [f.values for _, f in self.fields_by_k]
        return all(np.all(b >= a - tol * (1.0 + np.abs(a))) for a, b in zip(fields, fields[1:]))


def default_k_schedule() -> List[float]:
    start = get_config_value('pde.k_start', 1.0)
    base = get_config_value('pde.k_base', 2.0)
    return [start * base ** j for j in range(get_config_value('pde.max_stages', 60))]


def interior_mask(prob: DirichletProblem, grid: DiscreteGrid) -> np.ndarray:
    """δ_{H₀} > diam/10 的自由节点"""
    mask = grid.free & (grid.deltas > prob.domain.diameter / 10.0)
    return mask if np.any(mask) else grid.free


def barrier_bounds(nl: Nonlinearity, radii) -> np.ndarray:
    """以 x 为中心、半径 R = δ_{H₀}(x) 的内切 Wulff 球给出的上界 ω_R(R/2)"""
    radii = np.asarray(radii, dtype=float)
    if isinstance(nl, PowerNonlinearity):
        # ω_R(s) = R^{−p/(q+1−p)} ω_1(s/R)
        unit = solve_omega(1.0, nl.p, nl).evaluate(0.5)
        return unit * radii ** (-nl.p / (nl.q + 1.0 - nl.p))
    lo, hi = float(radii.min()), float(radii.max())
    table = np.geomspace(lo, hi, 16) if hi > lo else np.array([lo])
    bounds = np.array([solve_omega(R, nl.p, nl).evaluate(0.5 * R) for R in table])
    # 上界关于 R 递减：取不超过 R 的最大表格半径
    slot = np.clip(np.searchsorted(table, radii, side='right') - 1, 0, len(table) - 1)
    return bounds[slot]


def _barrier_violations(prob: DirichletProblem, field: DiscreteField) -> int:
    grid = field.grid
    nodes = grid.free & (grid.deltas > 0)
    if not np.any(nodes):
        return 0
    bounds = barrier_bounds(prob.nl, grid.deltas[nodes])
    u = field.values[nodes]
    violations = int(np.count_nonzero(u > bounds + 1e-6 * (1.0 + bounds)))
    if violations:
        logger.warning(f"{violations} 个节点超出 Wulff 球局部上界")
    return violations


def monotone_large_solution(prob: DirichletProblem, h: float, k_schedule: Optional[Sequence[float]] = None,
                            k_max: Optional[float] = None) -> LargeSolution2D:
    """g = k 的 Dirichlet 解随 k 递增；内部变化 < stop_tolerance 时停止"""
    if not prob.nl.ko_holds:
        raise DivergentIntegralError("(KO) 不成立，爆破解不存在")
    grid = build_grid(prob.distance_field, h)
    interior = interior_mask(prob, grid)
    ks = list(k_schedule) if k_schedule is not None else default_k_schedule()
    if k_max is not None:
        ks = [k for k in ks if k <= k_max]
    if not ks:
        raise ConfigValidationError("k 序列为空")
    stop = get_config_value('pde.stop_tolerance', 1e-5)

    monitor = get_performance_monitor()
    fields: List[Tuple[float, DiscreteField]] = []
    previous: Optional[DiscreteField] = None
    with monitor.track("pde.monotone_large_solution") as info:
        for k in ks:
            current = solve_dirichlet(prob.with_data(k), h,
                                      initial=None if previous is None else previous.values, grid=grid)
            fields.append((k, current))
            info['iterations'] += current.iterations
            if previous is not None:
                change = float(np.max(np.abs(current.values[interior] - previous.values[interior])))
                size = max(1.0, float(np.max(np.abs(current.values[interior]))))
                logger.debug(f"k={k:.6g}: 内部变化 {change:.3e}")
                if change <= stop * size:
                    logger.info(f"单调序列在 k={k:.6g} 处稳定 ({len(fields)} 个阶段)")
                    return LargeSolution2D(prob, tuple(fields), current, True,
                                           _barrier_violations(prob, current))
            previous = current
        raise NotStabilizedError(f"k 序列 ({len(ks)} 项，最大 {ks[-1]:.6g}) 用尽仍未稳定",
                                 best=LargeSolution2D(prob, tuple(fields), previous, False))


def shrinking_domain_solution(prob: DirichletProblem, h: float, levels: int = 4) -> DiscreteField:
    """在 Ω_m = {δ_{H₀} > m} 上求解，初值取常数 Φ(m)，m 逐次减半至边界层厚度

    Ω \\ Ω_m 中的节点取经过 ∂Ω_m 上 Φ(m) 的半空间剖面，即 Φ(δ)。
    """
    if not prob.nl.ko_holds:
        raise DivergentIntegralError("(KO) 不成立，爆破解不存在")
    large = prob.with_data(None)
    base = build_grid(prob.distance_field, h)
    profile = cached_profile(prob.nl)
    values: Optional[np.ndarray] = None
    field: Optional[DiscreteField] = None
    for j in reversed(range(levels)):
        margin = base.layer * 2.0 ** j
        grid = base if j == 0 else base.with_layer(margin)
        if j > 0 and grid.free_count < 16:
            logger.debug(f"m={margin:.4g} 时自由节点过少，跳过")
            continue
        initial = np.full(grid.size, float(phi_many(profile, margin))) if values is None else values
        field = solve_dirichlet(large, h, initial=initial, grid=grid)
        values = field.values
        logger.debug(f"收缩区域 m={margin:.4g}: 中心值 {float(np.min(field.interior_values)):.6g}")
    return field


# ---------------------------------------------------------------- verifiers

@dataclass(frozen=True)
class AsymptoticBand:
    lower: float
    upper: float
    count: int
    min_ratio: float
    max_ratio: float
    median_ratio: float
    median_ratio_euclidean: float
    resolved: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lower": self.lower, "upper": self.upper, "count": self.count,
            "min_ratio": self.min_ratio, "max_ratio": self.max_ratio,
            "median_ratio": self.median_ratio, "median_ratio_euclidean": self.median_ratio_euclidean,
            "resolved": self.resolved,
        }


def _as_bands(margins) -> List[Tuple[float, float]]:
    margins = list(margins)
    if margins and np.ndim(margins[0]) == 1:
        return [(float(lo), float(hi)) for lo, hi in margins]
    edges = sorted(float(m) for m in margins)
    return list(zip(edges, edges[1:]))


def boundary_asym_check(sol: LargeSolution2D, field: AnisotropicDistanceField,
                        margins) -> List[AsymptoticBand]:
    """各 δ_{H₀} 带上 Ψ(u)/δ_{H₀} 的最小/最大/中位数，及同一组节点上的欧氏对照"""
    limit = sol.limit
    grid = limit.grid
    profile = cached_profile(sol.problem.nl)
    pts = grid.points[grid.free]
    u = limit.values[grid.free]
    deltas = field.delta_many(pts)
    rows = []
    for lo, hi in _as_bands(margins):
        mask = (deltas >= lo) & (deltas <= hi)
        resolved = lo >= grid.layer
        if not resolved:
            logger.warning(f"带 [{lo}, {hi}] 低于边界层厚度 {grid.layer:.4g}")
        if not np.any(mask):
            rows.append(AsymptoticBand(lo, hi, 0, math.nan, math.nan, math.nan, math.nan, resolved))
            continue
        psi_u = profile.psi_many(u[mask])
        ratios = psi_u / deltas[mask]
        euclid = psi_u / field.euclidean_distance_many(pts[mask])
        rows.append(AsymptoticBand(lo, hi, int(mask.sum()), float(ratios.min()), float(ratios.max()),
                                   float(np.median(ratios)), float(np.median(euclid)), resolved))
        logger.debug(f"带 [{lo}, {hi}]: 中位数 {rows[-1].median_ratio:.6f} (欧氏 {rows[-1].median_ratio_euclidean:.6f})")
    return rows


@dataclass(frozen=True)
class PhiRatioRow:
    lower: float
    upper: float
    count: int
    min_ratio: float
    max_ratio: float
    median_ratio: float

    def to_dict(self) -> Dict[str, Any]:
        return {"lower": self.lower, "upper": self.upper, "count": self.count,
                "min_ratio": self.min_ratio, "max_ratio": self.max_ratio, "median_ratio": self.median_ratio}


def phi_ratio_table(field: DiscreteField, nl: Nonlinearity, margins) -> List[PhiRatioRow]:
    """u/Φ(δ_{H₀}) 的分带统计"""
    grid = field.grid
    profile = cached_profile(nl)
    rows = []
    for lo, hi in _as_bands(margins):
        mask = grid.free & (grid.deltas >= lo) & (grid.deltas <= hi)
        if not np.any(mask):
            rows.append(PhiRatioRow(lo, hi, 0, math.nan, math.nan, math.nan))
            continue
        ratios = field.values[mask] / phi_many(profile, grid.deltas[mask])
        rows.append(PhiRatioRow(lo, hi, int(mask.sum()), float(ratios.min()), float(ratios.max()),
                                float(np.median(ratios))))
    return rows


@dataclass(frozen=True)
class UniquenessReport:
    interior_sup_difference: float
    tube_sup_deviation: float
    phi_ratios: Tuple[PhiRatioRow, ...]
    order: Tuple[str, ...]
    tolerance: float = 0.03

    @property
    def passed(self) -> bool:
        return self.interior_sup_difference <= self.tolerance

    def to_dict(self) -> Dict[str, Any]:
        return {
            "interior_sup_difference": self.interior_sup_difference,
            "tube_sup_deviation": self.tube_sup_deviation,
            "phi_ratios": [row.to_dict() for row in self.phi_ratios],
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


SCHEMES = ("monotone", "shrinking")


def uniqueness_check(prob: DirichletProblem, h: float, order: Sequence[str] = SCHEMES,
                     tolerance: float = 0.03) -> UniquenessReport:
    """两种构造（单调 k 序列 / 收缩区域）的内部相对 sup 差与 u/Φ(δ) 偏差"""
    nl = prob.nl
    if not (isinstance(nl, PowerNonlinearity) and nl.q > nl.p - 1.0):
        raise ConfigValidationError("唯一性检查要求 f = t^q 且 q > p − 1")
    if sorted(order) != sorted(SCHEMES):
        raise ConfigValidationError(f"order 必须是 {SCHEMES} 的一个排列")
    builders = {
        "monotone": lambda: monotone_large_solution(prob, h).limit,
        "shrinking": lambda: shrinking_domain_solution(prob, h),
    }
    results = {name: builders[name]() for name in order}
    first, second = results["monotone"], results["shrinking"]
    grid = first.grid

    interior = interior_mask(prob, grid)
    difference = float(np.max(np.abs(first.values[interior] - second.values[interior])))
    relative = difference / max(float(np.max(np.abs(first.values[interior]))), 1e-300)

    tube = grid.free & (grid.deltas < prob.distance_field.tube_width)
    profile = cached_profile(nl)
    deviation = float(np.max(np.abs(first.values[tube] / phi_many(profile, grid.deltas[tube]) - 1.0),
                             initial=0.0))
    edges = grid.layer * 2.0 ** np.arange(5)
    table = phi_ratio_table(first, nl, edges)
    logger.info(f"唯一性检查: 内部相对 sup 差 {relative:.3e}，管状邻域 sup|u/Φ−1| = {deviation:.3e}")
    return UniquenessReport(relative, deviation, tuple(table), tuple(order), tolerance)


# ---------------------------------------------------------------- manufactured solutions

@dataclass(frozen=True)
class ManufacturedSolution:
    """欧氏范数、p = 2、f(u) = u³ 下的精确解 u* 与 Δu*"""
    name: str
    exact: Callable[[np.ndarray], np.ndarray]
    laplacian: Callable[[np.ndarray], np.ndarray]

    def problem(self, domain: Optional[Domain2D] = None) -> DirichletProblem:
        exact, laplacian = self.exact, self.laplacian
        return DirichletProblem(domain or Domain2D.disk(), EuclideanNorm(2), PowerNonlinearity(3.0, 2.0),
                                g=lambda points, deltas: exact(points),
                                source=lambda points: exact(points) ** 3 - laplacian(points))


# 五点格式对二次函数精确
QUADRATIC = ManufacturedSolution(
    "quadratic",
    lambda x: 1.0 + x[:, 0] ** 2,
    lambda x: np.full(len(x), 2.0),
)

TRIGONOMETRIC = ManufacturedSolution(
    "trigonometric",
    lambda x: 1.0 + x[:, 0] ** 2 + np.sin(x[:, 0]) * np.cos(x[:, 1]),
    lambda x: 2.0 - 2.0 * np.sin(x[:, 0]) * np.cos(x[:, 1]),
)


@dataclass(frozen=True)
class ConvergenceReport:
    solution: str
    hs: Tuple[float, ...]
    errors: Tuple[float, ...]
    order: float

    def to_dict(self) -> Dict[str, Any]:
        return {"solution": self.solution, "hs": list(self.hs), "errors": list(self.errors), "order": self.order}


def convergence_study(hs: Sequence[float] = (1 / 16, 1 / 32, 1 / 64),
                      solution: ManufacturedSolution = TRIGONOMETRIC,
                      domain: Optional[Domain2D] = None) -> ConvergenceReport:
    """自由节点上的 L∞ 误差与 log-log 最小二乘斜率"""
    prob = solution.problem(domain)
    errors = []
    for h in hs:
        field = solve_dirichlet(prob, h)
        free = field.grid.free
        errors.append(float(np.max(np.abs(field.values[free] - solution.exact(field.grid.points[free])))))
        logger.info(f"h={h:.5g}: L∞ 误差 {errors[-1]:.3e}")
    X = np.log(np.asarray(hs, dtype=float)).reshape(-1, 1)
    y = np.log(np.maximum(errors, 1e-300))
    order = float(LinearRegression().fit(X, y).coef_[0])
    return ConvergenceReport(solution.name, tuple(float(h) for h in hs), tuple(errors), order)
