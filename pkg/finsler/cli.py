"""
Command Line Front End
finsler 命令行：JSON 运行配置 → CSV/JSON 产物与 manifest
"""

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .config import update_config_value
from .errors import (ConfigValidationError, FinslerError, InvalidNormError, NotStabilizedError)
from .geometry import Domain2D
from .nonlinearity import PowerNonlinearity, ko_report, nonlinearity_from_config, psi
from .norms import DualEvaluator, norm_from_config, theta_bounds, verify_minkowski
from .ode1d import (Interval1DProblem, asym_check_1d, cached_profile, is_convex, ode_residual_1d,
                    residual_points, solve_interval)
from .pde import (DirichletProblem, boundary_asym_check, monotone_large_solution, solve_dirichlet,
                  uniqueness_check)
from .performance_monitor import get_performance_monitor
from .radial import (AnnulusProblem, annulus_asym_check, energy_identity_check, solve_annulus_large,
                     solve_ball_large)

logger = logging.getLogger(__name__)

COMMANDS = ("norm-check", "ko-check", "solve-1d", "solve-radial", "solve-2d", "asymptotics", "uniqueness")
TOP_LEVEL_FIELDS = {"command", "problem", "output_dir", "seed"}

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

_EUCLIDEAN = {"family": "euclidean", "params": {}, "dim": 2}
_PLANAR = {
    'domain': {'type': 'shape', 'required': True},
    'norm': {'type': 'dict', 'default': _EUCLIDEAN},
    'nonlinearity': {'type': 'dict', 'required': True},
}

PROBLEM_SCHEMAS: Dict[str, Dict[str, Dict[str, Any]]] = {
    'norm-check': {
        'norm': {'type': 'dict', 'required': True},
        'samples': {'type': 'int', 'min': 1, 'default': 1000},
    },
    'ko-check': {
        'nonlinearity': {'type': 'dict', 'required': True},
        'p': {'type': 'float', 'min': 2.0},
    },
    'solve-1d': {
        'a': {'type': 'float', 'default': 0.0},
        'b': {'type': 'float', 'default': 1.0},
        'gamma': {'type': 'float', 'min': 1e-12, 'default': 1.0},
        'nonlinearity': {'type': 'dict', 'required': True},
        'points': {'type': 'int', 'min': 3, 'default': 201},
        'margins': {'type': 'list', 'default': [1e-1, 1e-2, 1e-3]},
    },
    'solve-radial': {
        'shape': {'type': 'str', 'enum': ['annulus', 'ball'], 'default': 'annulus'},
        'R1': {'type': 'float', 'min': 1e-12, 'default': 1.0},
        'R2': {'type': 'float', 'min': 1e-12, 'default': 2.0},
        'R': {'type': 'float', 'min': 1e-12, 'default': 1.0},
        'dim': {'type': 'int', 'min': 2, 'default': 2},
        'norm': {'type': 'dict', 'default': {"family": "euclidean", "params": {}}},
        'nonlinearity': {'type': 'dict', 'required': True},
        'asym_range': {'type': 'list', 'default': [1e-4, 1e-3]},
    },
    'solve-2d': {
        **_PLANAR,
        'h': {'type': 'float', 'min': 1e-6, 'default': 1.0 / 64},
        'boundary': {'type': 'boundary', 'default': 'large'},
        'k_schedule': {'type': 'list'},
    },
    'asymptotics': {
        **_PLANAR,
        'h': {'type': 'float', 'min': 1e-6, 'default': 1.0 / 128},
        'bands': {'type': 'list', 'default': [[0.05, 0.1]]},
        'ratio_range': {'type': 'list', 'default': [0.85, 1.15]},
    },
    'uniqueness': {
        **_PLANAR,
        'h': {'type': 'float', 'min': 1e-6, 'default': 1.0 / 64},
        'tolerance': {'type': 'float', 'min': 0.0, 'default': 0.03},
    },
}

_TYPE_CHECKS: Dict[str, Callable[[Any], bool]] = {
    'str': lambda v: isinstance(v, str),
    'int': lambda v: isinstance(v, int) and not isinstance(v, bool),
    'float': lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    'dict': lambda v: isinstance(v, dict),
    'list': lambda v: isinstance(v, list),
    'shape': lambda v: isinstance(v, (dict, list)),
    'boundary': lambda v: v == 'large' or (isinstance(v, (int, float)) and not isinstance(v, bool) and v >= 0),
}


def validate_problem(command: str, problem: Dict[str, Any]) -> Dict[str, Any]:
    """按命令的 schema 校验 problem 并补全默认值；未知字段视为错误"""
    schema = PROBLEM_SCHEMAS[command]
    errors = [f"未知字段 problem.{key}" for key in problem if key not in schema]
    resolved: Dict[str, Any] = {}
    for key, rule in schema.items():
        if key not in problem:
            if rule.get('required', False):
                errors.append(f"缺少必需字段 problem.{key}")
            elif 'default' in rule:
                resolved[key] = json.loads(json.dumps(rule['default']))
            continue
        value = problem[key]
        if not _TYPE_CHECKS[rule['type']](value):
            errors.append(f"problem.{key} 应为 {rule['type']} 类型，实际为 {value!r}")
            continue
        if 'min' in rule and value < rule['min']:
            errors.append(f"problem.{key} 值 {value} 小于最小值 {rule['min']}")
            continue
        if 'enum' in rule and value not in rule['enum']:
            errors.append(f"problem.{key} 值 '{value}' 不在允许的选项中: {rule['enum']}")
            continue
        resolved[key] = value
    if errors:
        raise ConfigValidationError("; ".join(errors))
    return resolved


def canonical_hash(data: Dict[str, Any]) -> str:
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


@dataclass(frozen=True)
class RunConfig:
    command: str
    problem: Dict[str, Any]
    output_dir: str
    seed: int = 0

    @classmethod
    def from_dict(cls, data: Any, command: Optional[str] = None, output_dir: Optional[str] = None,
                  seed: Optional[int] = None) -> "RunConfig":
        """命令行参数优先于文件中的 command/output_dir/seed"""
        if not isinstance(data, dict):
            raise ConfigValidationError("运行配置必须是 JSON 对象")
        unknown = sorted(set(data) - TOP_LEVEL_FIELDS)
        if unknown:
            raise ConfigValidationError(f"未知的顶层字段: {unknown}")
        file_command = data.get("command")
        if command is not None and file_command is not None and file_command != command:
            raise ConfigValidationError(f"配置中的 command '{file_command}' 与命令行 '{command}' 不一致")
        command = command or file_command
        if command not in COMMANDS:
            raise ConfigValidationError(f"未知命令 '{command}'，可选: {list(COMMANDS)}")
        if "problem" not in data:
            raise ConfigValidationError("缺少必需字段 problem")
        if not isinstance(data["problem"], dict):
            raise ConfigValidationError("problem 必须是 JSON 对象")
        file_seed = data.get("seed", 0)
        if not isinstance(file_seed, int) or isinstance(file_seed, bool):
            raise ConfigValidationError(f"seed 必须是整数，实际为 {file_seed!r}")
        out = output_dir or data.get("output_dir")
        if not out:
            raise ConfigValidationError("缺少输出目录 (--out 或 output_dir)")
        return cls(command, validate_problem(command, data["problem"]), str(out),
                   file_seed if seed is None else seed)


@dataclass
class RunContext:
    out: Path
    seed: int
    grid: Optional[float] = None
    k_max: Optional[float] = None
    checks: Dict[str, bool] = field(default_factory=dict)
    artifacts: List[str] = field(default_factory=list)

    def write_csv(self, name: str, header: Sequence[str], rows) -> Path:
        path = self.out / name
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(header)
            for row in rows:
                writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        self.artifacts.append(name)
        return path

    def write_json(self, name: str, data: Any) -> Path:
        path = self.out / name
        path.write_text(json.dumps(data, indent=2, ensure_ascii=False, default=_json_default), encoding='utf-8')
        self.artifacts.append(name)
        return path


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.bool_):
        return bool(value)
    raise TypeError(f"无法序列化 {type(value).__name__}")


# ---------------------------------------------------------------- commands

def _planar_problem(problem: Dict[str, Any], g) -> DirichletProblem:
    norm = norm_from_config(problem['norm'])
    nl = nonlinearity_from_config(problem['nonlinearity'])
    return DirichletProblem(Domain2D.from_config(problem['domain']), norm, nl, g=g)


def run_norm_check(problem: Dict[str, Any], ctx: RunContext):
    norm = norm_from_config(problem['norm'])
    dual = DualEvaluator(norm)
    report = verify_minkowski(norm, problem['samples'], seed=ctx.seed, dual=dual)
    bounds = theta_bounds(norm)
    data = report.to_dict()
    data["theta"] = [bounds.theta1, bounds.theta2]
    data["norm"] = norm.to_config()
    ctx.write_json("norm_report.json", data)
    for check in report.checks:
        if not check.informational:
            ctx.checks[check.name] = bool(check.passed)


def run_ko_check(problem: Dict[str, Any], ctx: RunContext):
    nl = nonlinearity_from_config(problem['nonlinearity'], problem.get('p'))
    report = ko_report(nl)
    ctx.write_json("ko_report.json", report)
    ctx.checks["classified"] = report["osgood"] != "inconclusive"
    if isinstance(nl, PowerNonlinearity) and nl.ko_holds:
        K, a = nl.psi_constant()
        worst = max(abs(psi(nl, t) / (K * t ** (-a)) - 1.0) for t in (0.1, 1.0, 10.0))
        ctx.checks["psi_closed_form"] = worst <= 1e-6


def run_solve_1d(problem: Dict[str, Any], ctx: RunContext):
    nl = nonlinearity_from_config(problem['nonlinearity'])
    prob = Interval1DProblem(problem['a'], problem['b'], problem['gamma'], nl)
    sol = solve_interval(prob)
    profile = cached_profile(nl)
    xs = np.linspace(prob.a, prob.b, problem['points'] + 2)[1:-1]
    rows = []
    for x in xs:
        u = sol.evaluate(float(x))
        delta = prob.distance(float(x))
        ratio = prob.gamma * profile.psi(u) / delta if u > 0 else math.nan
        rows.append((float(x), float(u), float(delta), float(ratio)))
    ctx.write_csv("solution.csv", ["x", "u", "delta", "psi_ratio"], rows)

    margins = [float(m) for m in problem['margins'] if 0 < m < prob.half_width]
    report: Dict[str, Any] = {"v0": sol.v0, "c_m": sol.c_m, "flat_zone": sol.flat_zone}
    if margins and sol.flat_zone is None:
        asym = asym_check_1d(sol, margins)
        report["asymptotics"] = [row.to_dict() for row in asym]
        smallest = min(asym, key=lambda row: row.delta)
        ctx.checks["asymptotic_ratio"] = smallest.deviation <= 0.01
    if sol.flat_zone is None:
        residual = ode_residual_1d(sol, residual_points(prob))
        report["max_ode_residual"] = float(residual.max())
        ctx.checks["ode_residual"] = bool(residual.max() <= 1e-3)
    ctx.checks["convex"] = is_convex(sol, xs)
    ctx.write_json("solution_report.json", report)


def run_solve_radial(problem: Dict[str, Any], ctx: RunContext):
    nl = nonlinearity_from_config(problem['nonlinearity'])
    profile = cached_profile(nl)
    if problem['shape'] == 'annulus':
        norm = norm_from_config({"dim": problem['dim'], **problem['norm']})
        if norm.dim != problem['dim']:
            raise ConfigValidationError(f"norm 的维数 {norm.dim} 与 dim={problem['dim']} 不一致")
        prob = AnnulusProblem(np.zeros(problem['dim']), problem['R1'], problem['R2'], norm, nl, problem['dim'])
        radial = solve_annulus_large(prob)
        distance = radial.grid - radial.inner
    else:
        radial = solve_ball_large(problem['R'], problem['dim'], nl.p, nl)
        distance = radial.outer - radial.grid

    rows = []
    for t, w, d in zip(radial.grid, radial.values, distance):
        ratio = profile.psi(w) / d if d > 0 and w > 0 else math.nan
        rows.append((float(t), float(w), float(ratio)))
    ctx.write_csv("profile.csv", ["t", "w", "psi_ratio"], rows)

    report: Dict[str, Any] = {"shape": problem['shape'], "ks": list(radial.ks),
                              "interior_converged": radial.interior_converged}
    energy = energy_identity_check(radial, nl)
    report["energy_identity"] = energy
    ctx.checks["energy_identity"] = bool(energy["passed"])
    if problem['shape'] == 'annulus':
        lo, hi = problem['asym_range']
        rows = [(o, r) for o, r in annulus_asym_check(radial, nl, nl.p, max_offset=hi) if o >= lo]
        report["asymptotics"] = [{"offset": o, "ratio": r} for o, r in rows]
        ctx.checks["asymptotic_ratio"] = bool(rows) and all(0.95 <= r <= 1.05 for _, r in rows)
    ctx.write_json("profile_report.json", report)


def _write_field(ctx: RunContext, field_) -> None:
    ctx.write_csv("field.csv", ["x", "y", "u"], field_.rows())


def _write_distance_field(ctx: RunContext, prob: DirichletProblem, h: float) -> None:
    rows = prob.distance_field.raster(h)
    ctx.write_csv("distance_field.csv", ["x", "y", "delta"], rows)
    ctx.checks["distance_positive"] = bool(rows) and all(d > 0 for _, _, d in rows)


def run_solve_2d(problem: Dict[str, Any], ctx: RunContext):
    h = ctx.grid or problem['h']
    boundary = problem['boundary']
    if boundary == 'large':
        prob = _planar_problem(problem, None)
        _write_distance_field(ctx, prob, h)
        sol = monotone_large_solution(prob, h, problem.get('k_schedule'), ctx.k_max)
        _write_field(ctx, sol.limit)
        ctx.checks["monotone_in_k"] = sol.is_increasing()
        ctx.checks["barrier"] = sol.barrier_violations == 0
        ctx.write_json("solve_report.json", {
            "h": h, "ks": sol.ks, "interior_converged": sol.interior_converged,
            "energy": sol.limit.energy, "residual": sol.limit.residual,
            "barrier_violations": sol.barrier_violations,
        })
    else:
        prob = _planar_problem(problem, float(boundary))
        _write_distance_field(ctx, prob, h)
        result = solve_dirichlet(prob, h)
        _write_field(ctx, result)
        ctx.checks["residual"] = result.residual <= 1e-6
        ctx.write_json("solve_report.json", {"h": h, "g": float(boundary), "energy": result.energy,
                                              "residual": result.residual, "iterations": result.iterations})


def run_asymptotics(problem: Dict[str, Any], ctx: RunContext):
    h = ctx.grid or problem['h']
    prob = _planar_problem(problem, None)
    _write_distance_field(ctx, prob, h)
    sol = monotone_large_solution(prob, h, k_max=ctx.k_max)
    _write_field(ctx, sol.limit)
    bands = boundary_asym_check(sol, prob.distance_field, problem['bands'])
    ctx.write_csv("asymptotics.csv",
                  ["lower", "upper", "count", "min_ratio", "max_ratio", "median_ratio", "median_ratio_euclidean"],
                  [(b.lower, b.upper, b.count, b.min_ratio, b.max_ratio, b.median_ratio, b.median_ratio_euclidean)
                   for b in bands])
    lo, hi = problem['ratio_range']
    filled = [b for b in bands if b.count > 0]
    ctx.checks["ratios_positive"] = bool(filled) and all(b.min_ratio > 0 for b in filled)
    ctx.checks["band_median_in_range"] = bool(filled) and all(lo <= b.median_ratio <= hi for b in filled)
    if prob.norm.family != "euclidean":
        ctx.checks["closer_than_euclidean"] = bool(filled) and all(
            abs(b.median_ratio - 1.0) < abs(b.median_ratio_euclidean - 1.0) for b in filled)


def run_uniqueness(problem: Dict[str, Any], ctx: RunContext):
    h = ctx.grid or problem['h']
    prob = _planar_problem(problem, None)
    report = uniqueness_check(prob, h, tolerance=problem['tolerance'])
    ctx.write_json("uniqueness.json", report.to_dict())
    ctx.checks["schemes_agree"] = report.passed


HANDLERS: Dict[str, Callable[[Dict[str, Any], RunContext], None]] = {
    "norm-check": run_norm_check,
    "ko-check": run_ko_check,
    "solve-1d": run_solve_1d,
    "solve-radial": run_solve_radial,
    "solve-2d": run_solve_2d,
    "asymptotics": run_asymptotics,
    "uniqueness": run_uniqueness,
}


# ---------------------------------------------------------------- entry

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finsler", description="Finsler p-Laplacian 爆破解的构造与验证")
    parser.add_argument('command', choices=COMMANDS, help='要执行的命令')
    parser.add_argument('--config', required=True, help='JSON 运行配置路径')
    parser.add_argument('--out', required=True, help='产物输出目录')
    parser.add_argument('--seed', type=int, help='抽样验证的随机种子（覆盖配置）')
    parser.add_argument('--grid', type=float, help='二维网格步长 h（覆盖配置）')
    parser.add_argument('--k-max', type=float, dest='k_max', help='单调 k 序列的上限')
    parser.add_argument('--eps-schedule', dest='eps_schedule',
                        help='逗号分隔的 ε 连续化序列，例如 1e-2,1e-4,0')
    parser.add_argument('--debug', action='store_true', help='启用调试日志')
    parser.add_argument('--version', action='version', version=f"finsler {__version__}")
    return parser


def _parse_eps_schedule(raw: str) -> List[float]:
    try:
        values = [float(v) for v in raw.split(',') if v.strip()]
    except ValueError as e:
        raise ConfigValidationError(f"无法解析 --eps-schedule '{raw}'") from e
    if not values or any(v < 0 for v in values):
        raise ConfigValidationError("--eps-schedule 需要非负数列")
    return values


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.debug:
        logging.getLogger().setLevel(logging.DEBUG)
        logger.debug("调试模式已启用")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    monitor = get_performance_monitor()
    monitor.reset()
    manifest: Dict[str, Any] = {
        "command": args.command,
        "version": __version__,
        "seed": args.seed if args.seed is not None else 0,
        "config_path": str(args.config),
        "input_hash": None,
        "started_at": datetime.now().isoformat(timespec='seconds'),
        "checks": {},
        "artifacts": [],
        "error": None,
    }
    ctx = RunContext(out, manifest["seed"], args.grid, args.k_max)
    exit_code = EXIT_OK
    try:
        try:
            data = json.loads(Path(args.config).read_text(encoding='utf-8'))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigValidationError(f"无法读取运行配置 {args.config}: {e}") from e
        manifest["input_hash"] = canonical_hash(data)
        run = RunConfig.from_dict(data, args.command, args.out, args.seed)
        manifest["seed"] = ctx.seed = run.seed
        if args.eps_schedule:
            update_config_value('pde.eps_schedule', _parse_eps_schedule(args.eps_schedule))
        logger.info(f"运行 {run.command} (seed={run.seed})，输出目录 {out}")
        HANDLERS[run.command](run.problem, ctx)
    except (ConfigValidationError, InvalidNormError) as e:
        logger.error(f"配置错误: {e}")
        manifest["error"] = {"type": type(e).__name__, "message": str(e)}
        exit_code = EXIT_CONFIG
    except NotStabilizedError as e:
        logger.warning(f"单调序列未稳定: {e}")
        manifest["error"] = {"type": type(e).__name__, "message": str(e)}
        exit_code = EXIT_FAILURE
    except FinslerError as e:
        logger.error(f"求解失败: {e}")
        manifest["error"] = {"type": type(e).__name__, "message": str(e)}
        exit_code = EXIT_FAILURE
    except Exception as e:
        logger.exception("运行出错")
        manifest["error"] = {"type": type(e).__name__, "message": str(e)}
        exit_code = EXIT_FAILURE
    finally:
        manifest["checks"] = dict(ctx.checks)
        manifest["passed"] = exit_code == EXIT_OK and all(ctx.checks.values())
        manifest["artifacts"] = list(ctx.artifacts)
        manifest["exit_code"] = exit_code
        manifest["timings"] = monitor.get_summary()
        (out / "manifest.json").write_text(
            json.dumps(manifest, indent=2, ensure_ascii=False, default=_json_default), encoding='utf-8')

    status = "✅" if manifest["passed"] else "❌"
    print(f"{status} {args.command}: exit {exit_code}, 检查 {sum(ctx.checks.values())}/{len(ctx.checks)} 通过")
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
