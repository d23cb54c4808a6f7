"""
Comprehensive Integration Test Suite
全面的集成测试套件：从范数验证到二维求解的端到端快速检查
"""

import logging
import math
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

# Configure logging for testing
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


class FinslerIntegrationTest:
    """Finsler 爆破解集成测试类"""

    def __init__(self):
        self.test_results = []
        self.start_time = time.time()

    def run_all_tests(self):
        """运行所有集成测试"""
        print("=" * 60)
        print("FINSLER 集成测试套件")
        print("=" * 60)

        tests = [
            ("配置验证系统", self.test_config_validation),
            ("缓存与性能监控", self.test_cache_and_monitor),
            ("范数公理验证", self.test_norm_suite),
            ("KO 判别网格", self.test_ko_grid),
            ("Ψ 闭式对照", self.test_psi_closed_form),
            ("一维边界渐近", self.test_interval_asymptotics),
            ("(A2) 平坦区", self.test_flat_zone),
            ("环形区域渐近", self.test_annulus_asymptotics),
            ("制造解精确性", self.test_manufactured_solution),
        ]

        for test_name, test_func in tests:
            self.run_single_test(test_name, test_func)

        self.print_final_results()
        return all(success for _, success, _, _ in self.test_results)

    def run_single_test(self, test_name: str, test_func):
        """运行单个测试"""
        print(f"\n🧪 测试: {test_name}")
        print("-" * 40)

        start_time = time.time()
        try:
            result = test_func()
            duration = time.time() - start_time

            if result:
                print(f"✅ {test_name}: PASSED ({duration:.3f}s)")
                self.test_results.append((test_name, True, duration, None))
            else:
                print(f"❌ {test_name}: FAILED ({duration:.3f}s)")
                self.test_results.append((test_name, False, duration, "Test returned False"))

        except Exception as e:
            duration = time.time() - start_time
            print(f"💥 {test_name}: ERROR ({duration:.3f}s) - {e}")
            self.test_results.append((test_name, False, duration, str(e)))

    def test_config_validation(self) -> bool:
        """测试配置验证系统"""
        from .config import Config

        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "bad.yaml"
            path.write_text("pde:\n  max_iterations: -5\n  layer_width: 3.0\n", encoding='utf-8')
            cfg = Config(str(path), use_env=False)
            report = cfg.get_validation_report()
            print(f"  错误: {len(report['errors'])}, 警告: {len(report['warnings'])}")
            if cfg.is_valid():
                print("  ❌ 非法的 max_iterations 未被识别")
                return False
            if cfg.get('pde.max_iterations') != 100:
                print("  ❌ 非法值没有回退到默认值")
                return False
            print(f"  ✓ 回退后 pde.max_iterations = {cfg.get('pde.max_iterations')}")
        return True

    def test_cache_and_monitor(self) -> bool:
        """测试记忆化缓存与性能监控"""
        from .cache import MemoCache
        from .performance_monitor import PerformanceMonitor

        cache = MemoCache(max_size=2, name="integration")
        calls = []
        for key in ("a", "b", "a", "c", "b"):
            cache.get_or_compute(key, lambda k=key: calls.append(k) or k.upper())
        stats = cache.get_stats()
        print(f"  缓存统计: {stats}")
        if len(cache) != 2 or stats['evictions'] < 1 or stats['hits'] < 1:
            return False

        monitor = PerformanceMonitor()
        with monitor.track("integration.solve") as info:
            info['iterations'] = 3
        summary = monitor.get_summary()["integration.solve"]
        print(f"  监控汇总: {summary}")
        return summary['calls'] == 1 and summary['iterations'] == 3 and summary['success_rate'] == 1.0

    def test_norm_suite(self) -> bool:
        """测试范数族的公理检查"""
        from .norms import (BlockPQNorm, EuclideanNorm, LambdaMuNorm, LinearMapNorm, QNorm, RandersNorm,
                            Scaled1DNorm, verify_minkowski)

        valid = [
            EuclideanNorm(2),
            LinearMapNorm(A=np.diag([2.0, 1.0])),
            LambdaMuNorm(lam=1.0, mu=1.0, n=2),
            BlockPQNorm(q=2.0, sizes=(1, 1), exponents=(2.0, 2.0), weights=(1.0, 3.0)),
            Scaled1DNorm(gamma=3.0),
            RandersNorm(T=np.array([0.3, 0.1])),
        ]
        for norm in valid:
            report = verify_minkowski(norm, 1000, seed=1)
            failed = [c.name for c in report.checks if not c.passed and not c.informational]
            print(f"  {norm.family}: {'✓' if not failed else '✗'} {failed}")
            if failed:
                return False

        degenerate = verify_minkowski(QNorm(q=4.0, n=2), 200, seed=1)
        convexity = degenerate.check("strong_convexity")
        print(f"  qnorm q=4 强凸性: passed={convexity.passed}, 最小特征值 {convexity.worst_residual:.3e}")
        return not convexity.passed

    def test_ko_grid(self) -> bool:
        """测试 f = t^q 的 (KO) 判别网格"""
        from .nonlinearity import PowerNonlinearity

        for p in (2.0, 2.5, 3.0, 4.0):
            for q in (p - 1.2, p - 1.0, p - 0.8, 2.0 * p):
                nl = PowerNonlinearity(q, p)
                if nl.ko_holds != (q > p - 1.0):
                    print(f"  ❌ p={p}, q={q}: ko_holds={nl.ko_holds}")
                    return False
        print("  ✓ 16 个 (p, q) 组合的判别全部正确")
        return True

    def test_psi_closed_form(self) -> bool:
        """测试 Ψ 的数值积分与闭式一致"""
        from .nonlinearity import PowerNonlinearity, psi

        cases = [(2.0, 3.0, 2.0, math.sqrt(2.0) / 2.0), (3.0, 5.0, 1.0, 4.0 ** (1.0 / 3.0))]
        for p, q, r, expected in cases:
            value = psi(PowerNonlinearity(q, p), r)
            print(f"  p={p}, q={q}: Ψ({r}) = {value:.10f}，期望 {expected:.10f}")
            if abs(value - expected) > 1e-7 * expected:
                return False
        return True

    def test_interval_asymptotics(self) -> bool:
        """测试一维爆破解在端点处 γΨ(u)/δ → 1"""
        from .nonlinearity import PowerNonlinearity
        from .ode1d import Interval1DProblem, asym_check_1d, solve_interval

        for gamma in (1.0, 2.0):
            sol = solve_interval(Interval1DProblem(0.0, 1.0, gamma, PowerNonlinearity(3.0, 2.0)))
            row = asym_check_1d(sol, [1e-3])[0]
            print(f"  γ={gamma}: 左 {row.ratio_left:.6f}, 右 {row.ratio_right:.6f}")
            if row.deviation > 0.01:
                return False
        return True

    def test_flat_zone(self) -> bool:
        """测试 (A2) 非线性在宽区间上的平坦区"""
        from .nonlinearity import PowerSumNonlinearity
        from .ode1d import Interval1DProblem, collar_length, solve_interval

        nl = PowerSumNonlinearity([[1.0, 0.5], [1.0, 3.0]], 2.0)
        unit = Interval1DProblem(0.0, 1.0, 1.0, nl)
        L = collar_length(unit)
        if L is None:
            print("  ❌ 期望 (A2) 但 L 不存在")
            return False
        prob = Interval1DProblem(0.0, 2.0 * L + 1.0, 1.0, nl)
        sol = solve_interval(prob)
        print(f"  L = {L:.8f}, 平坦区 {sol.flat_zone}")
        lo, hi = sol.flat_zone
        return (abs(lo - L) < 1e-12 and abs(hi - (L + 1.0)) < 1e-12
                and sol.evaluate(prob.center) == 0.0 and sol.evaluate(0.5 * L) > 0.0)

    def test_annulus_asymptotics(self) -> bool:
        """测试环形区域径向爆破解的内边界渐近"""
        from .nonlinearity import PowerNonlinearity
        from .norms import EuclideanNorm
        from .radial import AnnulusProblem, annulus_asym_check, solve_annulus_large

        nl = PowerNonlinearity(3.0, 2.0)
        profile = solve_annulus_large(AnnulusProblem(np.zeros(2), 1.0, 2.0, EuclideanNorm(2), nl))
        rows = [(o, r) for o, r in annulus_asym_check(profile, nl, 2.0, max_offset=1e-3) if o >= 1e-4]
        ratios = [r for _, r in rows]
        print(f"  k 上限 {profile.k_ceiling:.3g}, {len(rows)} 个检验点, 比值范围 "
              f"[{min(ratios):.5f}, {max(ratios):.5f}]")
        return bool(rows) and all(0.95 <= r <= 1.05 for r in ratios) and profile.is_decreasing()

    def test_manufactured_solution(self) -> bool:
        """测试二维格式对二次制造解精确"""
        from .pde import QUADRATIC, solve_dirichlet

        prob = QUADRATIC.problem()
        field = solve_dirichlet(prob, 1.0 / 16)
        free = field.grid.free
        error = float(np.max(np.abs(field.values[free] - QUADRATIC.exact(field.grid.points[free]))))
        print(f"  h=1/16: {field.grid.free_count} 个未知量, L∞ 误差 {error:.3e}")
        return error <= 1e-8

    def print_final_results(self):
        """打印最终测试结果"""
        total_time = time.time() - self.start_time

        print("\n" + "=" * 60)
        print("测试结果总结")
        print("=" * 60)

        passed = sum(1 for _, success, _, _ in self.test_results if success)
        total = len(self.test_results)

        print(f"总测试数: {total}")
        print(f"通过数: {passed}")
        print(f"失败数: {total - passed}")
        print(f"成功率: {passed / total * 100:.1f}%")
        print(f"总耗时: {total_time:.3f}s")

        print("\n详细结果:")
        for name, success, duration, error in self.test_results:
            status = "✅ PASS" if success else "❌ FAIL"
            print(f"  {status} {name} ({duration:.3f}s)")
            if error and not success:
                print(f"      错误: {error}")

        if passed == total:
            print("\n🎉 所有测试通过! Finsler 求解链路验证成功!")
        else:
            print(f"\n⚠️  有 {total - passed} 个测试失败，需要检查相关模块。")

        print("=" * 60)


@pytest.mark.slow
def test_integration_suite():
    assert FinslerIntegrationTest().run_all_tests()


def main():
    """主测试函数"""
    tester = FinslerIntegrationTest()
    return 0 if tester.run_all_tests() else 1


if __name__ == "__main__":
    raise SystemExit(main())
