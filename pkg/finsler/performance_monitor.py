"""
Finsler 性能监控模块
记录求解器调用的耗时、迭代次数与成功率
"""

import logging
import time
from collections import defaultdict, deque
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List

logger = logging.getLogger(__name__)


class PerformanceMonitor:
    """性能监控器"""

    def __init__(self, max_records: int = 5000):
        self.solver_calls = deque(maxlen=max_records)

    def record_call(self, name: str, duration: float, success: bool, iterations: int = 0):
        """记录一次求解器调用"""
        self.solver_calls.append({
            'timestamp': time.time(),
            'name': name,
            'duration': duration,
            'success': success,
            'iterations': iterations,
        })

    @contextmanager
    def track(self, name: str) -> Iterator[Dict[str, Any]]:
        """计时上下文；调用方可在 info['iterations'] 中回填迭代数"""
        info: Dict[str, Any] = {'iterations': 0}
        start = time.perf_counter()
        success = False
        try:
            yield info
            success = True
        finally:
            duration = time.perf_counter() - start
            self.record_call(name, duration, success, info.get('iterations', 0))
            logger.debug(f"{name} 耗时 {duration:.3f}s，迭代 {info.get('iterations', 0)}")

    def get_summary(self) -> Dict[str, Dict[str, Any]]:
        """按求解器名称汇总"""
        grouped: Dict[str, List[Dict[str, Any]]] = defaultdict(list)
        for call in self.solver_calls:
            grouped[call['name']].append(call)

        summary = {}
        for name, calls in grouped.items():
            total = sum(c['duration'] for c in calls)
            summary[name] = {
                'calls': len(calls),
                'total_duration': round(total, 6),
                'average_duration': round(total / len(calls), 6),
                'success_rate': sum(1 for c in calls if c['success']) / len(calls),
                'iterations': sum(c['iterations'] for c in calls),
            }
        return summary

    def generate_performance_report(self) -> str:
        """生成性能报告"""
        report = "📊 Finsler 求解器性能报告\n"
        report += "=" * 50 + "\n"
        summary = self.get_summary()
        if not summary:
            report += "  无调用记录\n"
        for name, stats in sorted(summary.items()):
            report += (f"  {name}: {stats['calls']} 次, 共 {stats['total_duration']:.3f}s, "
                       f"成功率 {stats['success_rate'] * 100:.1f}%, 迭代 {stats['iterations']}\n")
        report += "=" * 50
        return report

    def reset(self):
        self.solver_calls.clear()


# 全局性能监控器实例
_performance_monitor = None


def get_performance_monitor() -> PerformanceMonitor:
    """获取全局性能监控器实例"""
    global _performance_monitor
    if _performance_monitor is None:
        _performance_monitor = PerformanceMonitor()
    return _performance_monitor
