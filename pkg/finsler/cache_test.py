import numpy as np
import pytest

from .cache import MemoCache, array_key
from .performance_monitor import PerformanceMonitor, get_performance_monitor


def test_array_key_is_stable_and_distinguishes_values():
    a = np.array([1.0, 2.0])
    assert array_key(a, "x") == array_key(np.array([1.0, 2.0]), "x")
    assert array_key(a, "x") != array_key(np.array([1.0, 2.5]), "x")
    assert array_key(1.0) != array_key("1.0")


def test_insert_once_keeps_first_value():
    cache = MemoCache(max_size=4)
    assert cache.put("k", 1) == 1
    assert cache.put("k", 2) == 1
    assert cache.get("k") == 1


def test_lru_eviction_and_stats():
    cache = MemoCache(max_size=2, name="t")
    cache.put("a", 1)
    cache.put("b", 2)
    cache.get("a")
    cache.put("c", 3)
    assert cache.get("b") is None
    assert cache.get("a") == 1
    stats = cache.get_stats()
    assert stats['evictions'] == 1
    assert stats['size'] == 2
    assert 0.0 < stats['hit_rate'] < 1.0


def test_get_or_compute_calls_once():
    cache = MemoCache()
    calls = []

    def compute():
        calls.append(1)
        return 42.0

    assert cache.get_or_compute("x", compute) == 42.0
    assert cache.get_or_compute("x", compute) == 42.0
    assert len(calls) == 1


def test_zero_size_cache_never_stores():
    cache = MemoCache(max_size=0)
    cache.put("a", 1)
    assert len(cache) == 0


def test_monitor_records_failures():
    monitor = PerformanceMonitor()
    with monitor.track("ok") as info:
        info['iterations'] = 5
    with pytest.raises(RuntimeError):
        with monitor.track("bad"):
            raise RuntimeError("boom")
    summary = monitor.get_summary()
    assert summary["ok"]["iterations"] == 5
    assert summary["bad"]["success_rate"] == 0.0
    assert "ok" in monitor.generate_performance_report()
    monitor.reset()
    assert monitor.get_summary() == {}


def test_global_monitor_is_singleton():
    assert get_performance_monitor() is get_performance_monitor()
