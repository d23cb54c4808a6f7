"""
Memoization Cache
线程安全的有界 LRU 缓存，条目只写入一次
"""

import hashlib
import logging
from collections import OrderedDict
from threading import Lock
from typing import Any, Callable, Dict, Hashable, Optional

import numpy as np

logger = logging.getLogger(__name__)


def array_key(*parts: Any) -> str:
    """把数组/标量参数转换成稳定的缓存键"""
    digest = hashlib.md5()
    for part in parts:
        if isinstance(part, np.ndarray):
            digest.update(np.ascontiguousarray(part, dtype=float).tobytes())
        else:
            digest.update(repr(part).encode('utf-8'))
        digest.update(b'|')
    return digest.hexdigest()


class MemoCache:
    """有界 LRU 记忆化缓存（insert-once 语义）"""

    def __init__(self, max_size: int = 20000, name: str = "memo"):
        self.max_size = max_size
        self.name = name
        self._data: "OrderedDict[Hashable, Any]" = OrderedDict()
        self._lock = Lock()
        self.stats = {
            'hits': 0,
            'misses': 0,
            'evictions': 0,
        }

    def get(self, key: Hashable) -> Optional[Any]:
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
                self.stats['hits'] += 1
                return self._data[key]
            self.stats['misses'] += 1
            return None

    def put(self, key: Hashable, value: Any) -> Any:
        """写入条目；已存在时保留旧值并返回它"""
        if self.max_size <= 0:
            return value
        with self._lock:
            if key in self._data:
                return self._data[key]
            self._data[key] = value
            while len(self._data) > self.max_size:
                self._data.popitem(last=False)
                self.stats['evictions'] += 1
            return value

    def get_or_compute(self, key: Hashable, compute: Callable[[], Any]) -> Any:
        cached = self.get(key)
        if cached is not None:
            return cached
        # 计算在锁外进行，并发写入时以先到者为准
        return self.put(key, compute())

    def clear(self):
        with self._lock:
            self._data.clear()

    def __len__(self) -> int:
        return len(self._data)

    def get_stats(self) -> Dict[str, Any]:
        """获取缓存统计"""
        total = self.stats['hits'] + self.stats['misses']
        return {
            'name': self.name,
            'size': len(self._data),
            'max_size': self.max_size,
            'hit_rate': self.stats['hits'] / total if total else 0.0,
            **self.stats,
        }
