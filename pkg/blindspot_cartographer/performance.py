"""
Performance instrumentation for the blind-spot pipeline
Timing decorator and a profiler that the CLI summarises with --profile
"""

import threading
import time
from contextlib import contextmanager
from functools import wraps
from typing import Any, Dict, Iterator, List, Tuple

from .utils.log import get_logger

logger = get_logger(__name__)

SLOW_CALL_SECONDS = 0.5


class PerformanceProfiler:
    """Collects wall-clock timings per operation name; safe to share across worker threads"""

    def __init__(self, keep_last: int = 1000):
        self.keep_last = keep_last
        self.timings: Dict[str, List[float]] = {}
        self.call_counts: Dict[str, int] = {}
        self._lock = threading.Lock()

    def time_function(self, func_name: str, duration: float):
        """Record timing for a function"""
        with self._lock:
            if func_name not in self.timings:
                self.timings[func_name] = []
                self.call_counts[func_name] = 0

            self.timings[func_name].append(duration)
            self.call_counts[func_name] += 1

            # Keep only recent timings
            if len(self.timings[func_name]) > self.keep_last:
                self.timings[func_name] = self.timings[func_name][-self.keep_last // 2:]

    @contextmanager
    def measure(self, func_name: str) -> Iterator[None]:
        start = time.perf_counter()
        try:
            yield
        finally:
            self.time_function(func_name, time.perf_counter() - start)

    def get_stats(self) -> Dict[str, Dict[str, Any]]:
        """Get performance statistics"""
        stats = {}
        with self._lock:
            for func_name, timings in self.timings.items():
                if timings:
                    stats[func_name] = {
                        'call_count': self.call_counts[func_name],
                        'avg_time': sum(timings) / len(timings),
                        'max_time': max(timings),
                        'min_time': min(timings),
                        'total_time': sum(timings),
                    }
        return stats

    def get_slowest_functions(self, limit: int = 5) -> List[Tuple[str, Dict[str, Any]]]:
        """Get the slowest functions by average time"""
        stats = self.get_stats()
        sorted_funcs = sorted(stats.items(),
                              key=lambda x: x[1]['avg_time'],
                              reverse=True)
        return sorted_funcs[:limit]

    def reset(self):
        with self._lock:
            self.timings.clear()
            self.call_counts.clear()


# Global profiler instance
profiler = PerformanceProfiler()


def performance_monitor(func):
    """Decorator that feeds the global profiler and logs slow calls"""
    name = f"{func.__module__.rsplit('.', 1)[-1]}.{func.__name__}"

    @wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.perf_counter()
        try:
            return func(*args, **kwargs)
        except Exception as e:
            duration = time.perf_counter() - start_time
            logger.debug("%s failed after %.3fs: %s", name, duration, e)
            raise
        finally:
            duration = time.perf_counter() - start_time
            profiler.time_function(name, duration)
            if duration > SLOW_CALL_SECONDS:
                logger.debug("%s took %.3fs", name, duration)

    return wrapper
