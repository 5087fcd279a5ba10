"""
CamoFlow Performance Monitoring

Wall-time and throughput accounting for training and inference:
- StageTiming: per-stage call count, time range and images processed
- PerformanceMonitor.measure(stage, images=n) context manager
- timed decorator for whole commands
- get_monitor() process-wide instance
"""

import functools
import time
from dataclasses import dataclass
from threading import RLock
from typing import Any, Callable, Dict, List, Optional, Tuple

from camoflow.logging_config import get_logger

logger = get_logger('camoflow.performance')


@dataclass
class StageTiming:
    """Accumulated timing of one pipeline stage (train_step, validation, inference)"""
    stage: str
    calls: int = 0
    images: int = 0
    seconds: float = 0.0
    fastest: Optional[float] = None
    slowest: float = 0.0

    @property
    def mean_seconds(self) -> float:
        return self.seconds / self.calls if self.calls else 0.0

    @property
    def images_per_second(self) -> float:
        return self.images / self.seconds if self.seconds > 0 else 0.0

    def add(self, seconds: float, images: int = 0) -> None:
        self.calls += 1
        self.images += images
        self.seconds += seconds
        self.fastest = seconds if self.fastest is None else min(self.fastest, seconds)
        self.slowest = max(self.slowest, seconds)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'stage': self.stage,
            'calls': self.calls,
            'images': self.images,
            'seconds': self.seconds,
            'mean_seconds': self.mean_seconds,
            'fastest': self.fastest or 0.0,
            'slowest': self.slowest,
            'images_per_second': self.images_per_second,
        }


def timed(func: Callable) -> Callable:
    """
    Log the wall time of every call

    Example:
        >>> @timed
        ... def cmd_train(self, cfg, ...):
        ...     ...
    """
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        try:
            return func(*args, **kwargs)
        finally:
            logger.info(f"Function {func.__name__} took {time.perf_counter() - start:.4f}s")

    return wrapper


class PerformanceMonitor:
    """
    Per-stage timing and image throughput

    Example:
        >>> monitor = PerformanceMonitor()
        >>> with monitor.measure('train_step', images=len(batch)):
        ...     trainer.train_step(batch)
        >>> print(monitor.report())
    """

    def __init__(self):
        self.stages: Dict[str, StageTiming] = {}
        self.lock = RLock()
        logger.debug("PerformanceMonitor initialized")

    def measure(self, stage: str, images: int = 0) -> "_StageMeasurement":
        return _StageMeasurement(self, stage, images)

    def record(self, stage: str, seconds: float, images: int = 0) -> None:
        with self.lock:
            self.stages.setdefault(stage, StageTiming(stage)).add(seconds, images)

    def get(self, stage: str) -> Optional[StageTiming]:
        with self.lock:
            return self.stages.get(stage)

    def summary(self) -> Dict[str, Dict[str, Any]]:
        with self.lock:
            return {name: timing.to_dict() for name, timing in self.stages.items()}

    def slowest_stages(self, limit: int = 10) -> List[Tuple[str, float]]:
        """(stage, mean seconds per call), slowest first"""
        with self.lock:
            ranked = sorted(self.stages.values(), key=lambda t: t.mean_seconds, reverse=True)
            return [(t.stage, t.mean_seconds) for t in ranked[:limit]]

    def clear(self) -> None:
        with self.lock:
            self.stages.clear()

    def report(self) -> str:
        """
        Multi-line summary: one line per stage, slowest first

        Returns:
            Formatted report string
        """
        with self.lock:
            if not self.stages:
                return "No performance data collected"
            total = sum(t.seconds for t in self.stages.values())
            lines = [f"Performance: {total:.4f}s over {len(self.stages)} stage(s)"]
            for name, mean in self.slowest_stages():
                timing = self.stages[name]
                line = f"  {name}: {mean:.4f}s x {timing.calls}"
                if timing.images:
                    line += f" ({timing.images_per_second:.1f} img/s)"
                lines.append(line)
            return "\n".join(lines)


class _StageMeasurement:
    """Context manager recording one timed block"""

    def __init__(self, monitor: PerformanceMonitor, stage: str, images: int):
        self.monitor = monitor
        self.stage = stage
        self.images = images
        self.start = 0.0

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.monitor.record(self.stage, time.perf_counter() - self.start, self.images)


_global_monitor: Optional[PerformanceMonitor] = None


def get_monitor() -> PerformanceMonitor:
    """Process-wide PerformanceMonitor"""
    global _global_monitor
    if _global_monitor is None:
        _global_monitor = PerformanceMonitor()
    return _global_monitor
