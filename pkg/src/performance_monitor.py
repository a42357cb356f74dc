"""
Performance monitoring for pipeline runs.

This module times pipeline stages, samples process resource usage with psutil
and collects the system information recorded in the run manifest.

管線運行的性能監控。

此模組為管線階段計時，使用 psutil 採樣進程資源使用情況，並收集寫入運行清單的系統信息。
"""

import time
import platform
import psutil
import numpy as np
import scipy
import os
import json
from collections import defaultdict, deque
from datetime import datetime


def get_system_info():
    """
    Get system information including hardware and numerical library versions.

    獲取系統信息，包括硬體和數值庫版本。

    Returns:
        dict: OS, CPU, memory, numpy and scipy versions
    """
    info = {
        'os': platform.system(),
        'os_version': platform.version(),
        'python_version': platform.python_version(),
        'cpu_type': platform.processor() or "Unknown",
        'cpu_count': os.cpu_count(),
        'numpy_version': np.__version__,
        'scipy_version': scipy.__version__,
    }

    try:
        info['system_memory_gb'] = round(psutil.virtual_memory().total / (1024**3), 2)
    except Exception:
        info['system_memory_gb'] = "Unknown"

    return info


def effective_threads(requested: int) -> int:
    """Cap a requested worker count by the available CPU count (at least 1)."""
    available = os.cpu_count() or 1
    return max(1, min(int(requested), available))


class PerformanceMonitor:
    """
    Stage timing and resource sampling for a pipeline run.

    管線運行的階段計時和資源採樣。
    """

    def __init__(self, history_size=1000):
        """
        Initialize the performance monitor.

        Args:
            history_size: Maximum number of samples kept per metric
        """
        self.history_size = history_size
        self.metrics = defaultdict(lambda: deque(maxlen=history_size))
        self.start_time = time.time()

    def time_operation(self, operation_name):
        """
        Context manager for timing operations.

        用於計時操作的上下文管理器。

        Usage:
            with monitor.time_operation('cluster'):
                # ... code to time ...
        """
        return TimingContext(self, operation_name)

    def sample_resources(self):
        """Record one sample of process CPU and memory usage."""
        process = psutil.Process()
        memory_info = process.memory_info()
        self.metrics['cpu_percent'].append(process.cpu_percent())
        self.metrics['memory_percent'].append(process.memory_percent())
        self.metrics['memory_rss_mb'].append(memory_info.rss / 1024 / 1024)

    def get_current_stats(self):
        """
        Get current performance statistics.

        獲取當前性能統計信息。

        Returns:
            dict: Per-metric current/mean/max/min/total plus runtime
        """
        stats = {}
        for metric_name, values in self.metrics.items():
            if values:
                stats[metric_name] = {
                    'current': float(values[-1]),
                    'mean': float(np.mean(values)),
                    'max': float(np.max(values)),
                    'min': float(np.min(values)),
                    'total': float(np.sum(values)),
                    'count': len(values),
                }
        stats['runtime_seconds'] = time.time() - self.start_time
        return stats

    def get_performance_report(self):
        """
        Generate a performance report for the manifest.

        生成性能報告。

        Returns:
            dict: Timestamp, stage timings and resource usage
        """
        self.sample_resources()
        current_stats = self.get_current_stats()
        resource_keys = ('cpu_percent', 'memory_percent', 'memory_rss_mb')
        return {
            'timestamp': datetime.now().isoformat(),
            'monitoring_duration': current_stats.pop('runtime_seconds'),
            'system_performance': {key: current_stats.pop(key) for key in resource_keys if key in current_stats},
            'stage_timings': {name: values['total'] for name, values in current_stats.items()},
        }

    def save_report(self, filepath):
        """
        Save performance report to file.

        將性能報告保存到文件。
        """
        report = self.get_performance_report()
        os.makedirs(os.path.dirname(filepath) or ".", exist_ok=True)
        with open(filepath, 'w') as f:
            json.dump(report, f, indent=2, default=str)
        return report


class TimingContext:
    """
    Context manager for timing specific operations.

    用於計時特定操作的上下文管理器。
    """

    def __init__(self, monitor, operation_name):
        self.monitor = monitor
        self.operation_name = operation_name
        self.start_time = None
        self.duration = None

    def __enter__(self):
        self.start_time = time.time()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.start_time is not None:
            self.duration = time.time() - self.start_time
            self.monitor.metrics[self.operation_name].append(self.duration)
