"""
Run logger for the regime-clustered ISVM pipeline.

This module records the progress of a pipeline run: free-text messages go to
the console and to a plain log file, while per-stage records (name, status,
duration and details) are buffered and written as JSON lines.

管線運行日誌記錄器。

此模組記錄管線運行進度：文本消息輸出到控制台和日誌文件，階段記錄以 JSON 行批量寫入。
"""

import os
import json
import time
import datetime
import sys
from typing import Any, Dict, List, Optional

# Add parent directory to path to import config.py
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
import config


class RunLogger:
    """
    Logger for one pipeline run.

    Provides functionality for:
    - Console and file messages
    - Stage start/end records with durations
    - Batch writing of stage records to disk
    - A run summary for the manifest

    單次管線運行的日誌記錄器。
    """

    def __init__(self, output_dir: str,
                 run_name: Optional[str] = None,
                 enable_file_logging: bool = config.ENABLE_FILE_LOGGING,
                 batch_size: int = config.LOGGER_BATCH_SIZE):
        """
        Initialize the logger.

        Args:
            output_dir: Run output directory; logs go to <output_dir>/logs
            run_name: Name of the run (defaults to timestamp)
            enable_file_logging: Whether to write log files
            batch_size: Number of stage records to accumulate before writing to disk
        """
        if run_name is None:
            self.run_name = datetime.datetime.now().strftime("%Y%m%d_%H%M%S")
        else:
            self.run_name = run_name

        self.log_dir = os.path.join(output_dir, "logs")
        self.enable_file_logging = enable_file_logging
        self.batch_size = batch_size

        self.start_time = time.time()
        self.stage_starts: Dict[str, float] = {}
        self.stage_durations: Dict[str, float] = {}
        self.stage_status: Dict[str, str] = {}
        self.warning_count = 0

        # Data buffer for batch writing
        self.data_buffer: List[Dict[str, Any]] = []

        self.log_file_path = os.path.join(self.log_dir, "run_log.txt")
        self.stage_data_path = os.path.join(self.log_dir, "stages.jsonl")

        if enable_file_logging:
            os.makedirs(self.log_dir, exist_ok=True)
            with open(self.log_file_path, "a") as f:
                f.write(f"Pipeline Log - Run: {self.run_name}\n")
                f.write(f"Started: {datetime.datetime.now().strftime('%Y-%m-%d %H:%M:%S')}\n")
                f.write("=" * 80 + "\n\n")

        self.log_text(f"Logger initialized. Run: {self.run_name}")

    def log_stage_start(self, stage: str):
        """
        Log the start of a pipeline stage.

        Args:
            stage: Stage name (simulate, cluster, fit, evaluate)
        """
        self.stage_starts[stage] = time.time()
        self.stage_status[stage] = "running"
        self.log_text(f"stage {stage} | started")

    def log_stage_end(self, stage: str, status: str = "ok", **details: Any):
        """
        Log the end of a pipeline stage with details.

        Args:
            stage: Stage name
            status: ok or failed
            **details: Extra JSON-serializable fields for the stage record
        """
        duration = time.time() - self.stage_starts.get(stage, time.time())
        self.stage_durations[stage] = duration
        self.stage_status[stage] = status

        record = {
            "run": self.run_name,
            "stage": stage,
            "status": status,
            "duration": duration,
            "timestamp": time.time(),
        }
        record.update(details)
        self.data_buffer.append(record)

        detail_str = "".join(f" | {key} {value}" for key, value in details.items())
        self.log_text(f"stage {stage} | {status}{detail_str} | during {duration:.2f}s")

        if len(self.data_buffer) >= self.batch_size:
            self._batch_write()

    def log_warning(self, message: str):
        """Log a recoverable condition."""
        self.warning_count += 1
        self.log_text(f"WARNING: {message}")

    def log_text(self, message: str):
        """
        Log a message to both console and log file.

        Args:
            message: The message to log
        """
        print(message)

        if self.enable_file_logging:
            try:
                with open(self.log_file_path, "a") as f:
                    f.write(message + "\n")
            except OSError as e:
                print(f"WARNING: Failed to write to log file: {str(e)}. Continuing without logging to file.")

    def get_run_summary(self) -> Dict[str, Any]:
        """
        Get a summary of the run so far.

        Returns:
            dict: Stage statuses, durations and elapsed time
        """
        duration = time.time() - self.start_time
        hours, remainder = divmod(duration, 3600)
        minutes, seconds = divmod(remainder, 60)
        return {
            "run_name": self.run_name,
            "duration": f"{int(hours):02d}:{int(minutes):02d}:{int(seconds):02d}",
            "stages": dict(self.stage_status),
            "stage_durations": dict(self.stage_durations),
            "warnings": self.warning_count,
        }

    def flush(self):
        """Write any buffered stage records."""
        self._batch_write()

    def _batch_write(self):
        """Perform batch writing of accumulated stage records to disk."""
        if not self.data_buffer:
            return

        if self.enable_file_logging:
            try:
                with open(self.stage_data_path, 'a') as f:
                    for record in self.data_buffer:
                        f.write(json.dumps(record, default=str) + '\n')
            except OSError as e:
                print(f"WARNING: Failed to write to stage data file: {str(e)}. Continuing without logging to file.")

        self.data_buffer = []
