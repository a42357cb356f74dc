#!/usr/bin/env python3
"""
Tests for the result plots, run against a hand-built run directory.

結果繪圖測試。
"""

import os
import sys

import numpy as np
import pandas as pd
import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
from src.errors import DataError
from src.evaluation import ErrorSummary, write_summaries
from src.isvm import FUNCTIONS
from src.market_data import PanelMatrix, write_panel
from src.visualization import ResultsVisualizer
from visualize_results import main
from testing_utils import module_tests, run_standalone


def build_run_dir(root, with_labels=True):
    run_dir = os.path.join(str(root), "run")
    os.makedirs(os.path.join(run_dir, "curves"))
    grid = np.linspace(0.4, 1.0, 10)
    frames = []
    for scope, cluster in (("unclustered", -1), ("cluster", 0), ("cluster", 1)):
        for function in FUNCTIONS:
            mean = 0.1 * grid * (cluster + 2)
            frames.append(pd.DataFrame({"window": 0, "scope": scope, "cluster": cluster, "function": function,
                                        "v": grid, "mean": mean, "lower": mean - 0.01, "upper": mean + 0.01}))
    pd.concat(frames).to_csv(os.path.join(run_dir, "curves", "window_000.csv"), index=False)

    write_summaries([ErrorSummary("eta2", 0.1, 0.05, 0.2, 0.15), ErrorSummary("eta2_1", 0.08, 0.04, 0.1, 0.06),
                     ErrorSummary("eta2_2", 0.12, 0.1, 0.3, 0.2)],
                    os.path.join(run_dir, "rmse_summary.csv"), "abc")

    timestamps = pd.date_range("2022-01-23", periods=60, freq="20min", tz="UTC")
    rng = np.random.default_rng(0)
    panel = PanelMatrix(asset_ids=["A", "B", "C"], timestamps=timestamps,
                        values=0.6 + 0.01 * rng.standard_normal((3, 60)), mask=np.ones((3, 60), dtype=bool))
    write_panel(panel, os.path.join(run_dir, "panels", "window_000.csv"), "abc")

    if with_labels:
        os.makedirs(os.path.join(run_dir, "regimes"))
        pd.DataFrame({"timestamp": timestamps.strftime("%Y-%m-%dT%H:%M:%SZ"),
                      "label": [0] * 30 + [1] * 30}).to_csv(
            os.path.join(run_dir, "regimes", "window_000_labels.csv"), index=False)
    return run_dir


def test_all_plots_are_written(tmp_path):
    run_dir = build_run_dir(tmp_path)
    plots = ResultsVisualizer(run_dir).generate_all_plots()
    names = sorted(os.path.basename(p) for p in plots)
    assert names == ["curves_window_000.png", "panel_window_000.png", "regime_timeline.png", "rmse_summary.png"]
    for path in plots:
        assert os.path.getsize(path) > 0


def test_missing_inputs_are_skipped(tmp_path):
    run_dir = build_run_dir(tmp_path, with_labels=False)
    visualizer = ResultsVisualizer(run_dir, plot_dir=os.path.join(str(tmp_path), "plots"))
    assert visualizer.plot_regime_timeline() == ""
    assert visualizer.plot_error_summary("mae") == ""
    with pytest.raises(DataError):
        visualizer.plot_curves("window_009")


def test_command_line(tmp_path):
    run_dir = build_run_dir(tmp_path)
    assert main([run_dir, "--window", "window_000"]) == 0
    assert os.path.isfile(os.path.join(run_dir, "plots", "curves_window_000.png"))
    assert main([os.path.join(str(tmp_path), "nowhere")]) == 3


def main_tests():
    return run_standalone("Testing Visualization", module_tests(globals()))


if __name__ == "__main__":
    sys.exit(main_tests())
