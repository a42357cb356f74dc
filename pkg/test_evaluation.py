#!/usr/bin/env python3
"""
Tests for residual error measures, summary tables and clustered versus
unclustered comparisons.

評估模組測試。
"""

import os
import sys

import numpy as np
import pandas as pd
import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
from src import evaluation
from src.errors import EvaluationError
from testing_utils import module_tests, run_standalone


def summary(name, mean, spread=1.0):
    return evaluation.ErrorSummary(function=name, mean=mean, pctile5=mean - spread / 2,
                                   pctile95=mean + spread / 2, spread=spread)


def test_rmse_and_mae():
    assert evaluation.rmse([3.0, -4.0]) == pytest.approx(np.sqrt(12.5))
    assert evaluation.mae([3.0, -4.0]) == pytest.approx(3.5)
    assert evaluation.rmse(pd.Series([0.0, 0.0])) == 0.0
    with pytest.raises(EvaluationError):
        evaluation.rmse([])
    with pytest.raises(EvaluationError):
        evaluation.mae([])


def test_group_labels_are_one_based():
    assert evaluation.group_label("eta2") == "eta2"
    assert evaluation.group_label("gamma", 0) == "gamma_1"
    assert evaluation.group_label("mu", 2) == "mu_3"


def test_summarize_percentiles_and_order():
    values = {"mu": [1.0], "gamma_2": list(range(101)), "eta2": [2.0, 4.0], "gamma": [0.0, 10.0]}
    summaries = evaluation.summarize(values)
    assert [s.function for s in summaries] == ["eta2", "gamma", "gamma_2", "mu"]
    spread = summaries[2]
    assert spread.mean == pytest.approx(50.0)
    assert spread.pctile5 == pytest.approx(5.0)
    assert spread.pctile95 == pytest.approx(95.0)
    assert spread.spread == pytest.approx(90.0)
    # linear interpolation between two points
    assert summaries[1].pctile5 == pytest.approx(0.5)
    with pytest.raises(EvaluationError):
        evaluation.summarize({"eta2": []})


def test_compare_clustered_counts():
    unclustered = [summary("eta2", 0.5, 0.4), summary("gamma", 0.2, 0.1)]
    clustered = [summary("eta2_1", 0.3, 0.2), summary("eta2_2", 0.6, 0.5), summary("gamma_1", 0.2, 0.05)]
    result = evaluation.compare_clustered(unclustered, clustered)
    assert result["improvements"] == 1
    assert result["regressions"] == 1
    assert result["spread_reductions"] == 2
    assert result["fraction_improved"] == pytest.approx(1 / 3)
    assert result["entries"][2]["baseline"] == "gamma"
    with pytest.raises(EvaluationError, match="function sets differ"):
        evaluation.compare_clustered(unclustered, clustered[:2])


def test_matched_baseline_residuals_follow_cluster_timestamps():
    frame = pd.DataFrame({
        "group": ["eta2"] * 4 + ["eta2_1", "eta2_1", "eta2_2", "eta2_2", "mu_1"],
        "timestamp": ["t0", "t1", "t2", "t3", "t0", "t2", "t1", "t3", "t0"],
        "residual": [1.0, 2.0, 3.0, 4.0, 0.1, 0.2, 0.3, 0.4, 9.0],
    })
    matched = evaluation.matched_baseline_residuals(frame)
    assert sorted(matched) == ["eta2_1", "eta2_2"]
    np.testing.assert_array_equal(matched["eta2_1"], [1.0, 3.0])
    np.testing.assert_array_equal(matched["eta2_2"], [2.0, 4.0])


def test_compare_clustered_against_matched_baseline():
    # the high-error regime beats the unclustered fit on its own timestamps
    unclustered = [summary("eta2", 0.5, 0.4)]
    clustered = [summary("eta2_1", 0.3, 0.2), summary("eta2_2", 0.8, 0.5)]
    matched = [summary("eta2_1", 0.35, 0.3), summary("eta2_2", 0.9, 0.6)]

    result = evaluation.compare_clustered(unclustered, clustered, matched)
    assert result["improvements"] == 2
    assert result["regressions"] == 0
    assert result["fraction_improved"] == 1.0
    entry = result["entries"][1]
    assert entry["baseline_timestamps"] == "cluster"
    assert entry["baseline_mean"] == pytest.approx(0.9)
    assert entry["unclustered_mean"] == pytest.approx(0.5)
    assert entry["spread_reduced"]

    all_points = evaluation.compare_clustered(unclustered, clustered)
    assert all_points["entries"][1]["baseline_timestamps"] == "all"
    assert all_points["entries"][1]["mean_regressed"]


def test_label_accuracy_is_permutation_invariant():
    truth = [0, 0, 1, 1, 1, 0]
    assert evaluation.label_accuracy([1, 1, 0, 0, 0, 1], truth) == 1.0
    assert evaluation.label_accuracy([0, 0, 1, 1, 0, 0], truth) == pytest.approx(5 / 6)
    # Hungarian matching for many clusters
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 6, size=200)
    permuted = (labels + 2) % 6
    assert evaluation.label_accuracy(permuted, labels, 6) == 1.0
    with pytest.raises(EvaluationError):
        evaluation.label_accuracy([0, 1], [0])


def test_format_table_layout():
    table = evaluation.format_table([summary("eta2", 0.123, 0.5), summary("gamma_2", 1.0)], "RMSE")
    lines = table.splitlines()
    assert lines[0].startswith("RMSE")
    assert "Pctile[5]" in lines[0] and "Diff Pctile[95]-[5]" in lines[0]
    assert set(lines[1]) == {"-"}
    assert lines[2].startswith("η²") and "0.12" in lines[2]
    assert lines[3].startswith("γ₂")


def test_write_summaries(tmp_path):
    path = os.path.join(str(tmp_path), "rmse_summary.csv")
    evaluation.write_summaries([summary("eta2", 0.5)], path, "abc")
    with open(path) as f:
        assert f.readline().strip() == "# config_hash: abc"
    frame = pd.read_csv(path, comment="#")
    assert list(frame.columns) == ["function", "mean", "pctile5", "pctile95", "spread"]
    assert frame["mean"].iloc[0] == pytest.approx(0.5)


def main():
    return run_standalone("Testing Evaluation", module_tests(globals()))


if __name__ == "__main__":
    sys.exit(main())
