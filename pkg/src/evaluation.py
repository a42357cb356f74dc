"""
Fit quality measures: residual RMSE/MAE per function and cluster, percentile
summary tables, clustered versus unclustered comparison and label recovery.

擬合質量評估。
"""

import os
import sys
import itertools
from dataclasses import dataclass, asdict
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import linear_sum_assignment

# Add parent directory to path to import config.py
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
import config
from src.errors import EvaluationError
from src.isvm import FUNCTIONS, IsvmResult

DISPLAY_NAMES = {"eta2": "η²", "gamma": "γ", "mu": "μ"}
SUBSCRIPTS = str.maketrans("0123456789", "₀₁₂₃₄₅₆₇₈₉")


@dataclass
class ErrorSummary:
    function: str
    mean: float
    pctile5: float
    pctile95: float
    spread: float


def rmse(errors: Sequence[float]) -> float:
    values = np.asarray(errors, dtype=float)
    if values.size == 0:
        raise EvaluationError("rmse of an empty residual list")
    return float(np.sqrt(np.mean(values ** 2)))


def mae(errors: Sequence[float]) -> float:
    values = np.asarray(errors, dtype=float)
    if values.size == 0:
        raise EvaluationError("mae of an empty residual list")
    return float(np.mean(np.abs(values)))


def group_label(function: str, cluster: Optional[int] = None) -> str:
    """eta2 for the unclustered fit, eta2_1, eta2_2, ... for clusters (1-based)."""
    return function if cluster is None else f"{function}_{cluster + 1}"


def window_residuals(result: IsvmResult) -> Dict[str, np.ndarray]:
    """
    Residuals (curve at each target's v minus the target) per function and
    cluster of one window's fit.
    """
    residuals = {}
    for label, fit in result.fits.items():
        for function in FUNCTIONS:
            target = fit.targets.values(function)
            residuals[group_label(function, label)] = fit.predict(function, fit.targets.v) - target
    return residuals


def summarize(values_by_group: Mapping[str, Sequence[float]]) -> List[ErrorSummary]:
    """
    Mean, linear-interpolation 5th/95th percentiles and their spread per group.

    Raises:
        EvaluationError: A group is empty
    """
    summaries = []
    for name in sorted(values_by_group, key=_group_order):
        values = np.asarray(values_by_group[name], dtype=float)
        if values.size == 0:
            raise EvaluationError(f"no values for {name}")
        p5, p95 = np.percentile(values, [5.0, 95.0])
        summaries.append(ErrorSummary(function=name, mean=float(np.mean(values)),
                                      pctile5=float(p5), pctile95=float(p95), spread=float(p95 - p5)))
    return summaries


def _group_order(name: str):
    base, _, cluster = name.partition("_")
    function_rank = {"eta2": 0, "gamma": 1, "mu": 2}.get(base, 3)
    return (function_rank, base, int(cluster) if cluster.isdigit() else 0)


def _base_name(name: str) -> str:
    return name.partition("_")[0]


def matched_baseline_residuals(frame: pd.DataFrame) -> Dict[str, np.ndarray]:
    """
    Unclustered residuals at the timestamps of each cluster group of one
    window's residual table: eta2_2 maps to the eta2 residuals of the
    timestamps labelled 2.

    Args:
        frame: Residual table with group, timestamp and residual columns
    """
    matched = {}
    pooled = {name: rows.set_index("timestamp")["residual"]
              for name, rows in frame.groupby("group", sort=True) if "_" not in name}
    for name, rows in frame.groupby("group", sort=True):
        base = _base_name(name)
        if "_" not in name or base not in pooled:
            continue
        reference = pooled[base]
        present = rows["timestamp"][rows["timestamp"].isin(reference.index)]
        if len(present):
            matched[name] = reference.loc[present].to_numpy(dtype=float)
    return matched


def compare_clustered(unclustered: Sequence[ErrorSummary], clustered: Sequence[ErrorSummary],
                      matched: Optional[Sequence[ErrorSummary]] = None) -> Dict:
    """
    Per clustered summary: whether its mean is below the baseline mean of the
    same function (improvement), above it (regression), and whether its
    spread shrank.

    The baseline is the matched summary of the same name when given (the
    unclustered fit scored on that cluster's timestamps only), else the
    unclustered summary over all timestamps.

    Raises:
        EvaluationError: The two sets cover different functions
    """
    base = {s.function: s for s in unclustered}
    same_points = {s.function: s for s in matched or ()}
    clustered_functions = {_base_name(s.function) for s in clustered}
    if set(base) != clustered_functions:
        raise EvaluationError(
            f"function sets differ: unclustered {sorted(base)} vs clustered {sorted(clustered_functions)}")

    entries = []
    for s in clustered:
        pooled = base[_base_name(s.function)]
        reference = same_points.get(s.function, pooled)
        entries.append({
            "function": s.function,
            "baseline": pooled.function,
            "baseline_timestamps": "cluster" if s.function in same_points else "all",
            "mean": s.mean,
            "baseline_mean": reference.mean,
            "unclustered_mean": pooled.mean,
            "mean_improved": s.mean < reference.mean,
            "mean_regressed": s.mean > reference.mean,
            "spread": s.spread,
            "baseline_spread": reference.spread,
            "spread_reduced": s.spread < reference.spread,
        })

    n = len(entries)
    improvements = sum(e["mean_improved"] for e in entries)
    return {
        "entries": entries,
        "improvements": improvements,
        "regressions": sum(e["mean_regressed"] for e in entries),
        "spread_reductions": sum(e["spread_reduced"] for e in entries),
        "fraction_improved": improvements / n if n else 0.0,
    }


def label_accuracy(predicted: Sequence[int], truth: Sequence[int], k: Optional[int] = None) -> float:
    """
    Best accuracy over relabelings of the predicted clusters; exhaustive for
    k <= 4, Hungarian matching above.
    """
    predicted = np.asarray(predicted, dtype=int)
    truth = np.asarray(truth, dtype=int)
    if predicted.shape != truth.shape:
        raise EvaluationError(f"label lengths differ: {predicted.shape} vs {truth.shape}")
    if predicted.size == 0:
        raise EvaluationError("no labels to score")
    k = max(int(max(predicted.max(), truth.max())) + 1, k or 0)

    confusion = np.zeros((k, k), dtype=int)
    np.add.at(confusion, (predicted, truth), 1)
    if k <= 4:
        best = max(sum(confusion[i, perm[i]] for i in range(k)) for perm in itertools.permutations(range(k)))
    else:
        rows, cols = linear_sum_assignment(-confusion)
        best = confusion[rows, cols].sum()
    return float(best) / predicted.size


def summaries_frame(summaries: Sequence[ErrorSummary]) -> pd.DataFrame:
    return pd.DataFrame([asdict(s) for s in summaries], columns=["function", "mean", "pctile5", "pctile95", "spread"])


def write_summaries(summaries: Sequence[ErrorSummary], path: str, config_hash: Optional[str] = None):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as f:
        if config_hash:
            f.write(f"# config_hash: {config_hash}\n")
        summaries_frame(summaries).to_csv(f, index=False, float_format=config.FLOAT_FORMAT)


def _display(name: str) -> str:
    base, _, cluster = name.partition("_")
    return DISPLAY_NAMES.get(base, base) + cluster.translate(SUBSCRIPTS)


def format_table(summaries: Sequence[ErrorSummary], title: str = "RMSE") -> str:
    """Text table with Mean, Pctile[5], Pctile[95] and Diff columns."""
    header = f"{title:<8}{'Mean':>10}{'Pctile[5]':>12}{'Pctile[95]':>12}{'Diff Pctile[95]-[5]':>22}"
    lines = [header, "-" * len(header)]
    for s in summaries:
        lines.append(f"{_display(s.function):<8}{s.mean:>10.2f}{s.pctile5:>12.2f}{s.pctile95:>12.2f}{s.spread:>22.2f}")
    return "\n".join(lines)
