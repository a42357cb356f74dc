"""
Inverse covariance clustering of panel timestamps into market regimes.

Each timestamp of a panel is assigned to one of K clusters by maximizing a
gain built from the cluster mean and its sparse (TMFG/LoGo) precision, minus
a penalty lambda for switching cluster between consecutive timestamps. Cluster
statistics and assignments are refitted until the labels stop changing.

逆協方差聚類：將面板時間點分配到 K 個市場狀態。
"""

import os
import sys
import json
import warnings
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd

# Add parent directory to path to import config.py
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
import config
from src.errors import ClusteringError, ConfigError, DataError, InsufficientPanelError, NotPositiveDefiniteError
from src.filtering_network import SparsePrecision, log_det, sparse_precision
from src.market_data import PanelMatrix, format_timestamp

GAIN_KINDS = ("euclidean", "gaussian_likelihood")
ASSIGNMENTS = ("greedy", "viterbi")


@dataclass
class IccConfig:
    """
    Clustering parameters.

    min_cluster_size None resolves to max(n_assets + 1, 25) once the panel is known.

    聚類參數。
    """
    k: int = config.ICC_K
    lambda_: float = config.ICC_LAMBDA
    gain_kind: str = config.ICC_GAIN_KIND
    max_iterations: int = config.ICC_MAX_ITERATIONS
    seed: int = config.ICC_SEED
    min_cluster_size: Optional[int] = config.ICC_MIN_CLUSTER_SIZE
    lambda_decay: float = config.ICC_LAMBDA_DECAY
    paper_exact_gain: bool = config.ICC_PAPER_EXACT_GAIN
    assignment: str = config.ICC_ASSIGNMENT
    euclidean_warm_start: bool = config.ICC_EUCLIDEAN_WARM_START
    max_switch_ratio: float = config.ICC_MAX_SWITCH_RATIO

    def __post_init__(self):
        if self.k < 2:
            raise ConfigError(f"clustering needs k >= 2, got {self.k}")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be at least 1")
        if not 0 < self.lambda_decay < 1:
            raise ConfigError("lambda_decay must be in (0, 1)")
        if self.gain_kind not in GAIN_KINDS:
            raise ConfigError(f"gain_kind must be one of {GAIN_KINDS}, got {self.gain_kind}")
        if self.assignment not in ASSIGNMENTS:
            raise ConfigError(f"assignment must be one of {ASSIGNMENTS}, got {self.assignment}")
        if not 0 < self.max_switch_ratio <= 1:
            raise ConfigError("max_switch_ratio must be in (0, 1]")

    def resolved_min_cluster_size(self, n_assets: int) -> int:
        if self.min_cluster_size is not None:
            return int(self.min_cluster_size)
        return max(n_assets + 1, config.MIN_CLUSTER_OBSERVATIONS)


@dataclass
class ClusterStats:
    mean: np.ndarray
    precision: Optional[SparsePrecision]
    member_count: int
    log_det: float = 0.0


@dataclass
class RegimeAssignment:
    labels: np.ndarray
    stats: List[ClusterStats]
    n_switches: int
    converged: bool
    iterations_used: int
    lambda_used: float = 0.0
    lambda_attempts: List[float] = field(default_factory=list)
    min_cluster_size: int = 0
    gain_scale: float = 1.0

    @property
    def k(self) -> int:
        return len(self.stats)

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def is_degenerate(self, min_cluster_size: Optional[int] = None) -> bool:
        threshold = self.min_cluster_size if min_cluster_size is None else min_cluster_size
        return bool(np.any(self.cluster_sizes() < threshold))


###############################
# GAINS
# 增益函數
###############################

def gain_euclidean(r_t: np.ndarray, stats: ClusterStats) -> float:
    """Minus the squared Euclidean distance to the cluster mean."""
    diff = np.asarray(r_t, dtype=float) - stats.mean
    return -float(diff @ diff)


def gain_gaussian(r_t: np.ndarray, stats: ClusterStats, n: Optional[int] = None,
                  paper_exact: bool = config.ICC_PAPER_EXACT_GAIN) -> float:
    """
    0.5 * log|P| - n * d^2 / 2 with d^2 the Mahalanobis distance under the
    cluster precision P. paper_exact=False drops the factor n.

    Raises:
        NotPositiveDefiniteError: P is not positive definite
    """
    diff = np.asarray(r_t, dtype=float) - stats.mean
    n = len(diff) if n is None else n
    logdet = log_det(stats.precision)
    d2 = float(diff @ stats.precision.matrix @ diff)
    factor = n if paper_exact else 1
    return 0.5 * logdet - factor * d2 / 2.0


def penalized_gain(g: float, current: int, previous: Optional[int], lambda_: float) -> float:
    """Gain minus lambda when the cluster differs from the previous timestamp's."""
    if previous is None or current == previous:
        return g
    return g - lambda_


def gain_matrix(x: np.ndarray, stats: Sequence[ClusterStats], gain_kind: str,
                paper_exact: bool = config.ICC_PAPER_EXACT_GAIN) -> np.ndarray:
    """T x K gains of every timestamp against every cluster."""
    n = x.shape[1]
    gains = np.empty((x.shape[0], len(stats)))
    for c, s in enumerate(stats):
        diff = x - s.mean
        if gain_kind == "euclidean":
            gains[:, c] = -np.einsum("ti,ti->t", diff, diff)
        else:
            d2 = np.einsum("ti,ij,tj->t", diff, s.precision.matrix, diff)
            factor = n if paper_exact else 1
            gains[:, c] = 0.5 * s.log_det - factor * d2 / 2.0
    return gains


###############################
# ASSIGNMENT
# 時間分配
###############################

def assign_greedy(gains: np.ndarray, lambda_: float) -> np.ndarray:
    """Forward sweep: each timestamp takes the best penalized gain given its predecessor."""
    T, K = gains.shape
    labels = np.empty(T, dtype=int)
    labels[0] = int(np.argmax(gains[0]))
    clusters = np.arange(K)
    for t in range(1, T):
        labels[t] = int(np.argmax(gains[t] - lambda_ * (clusters != labels[t - 1])))
    return labels


def assign_viterbi(gains: np.ndarray, lambda_: float) -> np.ndarray:
    """Labels maximizing the total penalized gain for fixed gains."""
    T, K = gains.shape
    switch = lambda_ * (1.0 - np.eye(K))  # switch[j, k]: cost from j to k
    score = gains[0].copy()
    back = np.zeros((T, K), dtype=int)
    for t in range(1, T):
        candidates = score[:, None] - switch
        back[t] = np.argmax(candidates, axis=0)
        score = candidates[back[t], np.arange(K)] + gains[t]

    labels = np.empty(T, dtype=int)
    labels[-1] = int(np.argmax(score))
    for t in range(T - 1, 0, -1):
        labels[t - 1] = back[t, labels[t]]
    return labels


def total_penalized_gain(gains: np.ndarray, labels: np.ndarray, lambda_: float) -> float:
    picked = gains[np.arange(len(labels)), labels].sum()
    return float(picked - lambda_ * count_switches(labels))


def gain_scale(gains: np.ndarray) -> float:
    """
    Median gap between the best and the runner-up cluster gain.

    lambda is applied in these units, so the penalty keeps its meaning whether
    the gains are squared distances or likelihoods scaled by the asset count.
    Returns 1 when the clusters tie everywhere.
    """
    if gains.shape[1] < 2:
        return 1.0
    ordered = np.sort(gains, axis=1)
    scale = float(np.median(ordered[:, -1] - ordered[:, -2]))
    return scale if np.isfinite(scale) and scale > 1e-12 else 1.0


def assignment_sweep(gains: np.ndarray, penalty: float, previous: np.ndarray,
                     method: str = config.ICC_ASSIGNMENT) -> np.ndarray:
    """
    One assignment sweep for fixed cluster statistics.

    The greedy forward pass can end below the labels it started from; the
    previous labels are kept in that case, so the total penalized gain never
    decreases from one sweep to the next.
    """
    if method == "viterbi":
        return assign_viterbi(gains, penalty)
    swept = assign_greedy(gains, penalty)
    if total_penalized_gain(gains, swept, penalty) < total_penalized_gain(gains, previous, penalty):
        return np.asarray(previous, dtype=int).copy()
    return swept


def count_switches(labels: np.ndarray) -> int:
    labels = np.asarray(labels)
    return int(np.count_nonzero(labels[1:] != labels[:-1]))


###############################
# CLUSTER STATISTICS
# 聚類統計
###############################

def cluster_statistics(x: np.ndarray, labels: np.ndarray, k: int, gain_kind: str) -> List[ClusterStats]:
    """
    Mean and LoGo precision per cluster from the biased (1/m) covariance.

    A precision that fails Cholesky is refitted once on a ridged covariance.
    """
    stats = []
    for c in range(k):
        members = x[labels == c]
        if len(members) == 0:
            raise ClusteringError(f"cluster {c} has no members")
        mean = members.mean(axis=0)
        if gain_kind == "euclidean":
            stats.append(ClusterStats(mean=mean, precision=None, member_count=len(members)))
            continue

        diff = members - mean
        cov = diff.T @ diff / len(members)
        precision = sparse_precision(cov)
        try:
            logdet = log_det(precision)
        except NotPositiveDefiniteError:
            trace = float(np.trace(cov))
            epsilon = config.RIDGE_SCALE * trace / len(cov) if trace > 0 else config.RIDGE_SCALE
            warnings.warn(f"cluster {c} precision not positive definite; refitting with ridge {epsilon:.3g}")
            precision = sparse_precision(cov + epsilon * np.eye(len(cov)))
            logdet = log_det(precision)
        stats.append(ClusterStats(mean=mean, precision=precision, member_count=len(members), log_det=logdet))
    return stats


def _repair_clusters(labels: np.ndarray, gains: Optional[np.ndarray], x: np.ndarray,
                     k: int, min_size: int) -> np.ndarray:
    """
    Refill clusters below min_size with the lowest current-gain points of
    clusters that can spare them.

    Current gain is the previous gain matrix entry of the point's own cluster,
    or minus its squared distance to its own cluster mean on the first pass.
    """
    labels = labels.copy()
    sizes = np.bincount(labels, minlength=k)
    if np.all(sizes >= min_size):
        return labels

    if gains is not None:
        current = gains[np.arange(len(labels)), labels]
    else:
        current = np.empty(len(labels))
        for c in range(k):
            members = labels == c
            if members.any():
                diff = x[members] - x[members].mean(axis=0)
                current[members] = -np.einsum("ti,ti->t", diff, diff)

    order = np.argsort(current, kind="stable")
    for c in range(k):
        need = min_size - sizes[c]
        if need <= 0:
            continue
        for t in order:
            if need == 0:
                break
            donor = labels[t]
            if donor == c or sizes[donor] <= min_size:
                continue
            labels[t] = c
            sizes[donor] -= 1
            sizes[c] += 1
            need -= 1
    return labels


###############################
# FITTING
# 擬合
###############################

def _observations(panel: Union[PanelMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(panel, PanelMatrix):
        return np.ascontiguousarray(panel.observations(), dtype=float)
    x = np.asarray(panel, dtype=float)
    if x.ndim != 2:
        raise DataError(f"panel observations must be a T x n matrix, got shape {x.shape}")
    return x


def _refine(x: np.ndarray, labels: np.ndarray, cfg: IccConfig, gain_kind: str, lambda_: float, min_size: int):
    """
    Refit/assign loop for one gain kind and penalty.

    Returns:
        tuple: (labels, stats, labels the stats were fitted on, converged, iterations, gain scale)
    """
    gains = None
    stats: List[ClusterStats] = []
    fitted_on = labels
    converged = False
    iterations = 0
    scale = 1.0
    for iterations in range(1, cfg.max_iterations + 1):
        fitted_on = _repair_clusters(labels, gains, x, cfg.k, min_size)
        stats = cluster_statistics(x, fitted_on, cfg.k, gain_kind)
        gains = gain_matrix(x, stats, gain_kind, cfg.paper_exact_gain)
        scale = gain_scale(gains)
        new_labels = assignment_sweep(gains, lambda_ * scale, fitted_on, cfg.assignment)
        if np.array_equal(new_labels, fitted_on) or np.array_equal(new_labels, labels):
            converged = True
            labels = new_labels
            break
        labels = new_labels
    return labels, stats, fitted_on, converged, iterations, scale


def fit(panel: Union[PanelMatrix, np.ndarray], cfg: IccConfig) -> RegimeAssignment:
    """
    Alternate cluster statistic refits and temporal assignment sweeps.

    Starts from uniform random labels drawn from cfg.seed and stops when a
    sweep reproduces the labels it was fitted on (or the previous sweep's
    labels), or after cfg.max_iterations. With euclidean_warm_start the
    likelihood stage starts from the labels of an unpenalized euclidean
    refinement; under the pooled precision of a random split the likelihood
    gain weights the regime mean direction least.

    Every sweep charges cfg.lambda_ times gain_scale of the current gains per
    switch.

    Args:
        panel: PanelMatrix, or a T x n observation matrix
        cfg: Clustering parameters

    Returns:
        RegimeAssignment: converged=False when max_iterations was reached
    """
    x = _observations(panel)
    T, n = x.shape
    min_size = cfg.resolved_min_cluster_size(n)
    if T < cfg.k * min_size:
        raise InsufficientPanelError(
            f"{T} timestamps cannot hold {cfg.k} clusters of at least {min_size} points")

    rng = np.random.default_rng(cfg.seed)
    labels = rng.integers(0, cfg.k, size=T)

    warm_iterations = 0
    if cfg.euclidean_warm_start and cfg.gain_kind != "euclidean":
        labels, _, _, _, warm_iterations, _ = _refine(x, labels, cfg, "euclidean", 0.0, min_size)
    labels, stats, fitted_on, converged, iterations, scale = _refine(x, labels, cfg, cfg.gain_kind, cfg.lambda_,
                                                                     min_size)

    sizes = np.bincount(labels, minlength=cfg.k)
    if np.all(sizes > 0) and not np.array_equal(labels, fitted_on):
        stats = cluster_statistics(x, labels, cfg.k, cfg.gain_kind)

    return RegimeAssignment(
        labels=labels,
        stats=stats,
        n_switches=count_switches(labels),
        converged=converged,
        iterations_used=warm_iterations + iterations,
        lambda_used=cfg.lambda_,
        lambda_attempts=[cfg.lambda_],
        min_cluster_size=min_size,
        gain_scale=scale,
    )


def lambda_schedule(initial: float, decay: float = config.ICC_LAMBDA_DECAY,
                    floor: float = config.ICC_LAMBDA_FLOOR) -> List[float]:
    """initial, initial * decay, ... while |lambda| >= floor."""
    if not 0 < decay < 1:
        raise ConfigError("decay must be in (0, 1)")
    schedule = []
    value = float(initial)
    while abs(value) >= floor:
        schedule.append(value)
        value *= decay
    return schedule


def switch_ratio(labels: np.ndarray, k: Optional[int] = None) -> float:
    """
    Switch count relative to its expectation for the same labels in shuffled
    order, (T - 1) - sum_c m_c (m_c - 1) / T for cluster sizes m_c.

    Near 1 when the labels carry no temporal structure; 0 for constant labels.
    """
    labels = np.asarray(labels, dtype=int)
    T = len(labels)
    if T < 2:
        return 0.0
    sizes = np.bincount(labels, minlength=k or 0).astype(float)
    expected = (T - 1) - float(np.sum(sizes * (sizes - 1))) / T
    if expected <= 0:
        return 0.0
    return count_switches(labels) / expected


def fit_with_annealing(panel: Union[PanelMatrix, np.ndarray], cfg: IccConfig) -> RegimeAssignment:
    """
    Verify the panel clusters at lambda = 0, then try cfg.lambda_ and shrink it
    by lambda_decay after every degenerate fit.

    The lambda = 0 fit fails verification when a cluster is below
    min_cluster_size, or when its labels switch at least cfg.max_switch_ratio
    times as often as the same labels in shuffled order: clusters that
    alternate like independent draws split a single regime.

    Falls back to the lambda = 0 fit once lambda drops below ICC_LAMBDA_FLOOR.

    Raises:
        ClusteringError: The lambda = 0 fit failed verification
    """
    baseline = fit(panel, replace(cfg, lambda_=0.0))
    if baseline.is_degenerate():
        raise ClusteringError(f"data cannot be clustered into {cfg.k} regimes: "
                              f"cluster sizes {baseline.cluster_sizes().tolist()}")
    ratio = switch_ratio(baseline.labels, cfg.k)
    if ratio >= cfg.max_switch_ratio:
        raise ClusteringError(f"data cannot be clustered into {cfg.k} regimes: lambda = 0 labels switch "
                              f"{baseline.n_switches} times, {ratio:.2f} of the shuffled-order count")
    if cfg.lambda_ == 0:
        return baseline

    attempts: List[float] = []
    for value in lambda_schedule(cfg.lambda_, cfg.lambda_decay):
        attempts.append(value)
        result = fit(panel, replace(cfg, lambda_=value))
        if not result.is_degenerate():
            result.lambda_attempts = attempts
            return result

    warnings.warn(f"no lambda down to {config.ICC_LAMBDA_FLOOR} gave {cfg.k} usable clusters; using lambda = 0")
    baseline.lambda_attempts = attempts + [0.0]
    return baseline


def canonical_relabel(assignment: RegimeAssignment) -> RegimeAssignment:
    """Rename clusters in increasing order of their mean level."""
    levels = [float(np.mean(s.mean)) for s in assignment.stats]
    order = np.argsort(levels, kind="stable")
    mapping = np.empty(len(order), dtype=int)
    mapping[order] = np.arange(len(order))
    return replace(assignment,
                   labels=mapping[assignment.labels],
                   stats=[assignment.stats[i] for i in order])


###############################
# SERIALIZATION
# 序列化
###############################

def write_assignment(assignment: RegimeAssignment, timestamps: Sequence[pd.Timestamp], path: str,
                     config_hash: Optional[str] = None, asset_ids: Optional[Sequence[str]] = None):
    """Two-column (timestamp, label) file plus <name>_summary.json."""
    if len(timestamps) != len(assignment.labels):
        raise DataError("timestamps and labels differ in length")
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    frame = pd.DataFrame({
        "timestamp": [format_timestamp(ts) for ts in timestamps],
        "label": assignment.labels.astype(int),
    })
    with open(path, "w", newline="") as f:
        if config_hash:
            f.write(f"# config_hash: {config_hash}\n")
        frame.to_csv(f, index=False)

    summary = {
        "config_hash": config_hash,
        "k": assignment.k,
        "n_switches": assignment.n_switches,
        "converged": assignment.converged,
        "iterations_used": assignment.iterations_used,
        "lambda_used": assignment.lambda_used,
        "lambda_attempts": list(assignment.lambda_attempts),
        "gain_scale": float(f"{assignment.gain_scale:.12g}"),
        "min_cluster_size": assignment.min_cluster_size,
        "asset_ids": list(asset_ids) if asset_ids is not None else None,
        "clusters": [
            {"label": c, "member_count": int(s.member_count),
             "mean": [float(f"{v:.12g}") for v in s.mean],
             "log_det": float(f"{s.log_det:.12g}")}
            for c, s in enumerate(assignment.stats)
        ],
    }
    with open(os.path.splitext(path)[0] + "_summary.json", "w") as f:
        json.dump(summary, f, indent=2)


def read_assignment(path: str) -> pd.DataFrame:
    """Labels file as a frame with UTC timestamps and integer labels."""
    if not os.path.isfile(path):
        raise DataError(f"labels file does not exist: {path}")
    frame = pd.read_csv(path, comment="#")
    frame["timestamp"] = pd.to_datetime(frame["timestamp"], utc=True)
    frame["label"] = frame["label"].astype(int)
    return frame
