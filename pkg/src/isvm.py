"""
Implied stochastic volatility model fit per regime.

Surface coefficients and the instantaneous volatility v of every timestamp
are inverted into point targets for gamma(v), eta^2(v) and mu(v). Within each
cluster the targets are smoothed by Gaussian-kernel local linear regression
on a grid over v, and bootstrap refits of the surfaces give pointwise bands.

每個市場狀態的隱含隨機波動率模型擬合。
"""

import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

# Add parent directory to path to import config.py
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
import config
from src.errors import DataError, DegenerateSurfaceError, InsufficientObservationsError
from src.surface import SurfaceCoefficients, fit_surface_arrays
from src.market_data import format_timestamp

FUNCTIONS = ("mu", "gamma", "eta2")


###############################
# COEFFICIENT INVERSION
# 係數反演
###############################

class LeadingOrderInversion:
    """
    Short-maturity relations between surface coefficients and the model functions:

        gamma = 2 v b01
        eta^2 = 3 v^3 b02 + 2 v^2 b01^2
        mu    = 2 b00 - (gamma^2 + eta^2) / (2 v)
    """
    name = "leading_order"
    curvature_factor = 3.0

    def __call__(self, coeffs: SurfaceCoefficients, v: float) -> Tuple[float, float, float]:
        gamma = 2.0 * v * coeffs.b01
        eta2 = self.curvature_factor * v ** 3 * coeffs.b02 + 2.0 * v ** 2 * coeffs.b01 ** 2
        mu = 2.0 * coeffs.b00 - (gamma ** 2 + eta2) / (2.0 * v)
        return gamma, eta2, mu


class CurvatureConsistentInversion(LeadingOrderInversion):
    """eta^2 = 6 v^3 b02 + 2 v^2 b01^2, matching the lognormal SABR smile curvature."""
    name = "curvature_consistent"
    curvature_factor = 6.0


INVERSIONS = {
    LeadingOrderInversion.name: LeadingOrderInversion(),
    CurvatureConsistentInversion.name: CurvatureConsistentInversion(),
}


def invert_coefficients(coeffs: SurfaceCoefficients, v: float,
                        inversion: str = config.INVERSION) -> Tuple[float, float, float]:
    """
    Map surface coefficients and instantaneous volatility to (gamma, eta2, mu).

    Raises:
        DataError: v is not positive
    """
    if not v > 0:
        raise DataError(f"instantaneous volatility must be positive, got {v}")
    if inversion not in INVERSIONS:
        raise DataError(f"unknown inversion '{inversion}'")
    return INVERSIONS[inversion](coeffs, v)


###############################
# TARGETS
# 目標值
###############################

@dataclass
class TimestampSample:
    """Filtered surface observations of one timestamp with its v and cluster label."""
    timestamp: pd.Timestamp
    tau: np.ndarray
    k: np.ndarray
    iv: np.ndarray
    v: float
    label: int = 0


@dataclass
class IsvmTargets:
    timestamps: List[pd.Timestamp]
    v: np.ndarray
    gamma: np.ndarray
    eta2: np.ndarray
    mu: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return len(self.v)

    def values(self, function: str) -> np.ndarray:
        return getattr(self, function)

    def subset(self, selector: np.ndarray) -> "IsvmTargets":
        return IsvmTargets(
            timestamps=[ts for ts, keep in zip(self.timestamps, selector) if keep],
            v=self.v[selector], gamma=self.gamma[selector], eta2=self.eta2[selector],
            mu=self.mu[selector], labels=self.labels[selector],
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "timestamp": [format_timestamp(ts) for ts in self.timestamps],
            "label": self.labels, "v": self.v,
            "gamma": self.gamma, "eta2": self.eta2, "mu": self.mu,
        })


def compute_targets(samples: Sequence[TimestampSample], inversion: str = config.INVERSION
                    ) -> Tuple[IsvmTargets, List[pd.Timestamp]]:
    """
    Fit the surface of every sample and invert it.

    Returns:
        tuple: (targets of usable timestamps, timestamps skipped as degenerate)
    """
    rows = []
    skipped = []
    for sample in samples:
        try:
            coeffs = fit_surface_arrays(sample.tau, sample.k, sample.iv, sample.timestamp)
        except DegenerateSurfaceError:
            skipped.append(sample.timestamp)
            continue
        gamma, eta2, mu = invert_coefficients(coeffs, sample.v, inversion)
        rows.append((sample.timestamp, sample.v, gamma, eta2, mu, sample.label))
    if skipped:
        warnings.warn(f"skipped {len(skipped)} degenerate surface samples")

    return IsvmTargets(
        timestamps=[r[0] for r in rows],
        v=np.array([r[1] for r in rows], dtype=float),
        gamma=np.array([r[2] for r in rows], dtype=float),
        eta2=np.array([r[3] for r in rows], dtype=float),
        mu=np.array([r[4] for r in rows], dtype=float),
        labels=np.array([r[5] for r in rows], dtype=int),
    ), skipped


###############################
# LOCAL REGRESSION
# 局部回歸
###############################

def silverman_bandwidth(v: np.ndarray, floor_fraction: float = config.BANDWIDTH_FLOOR_FRACTION) -> float:
    """0.9 min(sd, IQR / 1.34) n^(-1/5), floored at floor_fraction of the v range."""
    v = np.asarray(v, dtype=float)
    sd = float(np.std(v, ddof=1)) if len(v) > 1 else 0.0
    q75, q25 = np.percentile(v, [75.0, 25.0])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    bandwidth = 0.9 * spread * len(v) ** (-0.2)
    bandwidth = max(bandwidth, floor_fraction * float(np.ptp(v)))
    return bandwidth if bandwidth > 0 else 1.0


def evaluation_grid(v: np.ndarray, n_points: int = config.GRID_POINTS,
                    percentiles: Tuple[float, float] = config.GRID_PERCENTILES) -> np.ndarray:
    low, high = np.percentile(np.asarray(v, dtype=float), list(percentiles))
    return np.linspace(low, high, n_points)


def local_regression(v: np.ndarray, y: np.ndarray, grid: np.ndarray, bandwidth: Optional[float] = None,
                     min_points: int = config.MIN_CLUSTER_OBSERVATIONS) -> np.ndarray:
    """
    Local linear regression with Gaussian weights, evaluated at each grid point.

    Reproduces constants and straight lines exactly. The bandwidth defaults to
    silverman_bandwidth(v).

    Raises:
        InsufficientObservationsError: Fewer than min_points points
    """
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(v) < min_points:
        raise InsufficientObservationsError(
            f"insufficient cluster observations: {len(v)} points, need {min_points}", len(v))
    h = silverman_bandwidth(v) if bandwidth is None else bandwidth
    grid = np.atleast_1d(np.asarray(grid, dtype=float))

    d = v[None, :] - grid[:, None]
    scaled = (d / h) ** 2
    # shifting by the row minimum rescales each row's weights by a constant
    w = np.exp(-0.5 * (scaled - scaled.min(axis=1, keepdims=True)))
    s0 = w.sum(axis=1)
    s1 = (w * d).sum(axis=1)
    s2 = (w * d ** 2).sum(axis=1)
    t0 = (w * y).sum(axis=1)
    t1 = (w * d * y).sum(axis=1)

    denominator = s0 * s2 - s1 ** 2
    flat = denominator <= 1e-14 * np.maximum(s0 * s2, np.finfo(float).tiny)
    safe = np.where(flat, 1.0, denominator)
    return np.where(flat, t0 / s0, (s2 * t0 - s1 * t1) / safe)


###############################
# FITS AND BANDS
# 擬合與置信帶
###############################

@dataclass
class CurveFit:
    function: str
    grid: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    bandwidth: float
    n_points: int


@dataclass
class IsvmFit:
    """Curves of one cluster (label None for the pooled, unclustered fit)."""
    label: Optional[int]
    curves: Dict[str, CurveFit]
    targets: IsvmTargets
    bandwidth: float
    n_replicates: int = 0
    n_skipped_replicates: int = 0

    def predict(self, function: str, v) -> np.ndarray:
        """Local regression curve of `function` evaluated at arbitrary v."""
        return local_regression(self.targets.v, self.targets.values(function), v, self.bandwidth, min_points=1)


@dataclass
class IsvmResult:
    fits: Dict[Optional[int], IsvmFit]
    skipped_clusters: Dict[Optional[int], str] = field(default_factory=dict)
    skipped_timestamps: List[pd.Timestamp] = field(default_factory=list)


@dataclass
class BootstrapResult:
    curves: Dict[str, np.ndarray]
    lower: Dict[str, np.ndarray]
    upper: Dict[str, np.ndarray]
    n_replicates: int
    n_skipped: int


def _resample_targets(samples: Sequence[TimestampSample], rng: np.random.Generator, inversion: str,
                      max_redraws: int) -> Optional[np.ndarray]:
    """One bootstrap replicate: (v, gamma, eta2, mu) rows, or None when a surface never fits."""
    rows = np.empty((len(samples), 4))
    for i, sample in enumerate(samples):
        m = len(sample.iv)
        for _ in range(max_redraws):
            idx = rng.integers(0, m, size=m)
            try:
                coeffs = fit_surface_arrays(sample.tau[idx], sample.k[idx], sample.iv[idx], sample.timestamp)
                break
            except DegenerateSurfaceError:
                continue
        else:
            return None
        rows[i, 0] = sample.v
        rows[i, 1:] = invert_coefficients(coeffs, sample.v, inversion)
    return rows


def bootstrap_bands(samples: Sequence[TimestampSample], grid: np.ndarray, mean_curves: Dict[str, np.ndarray],
                    bandwidth: float, n_boot: int = config.BOOTSTRAP_SAMPLES,
                    seed: int = config.BOOTSTRAP_SEED, inversion: str = config.INVERSION,
                    max_redraws: int = config.BOOTSTRAP_MAX_REDRAWS,
                    band_width_sd: float = config.BAND_WIDTH_SD,
                    threads: int = config.DEFAULT_THREADS, progress: bool = False) -> BootstrapResult:
    """
    Pointwise bands from surface-level bootstrap replicates.

    Replicate b resamples every timestamp's observations with replacement
    (same count) using a generator seeded with seed + b, then reruns surface
    fit, inversion and local regression on the common grid. Bands are
    mean_curves +/- band_width_sd pointwise standard deviations.
    """
    if n_boot < 2:
        raise DataError(f"n_boot must be at least 2, got {n_boot}")

    def replicate(b: int):
        rng = np.random.default_rng(seed + b)
        rows = _resample_targets(samples, rng, inversion, max_redraws)
        if rows is None:
            return None
        return {name: local_regression(rows[:, 0], rows[:, col], grid, bandwidth, min_points=1)
                for col, name in enumerate(("gamma", "eta2", "mu"), start=1)}

    indices = range(n_boot)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(tqdm(pool.map(replicate, indices), total=n_boot, disable=not progress,
                                desc="bootstrap", leave=False))
    else:
        results = [replicate(b) for b in tqdm(indices, disable=not progress, desc="bootstrap", leave=False)]

    valid = [r for r in results if r is not None]
    n_skipped = len(results) - len(valid)
    if n_skipped:
        warnings.warn(f"skipped {n_skipped} bootstrap replicates after {max_redraws} failed redraws")

    curves, lower, upper = {}, {}, {}
    for name in FUNCTIONS:
        stacked = np.array([r[name] for r in valid]) if valid else np.empty((0, len(grid)))
        curves[name] = stacked
        if len(valid) >= 2:
            sd = stacked.std(axis=0, ddof=1)
        else:
            warnings.warn("fewer than two bootstrap replicates; bands collapse to the mean curve")
            sd = np.zeros(len(grid))
        lower[name] = mean_curves[name] - band_width_sd * sd
        upper[name] = mean_curves[name] + band_width_sd * sd
    return BootstrapResult(curves=curves, lower=lower, upper=upper, n_replicates=len(valid), n_skipped=n_skipped)


def fit_cluster(samples: Sequence[TimestampSample], settings: config.IsvmSettings, label: Optional[int] = None,
                threads: int = config.DEFAULT_THREADS, progress: bool = False,
                targets: Optional[IsvmTargets] = None) -> IsvmFit:
    """Point curves plus bootstrap bands for one group of samples."""
    if targets is None:
        targets, _ = compute_targets(samples, settings.inversion)
    if len(targets) < settings.min_observations:
        raise InsufficientObservationsError(
            f"insufficient cluster observations: {len(targets)} points, need {settings.min_observations}",
            len(targets))

    usable = set(targets.timestamps)
    samples = [s for s in samples if s.timestamp in usable]
    bandwidth = silverman_bandwidth(targets.v, settings.bandwidth_floor_fraction)
    grid = evaluation_grid(targets.v, settings.grid_points, tuple(settings.grid_percentiles))
    means = {name: local_regression(targets.v, targets.values(name), grid, bandwidth, settings.min_observations)
             for name in FUNCTIONS}

    boot = bootstrap_bands(samples, grid, means, bandwidth, settings.bootstrap_samples, settings.bootstrap_seed,
                           settings.inversion, settings.max_redraws, settings.band_width_sd, threads, progress)
    curves = {name: CurveFit(function=name, grid=grid, mean=means[name], lower=boot.lower[name],
                             upper=boot.upper[name], bandwidth=bandwidth, n_points=len(targets))
              for name in FUNCTIONS}
    return IsvmFit(label=label, curves=curves, targets=targets, bandwidth=bandwidth,
                   n_replicates=boot.n_replicates, n_skipped_replicates=boot.n_skipped)


def fit_isvm(samples: Sequence[TimestampSample], settings: Optional[config.IsvmSettings] = None,
             pooled: bool = False, threads: int = config.DEFAULT_THREADS, progress: bool = False) -> IsvmResult:
    """
    Fit every cluster present in the samples' labels (or all samples together
    when pooled). Clusters with fewer than settings.min_observations usable
    timestamps are skipped and reported.

    按聚類擬合 ISVM 曲線。

    Raises:
        InsufficientObservationsError: Every cluster was skipped
    """
    settings = settings or config.IsvmSettings()
    targets, skipped_timestamps = compute_targets(samples, settings.inversion)

    if pooled:
        groups = {None: (list(samples), targets)}
    else:
        groups = {}
        for label in sorted({s.label for s in samples}):
            groups[label] = ([s for s in samples if s.label == label], targets.subset(targets.labels == label))

    fits: Dict[Optional[int], IsvmFit] = {}
    skipped: Dict[Optional[int], str] = {}
    for label, (group_samples, group_targets) in groups.items():
        if len(group_targets) < settings.min_observations:
            skipped[label] = f"{len(group_targets)} observations, need {settings.min_observations}"
            warnings.warn(f"cluster {label} skipped: {skipped[label]}")
            continue
        fits[label] = fit_cluster(group_samples, settings, label, threads, progress, targets=group_targets)

    if not fits:
        raise InsufficientObservationsError("insufficient cluster observations: every cluster was skipped")
    return IsvmResult(fits=fits, skipped_clusters=skipped, skipped_timestamps=skipped_timestamps)


def positivity_diagnostic(fit: IsvmFit) -> float:
    """Fraction of the eta^2 mean curve below zero."""
    return float(np.mean(fit.curves["eta2"].mean < 0))


def curves_frame(result: IsvmResult, window: int = 0) -> pd.DataFrame:
    """Long table (window, scope, cluster, function, v, mean, lower, upper)."""
    frames = []
    for label, fit in result.fits.items():
        for name in FUNCTIONS:
            curve = fit.curves[name]
            frames.append(pd.DataFrame({
                "window": window,
                "scope": "unclustered" if label is None else "cluster",
                "cluster": -1 if label is None else label,
                "function": name,
                "v": curve.grid, "mean": curve.mean, "lower": curve.lower, "upper": curve.upper,
            }))
    return pd.concat(frames, ignore_index=True)
