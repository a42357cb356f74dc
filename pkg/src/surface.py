"""
Per-timestamp bivariate implied volatility surface regression.

    iv(tau, k) = b10 + b00 tau + b20 tau^2 + b01 k + b11 tau k + b21 tau^2 k + b02 k^2

Coefficient names keep the superscript convention of the surface literature
(intercept b10, tau slope b00). Fits use a QR factorization of the design.

每個時間點的雙變量隱含波動率曲面回歸。
"""

import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import solve_triangular

# Add parent directory to path to import config.py
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
import config
from src.errors import DegenerateSurfaceError
from src.market_data import IvObservation, format_timestamp

COEFFICIENT_NAMES = ("b10", "b00", "b20", "b01", "b11", "b21", "b02")


@dataclass(frozen=True)
class SurfaceCoefficients:
    b10: float
    b00: float
    b20: float
    b01: float
    b11: float
    b21: float
    b02: float
    timestamp: Optional[pd.Timestamp] = None
    n_obs: int = 0
    residual_rmse: float = 0.0

    def as_array(self) -> np.ndarray:
        """Coefficients in design column order 1, tau, tau^2, k, tau k, tau^2 k, k^2."""
        return np.array([getattr(self, name) for name in COEFFICIENT_NAMES])


def design_matrix(tau: np.ndarray, k: np.ndarray) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    k = np.asarray(k, dtype=float)
    return np.column_stack([np.ones_like(tau), tau, tau ** 2, k, tau * k, tau ** 2 * k, k ** 2])


def fit_surface_arrays(tau: np.ndarray, k: np.ndarray, iv: np.ndarray,
                       timestamp: Optional[pd.Timestamp] = None) -> SurfaceCoefficients:
    """
    Least squares surface fit on raw arrays.

    Raises:
        DegenerateSurfaceError: Fewer than 7 points or a rank deficient design
    """
    iv = np.asarray(iv, dtype=float)
    if len(iv) < config.SURFACE_MIN_OBSERVATIONS:
        raise DegenerateSurfaceError(timestamp, f"{len(iv)} observations, need {config.SURFACE_MIN_OBSERVATIONS}")

    x = design_matrix(tau, k)
    q, r = np.linalg.qr(x, mode="reduced")
    diagonal = np.abs(np.diag(r))
    if diagonal.max() == 0 or diagonal.min() <= config.SURFACE_RANK_TOLERANCE * diagonal.max():
        raise DegenerateSurfaceError(timestamp, "rank deficient design")

    beta = solve_triangular(r, q.T @ iv, lower=False)
    residuals = iv - x @ beta
    rmse = float(np.sqrt(np.mean(residuals ** 2)))
    return SurfaceCoefficients(*(float(b) for b in beta), timestamp=timestamp, n_obs=len(iv), residual_rmse=rmse)


def fit_surface(obs: Sequence[IvObservation]) -> SurfaceCoefficients:
    """
    Fit the surface to the observations of one timestamp.

    Raises:
        DegenerateSurfaceError: Fewer than 7 observations or rank deficient design
    """
    timestamp = obs[0].timestamp if len(obs) else None
    return fit_surface_arrays(
        np.array([o.tau for o in obs]),
        np.array([o.k for o in obs]),
        np.array([o.iv for o in obs]),
        timestamp=timestamp,
    )


def evaluate_surface(coeffs: SurfaceCoefficients, tau, k):
    """Polynomial value at (tau, k); scalars or broadcastable arrays."""
    tau_arr = np.asarray(tau, dtype=float)
    k_arr = np.asarray(k, dtype=float)
    value = (coeffs.b10 + coeffs.b00 * tau_arr + coeffs.b20 * tau_arr ** 2
             + coeffs.b01 * k_arr + coeffs.b11 * tau_arr * k_arr + coeffs.b21 * tau_arr ** 2 * k_arr
             + coeffs.b02 * k_arr ** 2)
    if np.any(value <= 0):
        warnings.warn("surface evaluates to a non-positive implied volatility")
    if np.ndim(value) == 0:
        return float(value)
    return value


def fit_surfaces(groups: Mapping[pd.Timestamp, Sequence[IvObservation]],
                 threads: int = config.DEFAULT_THREADS) -> Tuple[List[SurfaceCoefficients], List[DegenerateSurfaceError]]:
    """
    Fit every timestamp's surface; degenerate samples are returned separately
    rather than raised.

    Returns:
        tuple: (coefficients in timestamp order, skipped timestamp errors)
    """
    items = list(groups.items())

    def _fit(item):
        timestamp, group = item
        try:
            return fit_surface(group)
        except DegenerateSurfaceError as e:
            return e

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_fit, items))
    else:
        results = [_fit(item) for item in items]

    fitted = [r for r in results if isinstance(r, SurfaceCoefficients)]
    skipped = [r for r in results if isinstance(r, DegenerateSurfaceError)]
    return fitted, skipped


def coefficients_frame(coefficients: Sequence[SurfaceCoefficients]) -> pd.DataFrame:
    return pd.DataFrame({
        "timestamp": [format_timestamp(c.timestamp) for c in coefficients],
        **{name: [getattr(c, name) for c in coefficients] for name in COEFFICIENT_NAMES},
        "n_obs": [c.n_obs for c in coefficients],
        "rmse": [c.residual_rmse for c in coefficients],
    })


def write_coefficients(coefficients: Sequence[SurfaceCoefficients], path: str, config_hash: Optional[str] = None):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as f:
        if config_hash:
            f.write(f"# config_hash: {config_hash}\n")
        coefficients_frame(coefficients).to_csv(f, index=False, float_format=config.FLOAT_FORMAT)


def read_coefficients(path: str) -> List[SurfaceCoefficients]:
    frame = pd.read_csv(path, comment="#")
    timestamps = pd.to_datetime(frame["timestamp"], utc=True)
    return [
        SurfaceCoefficients(*(float(row[name]) for name in COEFFICIENT_NAMES),
                            timestamp=ts, n_obs=int(row["n_obs"]), residual_rmse=float(row["rmse"]))
        for (_, row), ts in zip(frame.iterrows(), timestamps)
    ]
