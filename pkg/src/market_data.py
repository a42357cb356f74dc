"""
Option quote ingestion, normalization, liquidity filters and panel construction.

Quotes are converted to (timestamp, tau, log-moneyness, iv) observations,
filtered for the clustering and surface stages, and pivoted into
instrument x timestamp panels on the sampling grid.

期權報價讀取、標準化、流動性篩選和面板構建。
"""

import os
import sys
import json
import math
import datetime
import warnings
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

# Add parent directory to path to import config.py
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
import config
from src.errors import (ConfigError, DataError, InsufficientObservationsError, InsufficientPanelError,
                        MissingInstantaneousVolError, NoLiquidOptionsError)

SECONDS_PER_YEAR = config.DAYS_PER_YEAR * 86400.0
BOUNDARY_TOLERANCE = 1e-12
DERIBIT_SETTLEMENT_HOUR = 8

QUOTE_COLUMNS = ["timestamp", "instrument", "expiry", "strike", "kind", "underlying_price", "implied_vol"]

# Rejection reason codes
EXPIRED = "EXPIRED"
NON_POSITIVE_IV = "NON_POSITIVE_IV"
NON_POSITIVE_STRIKE = "NON_POSITIVE_STRIKE"
NON_POSITIVE_UNDERLYING = "NON_POSITIVE_UNDERLYING"


@dataclass(frozen=True)
class OptionQuote:
    timestamp: pd.Timestamp
    instrument_id: str
    expiry: pd.Timestamp
    strike: float
    option_kind: str  # call | put
    underlying_price: float
    implied_vol: float


@dataclass(frozen=True)
class IvObservation:
    timestamp: pd.Timestamp
    tau: float
    k: float
    iv: float
    instrument_id: str = ""


@dataclass(frozen=True)
class RejectedQuote:
    index: int
    instrument_id: str
    reason: str


@dataclass(frozen=True)
class RollingWindowSpec:
    """
    Rolling window layout on the quote sampling grid.

    滾動窗口規格。
    """
    window_length: pd.Timedelta = pd.Timedelta(minutes=config.WINDOW_LENGTH_MINUTES)
    step: pd.Timedelta = pd.Timedelta(minutes=config.WINDOW_STEP_MINUTES)
    sampling_interval: pd.Timedelta = pd.Timedelta(minutes=config.SAMPLING_INTERVAL_MINUTES)

    def __post_init__(self):
        if self.sampling_interval <= pd.Timedelta(0) or self.window_length <= pd.Timedelta(0):
            raise ConfigError("window_length and sampling_interval must be positive")
        if self.step <= pd.Timedelta(0):
            raise ConfigError("step must be positive")
        if self.window_length % self.sampling_interval != pd.Timedelta(0):
            raise ConfigError("window_length must be an integer multiple of sampling_interval")
        if self.step % self.sampling_interval != pd.Timedelta(0):
            raise ConfigError("step must be an integer multiple of sampling_interval")

    @classmethod
    def from_minutes(cls, window_length: int, step: int, sampling_interval: int) -> "RollingWindowSpec":
        return cls(pd.Timedelta(minutes=window_length), pd.Timedelta(minutes=step),
                   pd.Timedelta(minutes=sampling_interval))


@dataclass
class PanelMatrix:
    """
    Instrument x timestamp implied volatility panel.

    values has no missing entries after imputation; mask marks the entries
    that were originally observed.
    """
    asset_ids: List[str]
    timestamps: pd.DatetimeIndex
    values: np.ndarray
    mask: np.ndarray

    @property
    def n_assets(self) -> int:
        return len(self.asset_ids)

    @property
    def n_timestamps(self) -> int:
        return len(self.timestamps)

    def observations(self) -> np.ndarray:
        """Timestamp-major view (T x n) used by clustering."""
        return self.values.T


def to_utc(value) -> pd.Timestamp:
    ts = pd.Timestamp(value)
    if ts.tzinfo is None:
        return ts.tz_localize("UTC")
    return ts.tz_convert("UTC")


def format_timestamp(ts: pd.Timestamp) -> str:
    return to_utc(ts).strftime("%Y-%m-%dT%H:%M:%SZ")


def year_fraction(start: pd.Timestamp, end: pd.Timestamp) -> float:
    """ACT/365 with fractional days."""
    return (end - start).total_seconds() / SECONDS_PER_YEAR


###############################
# NORMALIZATION
# 標準化
###############################

def normalize_with_rejections(quotes: Sequence[OptionQuote], r: float = config.RISK_FREE_RATE,
                              d: float = config.DIVIDEND_YIELD) -> Tuple[List[IvObservation], List[RejectedQuote]]:
    """
    Convert quotes to IV observations, collecting rejected records.

    Args:
        quotes: Option quotes
        r: Continuously compounded risk-free rate
        d: Continuous dividend yield

    Returns:
        tuple: (observations, rejected quotes with reason codes)
    """
    if not (math.isfinite(r) and math.isfinite(d)):
        raise ConfigError(f"rates must be finite, got r={r}, d={d}")
    if len(quotes) == 0:
        raise DataError("no quotes to normalize")

    observations: List[IvObservation] = []
    rejected: List[RejectedQuote] = []
    for index, quote in enumerate(quotes):
        reason = None
        if quote.expiry <= quote.timestamp:
            reason = EXPIRED
        elif not quote.implied_vol > 0:
            reason = NON_POSITIVE_IV
        elif not quote.strike > 0:
            reason = NON_POSITIVE_STRIKE
        elif not quote.underlying_price > 0:
            reason = NON_POSITIVE_UNDERLYING
        if reason is not None:
            rejected.append(RejectedQuote(index, quote.instrument_id, reason))
            continue

        tau = year_fraction(quote.timestamp, quote.expiry)
        forward = quote.underlying_price * math.exp((r - d) * tau)
        observations.append(IvObservation(
            timestamp=quote.timestamp,
            tau=tau,
            k=math.log(quote.strike / forward),
            iv=float(quote.implied_vol),
            instrument_id=quote.instrument_id,
        ))
    return observations, rejected


def normalize(quotes: Sequence[OptionQuote], r: float = config.RISK_FREE_RATE,
              d: float = config.DIVIDEND_YIELD) -> List[IvObservation]:
    """
    Convert quotes to IV observations.

    tau is the ACT/365 year fraction to expiry and k = ln(strike / forward)
    with forward = underlying * exp((r - d) * tau). Rejected quotes are
    dropped with a warning.

    將報價轉換為隱含波動率觀測值。
    """
    observations, rejected = normalize_with_rejections(quotes, r, d)
    if rejected:
        counts: Dict[str, int] = {}
        for item in rejected:
            counts[item.reason] = counts.get(item.reason, 0) + 1
        warnings.warn(f"rejected {len(rejected)} quotes: {counts}")
    return observations


###############################
# FILTERS
# 篩選
###############################

def filter_for_clustering(obs: Sequence[IvObservation],
                          moneyness_band: Tuple[float, float] = config.CLUSTER_MONEYNESS_BAND,
                          max_tau_days: float = config.CLUSTER_MAX_TAU_DAYS) -> List[IvObservation]:
    """
    Keep liquid short-maturity observations: strike/forward within the band
    and tau at most max_tau_days, both boundaries inclusive.

    Raises:
        NoLiquidOptionsError: Nothing survives the filter
    """
    low, high = moneyness_band
    if not 0 < low < high:
        raise ConfigError(f"moneyness band must satisfy 0 < low < high, got {moneyness_band}")
    k_low, k_high = math.log(low), math.log(high)
    tau_max = max_tau_days / config.DAYS_PER_YEAR

    kept = [o for o in obs
            if k_low - BOUNDARY_TOLERANCE <= o.k <= k_high + BOUNDARY_TOLERANCE
            and o.tau <= tau_max + BOUNDARY_TOLERANCE]
    if not kept:
        raise NoLiquidOptionsError(
            f"no liquid options with moneyness in [{low}, {high}] and maturity <= {max_tau_days} days")
    return kept


def filter_for_isvm(obs: Sequence[IvObservation], tau_range_days: Tuple[float, float],
                    v_by_timestamp: Mapping[pd.Timestamp, float]) -> List[IvObservation]:
    """
    Keep observations with tau in the day range (inclusive) and
    |k| <= v_t * sqrt(tau).

    Raises:
        MissingInstantaneousVolError: No v_t for a timestamp present in obs
    """
    tau_low = tau_range_days[0] / config.DAYS_PER_YEAR
    tau_high = tau_range_days[1] / config.DAYS_PER_YEAR

    kept = []
    for o in obs:
        if o.timestamp not in v_by_timestamp:
            raise MissingInstantaneousVolError(format_timestamp(o.timestamp))
        if not tau_low - BOUNDARY_TOLERANCE <= o.tau <= tau_high + BOUNDARY_TOLERANCE:
            continue
        if abs(o.k) <= v_by_timestamp[o.timestamp] * math.sqrt(o.tau) + BOUNDARY_TOLERANCE:
            kept.append(o)
    return kept


###############################
# INSTANTANEOUS VOLATILITY
# 瞬時波動率
###############################

def estimate_instantaneous_vol(obs: Sequence[IvObservation]) -> float:
    """
    Implied volatility of the observation closest to (tau, k) = (0, 0).

    Distance is sqrt((tau / max tau)^2 + (k / max |k|)^2) over the given
    observations; ties go to smaller tau, then smaller |k|, then instrument id.
    """
    if len(obs) == 0:
        raise InsufficientObservationsError("no observations to estimate instantaneous volatility", 0)

    tau_norm = max(o.tau for o in obs)
    k_norm = max(abs(o.k) for o in obs)
    tau_norm = tau_norm if tau_norm > 0 else 1.0
    k_norm = k_norm if k_norm > 0 else 1.0

    def key(o: IvObservation):
        distance = math.hypot(o.tau / tau_norm, o.k / k_norm)
        return (distance, o.tau, abs(o.k), o.instrument_id)

    return min(obs, key=key).iv


def group_by_timestamp(obs: Iterable[IvObservation]) -> "OrderedDict[pd.Timestamp, List[IvObservation]]":
    """Group observations by timestamp in increasing time order."""
    groups: Dict[pd.Timestamp, List[IvObservation]] = {}
    for o in obs:
        groups.setdefault(o.timestamp, []).append(o)
    return OrderedDict((ts, groups[ts]) for ts in sorted(groups))


def instantaneous_vols(obs: Iterable[IvObservation]) -> "OrderedDict[pd.Timestamp, float]":
    """estimate_instantaneous_vol applied per timestamp."""
    return OrderedDict((ts, estimate_instantaneous_vol(group)) for ts, group in group_by_timestamp(obs).items())


def observations_to_frame(obs: Sequence[IvObservation]) -> pd.DataFrame:
    return pd.DataFrame({
        "timestamp": [o.timestamp for o in obs],
        "instrument_id": [o.instrument_id for o in obs],
        "tau": np.array([o.tau for o in obs], dtype=float),
        "k": np.array([o.k for o in obs], dtype=float),
        "iv": np.array([o.iv for o in obs], dtype=float),
    })


###############################
# PANELS AND WINDOWS
# 面板和窗口
###############################

def window_count(spec: RollingWindowSpec) -> int:
    """Number of sampling timestamps per rolling window."""
    return int(spec.window_length // spec.sampling_interval)


def sampling_grid(start: pd.Timestamp, end: pd.Timestamp, interval: pd.Timedelta) -> pd.DatetimeIndex:
    """Grid start, start + interval, ... strictly before end."""
    start = to_utc(start)
    n = int(math.ceil((to_utc(end) - start) / interval))
    return pd.DatetimeIndex([start + i * interval for i in range(max(n, 0))])


def rolling_windows(timestamps: Sequence[pd.Timestamp], spec: RollingWindowSpec) -> List[Tuple[int, int]]:
    """
    Index slices (start, end) of every full window over an equally spaced grid.

    Windows hold window_count(spec) timestamps and advance by step.
    """
    count = window_count(spec)
    stride = int(spec.step // spec.sampling_interval)
    return [(start, start + count) for start in range(0, len(timestamps) - count + 1, stride)]


def build_panel(obs: Sequence[IvObservation], spec: RollingWindowSpec,
                missing_threshold: float = config.MISSING_THRESHOLD,
                start: Optional[pd.Timestamp] = None,
                end: Optional[pd.Timestamp] = None) -> PanelMatrix:
    """
    Pivot observations into an imputed instrument x timestamp panel.

    The grid starts at `start` (default: first observation) and runs in
    sampling_interval steps up to `end` exclusive (default: one window length
    after start when start is given, otherwise through the last observation).
    Observations outside the grid range are ignored. Rows observed on less than
    missing_threshold of the grid are dropped, the rest are forward filled then
    backward filled along time.

    構建缺失值插補後的面板矩陣。

    Raises:
        DataError: An observation falls between grid points
        InsufficientPanelError: Fewer than two instruments survive
    """
    if not 0 < missing_threshold <= 1:
        raise ConfigError(f"missing_threshold must be in (0, 1], got {missing_threshold}")
    if len(obs) == 0:
        raise InsufficientPanelError("no observations to build a panel from")

    frame = observations_to_frame(obs)
    interval = spec.sampling_interval
    if start is None:
        start = frame["timestamp"].min()
        if end is None:
            end = frame["timestamp"].max() + interval
    elif end is None:
        end = to_utc(start) + spec.window_length
    grid = sampling_grid(start, end, interval)

    in_range = (frame["timestamp"] >= grid[0]) & (frame["timestamp"] <= grid[-1])
    frame = frame[in_range]
    off_grid = ((frame["timestamp"] - grid[0]) % interval) != pd.Timedelta(0)
    if off_grid.any():
        bad = frame.loc[off_grid, "timestamp"].iloc[0]
        raise DataError(f"timestamp {format_timestamp(bad)} is not on the {interval} sampling grid")

    table = (frame.pivot_table(index="instrument_id", columns="timestamp", values="iv", aggfunc="last")
             .reindex(columns=grid)
             .sort_index())
    observed = table.notna()
    fraction = observed.mean(axis=1)
    keep = fraction >= missing_threshold - BOUNDARY_TOLERANCE
    table = table[keep]
    observed = observed[keep]
    if len(table) < 2:
        raise InsufficientPanelError(
            f"only {len(table)} instruments observed on at least {missing_threshold:.0%} of the window")

    filled = table.ffill(axis=1).bfill(axis=1)
    return PanelMatrix(
        asset_ids=[str(i) for i in table.index],
        timestamps=grid,
        values=filled.to_numpy(dtype=float),
        mask=observed.to_numpy(dtype=bool),
    )


def write_panel(panel: PanelMatrix, path: str, config_hash: Optional[str] = None):
    """Delimited matrix (rows = instruments) plus a JSON sidecar next to it."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    columns = [format_timestamp(ts) for ts in panel.timestamps]
    frame = pd.DataFrame(panel.values, index=panel.asset_ids, columns=columns)
    frame.index.name = "instrument"
    with open(path, "w", newline="") as f:
        if config_hash:
            f.write(f"# config_hash: {config_hash}\n")
        frame.to_csv(f, float_format=config.FLOAT_FORMAT)

    sidecar = {
        "config_hash": config_hash,
        "asset_ids": list(panel.asset_ids),
        "timestamps": columns,
        "mask": panel.mask.astype(int).tolist(),
    }
    with open(os.path.splitext(path)[0] + ".json", "w") as f:
        json.dump(sidecar, f, indent=1)


def read_panel(path: str) -> PanelMatrix:
    sidecar_path = os.path.splitext(path)[0] + ".json"
    if not os.path.isfile(path) or not os.path.isfile(sidecar_path):
        raise DataError(f"panel file or sidecar missing: {path}")
    frame = pd.read_csv(path, comment="#", index_col=0)
    with open(sidecar_path) as f:
        sidecar = json.load(f)
    return PanelMatrix(
        asset_ids=list(sidecar["asset_ids"]),
        timestamps=pd.DatetimeIndex(pd.to_datetime(sidecar["timestamps"], utc=True)),
        values=frame.to_numpy(dtype=float),
        mask=np.asarray(sidecar["mask"], dtype=bool),
    )


###############################
# QUOTE FILES
# 報價文件
###############################

def parse_deribit_instrument(name: str) -> Tuple[str, pd.Timestamp, float, str]:
    """
    Split a venue instrument name like BTC-25MAR22-40000-C.

    Returns:
        tuple: (underlying, expiry at 08:00 UTC, strike, kind)
    """
    parts = name.strip().split("-")
    if len(parts) != 4 or parts[3].upper() not in ("C", "P"):
        raise DataError(f"cannot parse instrument name '{name}'")
    underlying, date_part, strike_part, kind_part = parts
    try:
        day = datetime.datetime.strptime(date_part.upper(), "%d%b%y")
        strike = float(strike_part)
    except ValueError as e:
        raise DataError(f"cannot parse instrument name '{name}': {e}") from e
    expiry = pd.Timestamp(day, tz="UTC") + pd.Timedelta(hours=DERIBIT_SETTLEMENT_HOUR)
    return underlying, expiry, strike, "call" if kind_part.upper() == "C" else "put"


def _parse_kind(value: str) -> str:
    kind = str(value).strip().lower()
    if kind in ("c", "call"):
        return "call"
    if kind in ("p", "put"):
        return "put"
    raise DataError(f"unknown option kind '{value}'")


def read_quotes(path: str) -> List[OptionQuote]:
    """
    Read the delimited quote file.

    expiry, strike and kind may be empty when the instrument column carries a
    venue instrument name.

    讀取報價文件。
    """
    if not os.path.isfile(path):
        raise DataError(f"quote file does not exist: {path}")
    frame = pd.read_csv(path, comment="#", dtype={"instrument": str, "kind": str, "expiry": str})
    missing = set(QUOTE_COLUMNS) - set(frame.columns)
    if missing:
        raise DataError(f"quote file {path} is missing columns: {sorted(missing)}")

    timestamps = pd.to_datetime(frame["timestamp"], utc=True)
    quotes = []
    for row, ts in zip(frame.itertuples(index=False), timestamps):
        instrument = str(row.instrument)
        if pd.isna(row.expiry) or pd.isna(row.strike) or pd.isna(row.kind):
            _, expiry, strike, kind = parse_deribit_instrument(instrument)
        else:
            expiry, strike, kind = to_utc(row.expiry), float(row.strike), _parse_kind(row.kind)
        quotes.append(OptionQuote(
            timestamp=ts,
            instrument_id=instrument,
            expiry=expiry,
            strike=strike,
            option_kind=kind,
            underlying_price=float(row.underlying_price),
            implied_vol=float(row.implied_vol),
        ))
    return quotes


def write_quotes(path: str, quotes: Sequence[OptionQuote], config_hash: Optional[str] = None):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    frame = pd.DataFrame({
        "timestamp": [format_timestamp(q.timestamp) for q in quotes],
        "instrument": [q.instrument_id for q in quotes],
        "expiry": [format_timestamp(q.expiry) for q in quotes],
        "strike": [q.strike for q in quotes],
        "kind": [q.option_kind for q in quotes],
        "underlying_price": [q.underlying_price for q in quotes],
        "implied_vol": [q.implied_vol for q in quotes],
    }, columns=QUOTE_COLUMNS)
    with open(path, "w", newline="") as f:
        if config_hash:
            f.write(f"# config_hash: {config_hash}\n")
        frame.to_csv(f, index=False, float_format=config.FLOAT_FORMAT)
