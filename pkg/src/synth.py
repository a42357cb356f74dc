"""
Synthetic regime-switching stochastic volatility market.

Simulates
    dS/S = (r - d - theta mu_bar) dt + v dW1 + (e^J - 1) dN
    dv   = mu(v) dt + gamma(v) dW1 + eta(v) dW2
under a schedule of regimes, prices European options with Black-Scholes,
the lognormal SABR smile or Monte Carlo, and emits quote streams with the
true regime label of every timestamp.

合成的狀態切換隨機波動率市場，用作已知真值的測試數據。
"""

import os
import sys
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import brentq
from scipy.stats import norm

# Add parent directory to path to import config.py
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
import config
from src.errors import ConfigError, PriceBoundsError
from src.market_data import OptionQuote, PanelMatrix, format_timestamp, to_utc

ScalarFn = Callable[[np.ndarray], np.ndarray]


###############################
# MODEL SPECIFICATION
# 模型設定
###############################

@dataclass(frozen=True)
class SvModelSpec:
    """
    One regime's dynamics. mu_fn, gamma_fn and eta_fn act element-wise on arrays of v.

    sabr holds (rho, nu) when the regime is lognormal SABR, which has an
    analytic smile; other regimes are priced by Monte Carlo.
    """
    mu_fn: ScalarFn
    gamma_fn: ScalarFn
    eta_fn: ScalarFn
    v0: float
    s0: float = config.SYNTH_S0
    r: float = config.RISK_FREE_RATE
    d: float = config.DIVIDEND_YIELD
    jump_intensity: float = 0.0
    jump_mean: float = 0.0
    jump_sd: float = 0.0
    name: str = "regime"
    sabr: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if not self.v0 > 0:
            raise ConfigError(f"{self.name}: v0 must be positive")
        if not self.s0 > 0:
            raise ConfigError(f"{self.name}: s0 must be positive")
        if self.jump_intensity < 0 or self.jump_sd < 0:
            raise ConfigError(f"{self.name}: jump_intensity and jump_sd must be non-negative")

    @property
    def mean_jump(self) -> float:
        """E[e^J - 1] for normal log jump sizes."""
        return math.exp(self.jump_mean + 0.5 * self.jump_sd ** 2) - 1.0


def sabr_model(v0: float, rho: float, nu: float, name: str = "sabr", **kwargs) -> SvModelSpec:
    """gamma = rho nu v, eta = sqrt(1 - rho^2) nu v, mu = 0."""
    if not -1 < rho < 1 or nu < 0:
        raise ConfigError(f"{name}: need -1 < rho < 1 and nu >= 0")
    eta_scale = math.sqrt(1.0 - rho ** 2) * nu
    return SvModelSpec(
        mu_fn=lambda v: np.zeros_like(v),
        gamma_fn=lambda v: rho * nu * v,
        eta_fn=lambda v: eta_scale * v,
        v0=v0, name=name, sabr=(rho, nu), **kwargs)


def mean_reverting_model(v0: float, kappa: float, theta: float, rho: float, nu: float,
                         name: str = "mean_reverting", **kwargs) -> SvModelSpec:
    """mu = kappa (theta - v) with SABR-like diffusion terms."""
    if not -1 < rho < 1 or nu < 0:
        raise ConfigError(f"{name}: need -1 < rho < 1 and nu >= 0")
    eta_scale = math.sqrt(1.0 - rho ** 2) * nu
    return SvModelSpec(
        mu_fn=lambda v: kappa * (theta - v),
        gamma_fn=lambda v: rho * nu * v,
        eta_fn=lambda v: eta_scale * v,
        v0=v0, name=name, **kwargs)


def constant_vol_model(v0: float, name: str = "constant", **kwargs) -> SvModelSpec:
    return sabr_model(v0, 0.0, 0.0, name=name, **kwargs)


def model_from_config(regime: config.RegimeConfig, s0: float, r: float, d: float) -> SvModelSpec:
    common = dict(s0=s0, r=r, d=d, jump_intensity=regime.jump_intensity,
                  jump_mean=regime.jump_mean, jump_sd=regime.jump_sd)
    if regime.kind == "sabr":
        return sabr_model(regime.v0, regime.rho, regime.nu, name=regime.name, **common)
    if regime.kind == "mean_reverting":
        return mean_reverting_model(regime.v0, regime.kappa, regime.theta, regime.rho, regime.nu,
                                    name=regime.name, **common)
    if regime.kind == "constant":
        return constant_vol_model(regime.v0, name=regime.name, **common)
    raise ConfigError(f"unknown regime kind '{regime.kind}'")


@dataclass
class RegimeSchedule:
    """Contiguous (start step, model) segments; the first starts at step 0."""
    segments: List[Tuple[int, SvModelSpec]]

    def __post_init__(self):
        starts = [start for start, _ in self.segments]
        if not starts or starts[0] != 0:
            raise ConfigError("regime schedule must start at step 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ConfigError("regime segment starts must be strictly increasing")
        names: Dict[str, int] = {}
        for _, model in self.segments:
            names.setdefault(model.name, len(names))
        self._label_of = names

    @property
    def model_names(self) -> List[str]:
        return list(self._label_of)

    def segment_index(self, step: int) -> int:
        index = 0
        for i, (start, _) in enumerate(self.segments):
            if start <= step:
                index = i
        return index

    def model_at(self, step: int) -> SvModelSpec:
        return self.segments[self.segment_index(step)][1]

    def label_at(self, step: int) -> int:
        """Distinct models are numbered in order of first appearance."""
        return self._label_of[self.model_at(step).name]

    def is_boundary(self, step: int) -> bool:
        return step > 0 and any(start == step for start, _ in self.segments)


###############################
# PATH SIMULATION
# 路徑模擬
###############################

@dataclass
class SimulatedPath:
    times: np.ndarray
    spot: np.ndarray  # n_paths x (n_steps + 1)
    vol: np.ndarray  # n_paths x (n_steps + 1)
    labels: np.ndarray  # n_steps + 1
    jump_counts: np.ndarray  # n_paths
    reflections: int = 0


def _step(model: SvModelSpec, s: np.ndarray, v: np.ndarray, dt: float, rng: np.random.Generator,
          z1: Optional[np.ndarray] = None, z2: Optional[np.ndarray] = None):
    """One Euler step: log-Euler on S, reflected Euler on v. Returns (s, v, jumps, reflections)."""
    n = len(s)
    z1 = rng.standard_normal(n) if z1 is None else z1
    z2 = rng.standard_normal(n) if z2 is None else z2
    dw1 = math.sqrt(dt) * z1
    dw2 = math.sqrt(dt) * z2

    log_jump = np.zeros(n)
    jumps = np.zeros(n, dtype=int)
    if model.jump_intensity > 0:
        jumps = rng.poisson(model.jump_intensity * dt, n)
        log_jump = jumps * model.jump_mean + np.sqrt(jumps) * model.jump_sd * rng.standard_normal(n)

    drift = model.r - model.d - model.jump_intensity * model.mean_jump - 0.5 * v ** 2
    s_next = s * np.exp(drift * dt + v * dw1 + log_jump)
    v_next = v + model.mu_fn(v) * dt + model.gamma_fn(v) * dw1 + model.eta_fn(v) * dw2
    negative = v_next < 0
    return s_next, np.abs(v_next), jumps, int(np.count_nonzero(negative))


def simulate_paths(schedule: RegimeSchedule, dt: float, horizon: float, seed: int = config.SYNTH_SEED,
                   n_paths: int = 1, s0: Optional[float] = None) -> SimulatedPath:
    """
    Euler-Maruyama paths of (S, v) under the regime schedule.

    Volatility restarts at the new regime's v0 at every segment boundary.
    Negative volatility steps are reflected to |v| and counted.

    Args:
        schedule: Regime segments indexed by step
        dt: Step in years
        horizon: Length in years, a multiple of dt
        seed: Generator seed
        n_paths: Independent paths
    """
    if dt <= 0 or horizon <= 0:
        raise ConfigError("dt and horizon must be positive")
    n_steps = int(round(horizon / dt))
    if abs(n_steps * dt - horizon) > 1e-9 * horizon:
        raise ConfigError(f"horizon {horizon} is not a multiple of dt {dt}")

    rng = np.random.default_rng(seed)
    first = schedule.model_at(0)
    spot = np.empty((n_paths, n_steps + 1))
    vol = np.empty((n_paths, n_steps + 1))
    spot[:, 0] = first.s0 if s0 is None else s0
    vol[:, 0] = first.v0
    labels = np.array([schedule.label_at(i) for i in range(n_steps + 1)], dtype=int)
    jump_counts = np.zeros(n_paths, dtype=int)
    reflections = 0

    for i in range(n_steps):
        model = schedule.model_at(i)
        if schedule.is_boundary(i):
            vol[:, i] = model.v0
        spot[:, i + 1], vol[:, i + 1], jumps, reflected = _step(model, spot[:, i], vol[:, i], dt, rng)
        jump_counts += jumps
        reflections += reflected
    if schedule.is_boundary(n_steps):
        vol[:, n_steps] = schedule.model_at(n_steps).v0

    if reflections:
        warnings.warn(f"volatility reflected at zero {reflections} times")
    return SimulatedPath(times=np.arange(n_steps + 1) * dt, spot=spot, vol=vol, labels=labels,
                         jump_counts=jump_counts, reflections=reflections)


###############################
# BLACK-SCHOLES
# 布萊克-斯科爾斯
###############################

def _is_call(kind) -> np.ndarray:
    kinds = np.asarray(kind)
    return np.char.lower(kinds.astype(str)) == "call"


def bs_price(spot, strike, tau, r, d, vol, kind="call"):
    """
    Black-Scholes price with continuous rates; arrays broadcast.

    tau <= 0 gives intrinsic value and vol * sqrt(tau) -> 0 gives the
    discounted forward intrinsic value.
    """
    spot, strike, tau, vol = (np.asarray(a, dtype=float) for a in (spot, strike, tau, vol))
    call = _is_call(kind)
    tau_pos = np.maximum(tau, 0.0)
    forward = spot * np.exp((r - d) * tau_pos)
    discount = np.exp(-r * tau_pos)
    total = vol * np.sqrt(tau_pos)

    with np.errstate(divide="ignore", invalid="ignore"):
        safe_total = np.where(total > 1e-300, total, 1.0)
        d1 = (np.log(forward / strike) + 0.5 * total ** 2) / safe_total
        d2 = d1 - total
        call_value = discount * (forward * norm.cdf(d1) - strike * norm.cdf(d2))
        put_value = discount * (strike * norm.cdf(-d2) - forward * norm.cdf(-d1))

    value = np.where(call, call_value, put_value)
    limit = np.where(call, discount * np.maximum(forward - strike, 0.0), discount * np.maximum(strike - forward, 0.0))
    value = np.where(total > 1e-300, value, limit)
    intrinsic = np.where(call, np.maximum(spot - strike, 0.0), np.maximum(strike - spot, 0.0))
    value = np.where(tau > 0, value, intrinsic)
    return float(value) if np.ndim(value) == 0 else value


def price_bounds(spot, strike, tau, r, d, kind="call") -> Tuple[np.ndarray, np.ndarray]:
    """No-arbitrage (lower, upper) price bounds of a European option."""
    spot_pv = np.asarray(spot, dtype=float) * np.exp(-d * np.asarray(tau, dtype=float))
    strike_pv = np.asarray(strike, dtype=float) * np.exp(-r * np.asarray(tau, dtype=float))
    call = _is_call(kind)
    lower = np.where(call, np.maximum(spot_pv - strike_pv, 0.0), np.maximum(strike_pv - spot_pv, 0.0))
    upper = np.where(call, spot_pv, strike_pv)
    return lower, upper


def implied_vol(price: float, spot: float, strike: float, tau: float, r: float, d: float,
                kind: str = "call") -> float:
    """
    Black-Scholes implied volatility by Brent's method.

    Raises:
        PriceBoundsError: Price on or outside the no-arbitrage bounds
    """
    lower, upper = (float(b) for b in price_bounds(spot, strike, tau, r, d, kind))
    if not lower < price < upper or tau <= 0:
        raise PriceBoundsError(price, lower, upper)

    def objective(vol):
        return bs_price(spot, strike, tau, r, d, vol, kind) - price

    high = 5.0
    while objective(high) < 0:
        high *= 2.0
        if high > 1e4:
            raise PriceBoundsError(price, lower, upper)
    return brentq(objective, 1e-12, high, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def implied_vol_array(price, spot, strike, tau, r, d, kind="call", iterations: int = 200) -> np.ndarray:
    """Vectorized bisection; NaN where the price violates the bounds."""
    price, spot, strike, tau = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (price, spot, strike, tau)))
    kind = np.broadcast_to(np.asarray(kind), price.shape)
    lower_bound, upper_bound = price_bounds(spot, strike, tau, r, d, kind)
    valid = (price > lower_bound) & (price < upper_bound) & (tau > 0)

    low = np.full(price.shape, 1e-8)
    high = np.full(price.shape, 10.0)
    for _ in range(iterations):
        mid = 0.5 * (low + high)
        above = bs_price(spot, strike, tau, r, d, mid, kind) > price
        high = np.where(above, mid, high)
        low = np.where(above, low, mid)
    return np.where(valid, 0.5 * (low + high), np.nan)


def sabr_smile(k, tau, alpha: float, rho: float, nu: float):
    """
    Lognormal (beta = 1) SABR implied volatility in log-moneyness k = ln(K / F).
    """
    k = np.asarray(k, dtype=float)
    tau = np.asarray(tau, dtype=float)
    z = -(nu / alpha) * k
    with np.errstate(divide="ignore", invalid="ignore"):
        chi = np.log((np.sqrt(1.0 - 2.0 * rho * z + z ** 2) + z - rho) / (1.0 - rho))
        ratio = np.where(np.abs(z) > 1e-6, z / chi, 1.0 - 0.5 * rho * z + (2.0 - 3.0 * rho ** 2) * z ** 2 / 12.0)
    correction = 1.0 + (0.25 * rho * nu * alpha + (2.0 - 3.0 * rho ** 2) * nu ** 2 / 24.0) * tau
    value = alpha * ratio * correction
    return float(value) if np.ndim(value) == 0 else value


###############################
# QUOTE EMISSION
# 報價生成
###############################

@dataclass
class EmittedQuotes:
    quotes: List[OptionQuote]
    timestamps: pd.DatetimeIndex
    labels: np.ndarray
    vol: np.ndarray
    spot: np.ndarray
    regime_names: List[str] = field(default_factory=list)


def instrument_name(expiry_days: float, moneyness: float) -> str:
    kind = "P" if moneyness < 1.0 else "C"
    return f"SYN-{expiry_days:g}D-{moneyness:.2f}-{kind}"


def monte_carlo_smile(model: SvModelSpec, spot: float, v: float, taus: Sequence[float],
                      moneyness: Sequence[float], rng: np.random.Generator,
                      n_paths: int = config.SYNTH_MC_PATHS,
                      steps_per_day: int = config.SYNTH_MC_STEPS_PER_DAY) -> np.ndarray:
    """
    Implied volatilities (len(taus) x len(moneyness)) from antithetic Monte
    Carlo prices of out-of-the-money options. One set of sub-paths covers
    every maturity.
    """
    taus = np.asarray(taus, dtype=float)
    moneyness = np.asarray(moneyness, dtype=float)
    half = max(n_paths // 2, 1)
    dt = 1.0 / (config.DAYS_PER_YEAR * steps_per_day)
    checkpoints = {int(round(t / dt)): j for j, t in enumerate(taus)}
    n_steps = max(checkpoints)

    s = np.full(2 * half, spot)
    vol = np.full(2 * half, v)
    terminal = np.empty((len(taus), 2 * half))
    for step in range(1, n_steps + 1):
        z1 = rng.standard_normal(half)
        z2 = rng.standard_normal(half)
        s, vol, _, _ = _step(model, s, vol, dt, rng, np.concatenate([z1, -z1]), np.concatenate([z2, -z2]))
        if step in checkpoints:
            terminal[checkpoints[step]] = s

    smile = np.empty((len(taus), len(moneyness)))
    for j, tau in enumerate(taus):
        forward = spot * math.exp((model.r - model.d) * tau)
        strikes = moneyness * forward
        kinds = np.where(moneyness < 1.0, "put", "call")
        payoff = np.where(kinds[:, None] == "call",
                          np.maximum(terminal[j][None, :] - strikes[:, None], 0.0),
                          np.maximum(strikes[:, None] - terminal[j][None, :], 0.0))
        prices = math.exp(-model.r * tau) * payoff.mean(axis=1)
        smile[j] = implied_vol_array(prices, spot, strikes, tau, model.r, model.d, kinds)
    return smile


def emit_quotes(path: SimulatedPath, schedule: RegimeSchedule, start: pd.Timestamp,
                quote_interval: pd.Timedelta,
                strike_grid: Sequence[float] = config.SYNTH_STRIKE_MONEYNESS,
                expiry_grid: Sequence[float] = config.SYNTH_EXPIRY_DAYS,
                iv_noise_sd: float = config.SYNTH_IV_NOISE_SD,
                missing_rate: float = config.SYNTH_MISSING_RATE,
                seed: int = config.SYNTH_SEED,
                mc_paths: int = config.SYNTH_MC_PATHS,
                mc_steps_per_day: int = config.SYNTH_MC_STEPS_PER_DAY) -> EmittedQuotes:
    """
    Quote every (expiry, moneyness) instrument at every path timestamp.

    Instruments have constant maturity and constant strike/forward, puts below
    moneyness 1 and calls otherwise. SABR regimes use the analytic smile, other
    regimes Monte Carlo prices inverted to implied volatility.

    Args:
        path: First path of a simulate_paths result supplies S and v
        schedule: The schedule the path was simulated under
        start: Timestamp of path step 0
        quote_interval: Time between path steps
    """
    if len(strike_grid) == 0 or len(expiry_grid) == 0:
        raise ConfigError("strike and expiry grids must not be empty")

    start = to_utc(start)
    moneyness = np.asarray(strike_grid, dtype=float)
    expiries = np.asarray(expiry_grid, dtype=float)
    taus = expiries / config.DAYS_PER_YEAR
    n_times = path.spot.shape[1]
    timestamps = pd.DatetimeIndex([start + i * quote_interval for i in range(n_times)])
    names = [[instrument_name(e, m) for m in moneyness] for e in expiries]
    kinds = ["put" if m < 1.0 else "call" for m in moneyness]

    quotes: List[OptionQuote] = []
    for i, ts in enumerate(timestamps):
        model = schedule.model_at(i)
        spot = float(path.spot[0, i])
        v = float(path.vol[0, i])
        if model.sabr is not None:
            rho, nu = model.sabr
            smile = sabr_smile(np.log(moneyness)[None, :], taus[:, None], v, rho, nu)
        else:
            smile = monte_carlo_smile(model, spot, v, taus, moneyness, np.random.default_rng([seed, i]),
                                      mc_paths, mc_steps_per_day)

        rng = np.random.default_rng([seed, i, 1])
        noise = rng.standard_normal(smile.shape) * iv_noise_sd
        dropped = rng.random(smile.shape) < missing_rate
        for j, (days, tau) in enumerate(zip(expiries, taus)):
            forward = spot * math.exp((model.r - model.d) * tau)
            expiry = ts + pd.Timedelta(days=float(days))
            for m_idx, m in enumerate(moneyness):
                iv = smile[j, m_idx] + noise[j, m_idx]
                if dropped[j, m_idx] or not np.isfinite(iv) or iv <= 0:
                    continue
                quotes.append(OptionQuote(
                    timestamp=ts,
                    instrument_id=names[j][m_idx],
                    expiry=expiry,
                    strike=float(m * forward),
                    option_kind=kinds[m_idx],
                    underlying_price=spot,
                    implied_vol=float(iv),
                ))

    return EmittedQuotes(quotes=quotes, timestamps=timestamps, labels=path.labels.copy(),
                         vol=path.vol[0].copy(), spot=path.spot[0].copy(), regime_names=schedule.model_names)


def schedule_from_config(syn: config.SyntheticConfig, r: float, d: float) -> RegimeSchedule:
    models = {regime.name: model_from_config(regime, syn.s0, r, d) for regime in syn.regimes}
    return RegimeSchedule([(segment.start, models[segment.regime]) for segment in syn.segments])


def simulate_market(syn: config.SyntheticConfig, sampling_interval_minutes: int,
                    r: float = config.RISK_FREE_RATE, d: float = config.DIVIDEND_YIELD
                    ) -> Tuple[EmittedQuotes, RegimeSchedule]:
    """Path plus quotes for a synthetic source section of the pipeline file."""
    schedule = schedule_from_config(syn, r, d)
    interval = pd.Timedelta(minutes=sampling_interval_minutes)
    dt = sampling_interval_minutes / (config.DAYS_PER_YEAR * 24 * 60)
    n_steps = int(round(syn.horizon_days * 24 * 60 / sampling_interval_minutes))
    path = simulate_paths(schedule, dt, n_steps * dt, seed=syn.seed)
    emitted = emit_quotes(path, schedule, pd.Timestamp(syn.start), interval,
                          syn.strike_moneyness, syn.expiry_days, syn.iv_noise_sd, syn.missing_rate,
                          syn.seed, syn.mc_paths, syn.mc_steps_per_day)
    return emitted, schedule


def write_truth(path: str, emitted: EmittedQuotes, schedule: RegimeSchedule,
                config_hash: Optional[str] = None, v_grid: Optional[np.ndarray] = None):
    """Truth sidecar: labels and v per timestamp, model functions tabulated on a v grid."""
    if v_grid is None:
        v_grid = np.linspace(0.05, 2.0, 40)
    models = {}
    for _, model in schedule.segments:
        if model.name in models:
            continue
        eta = np.asarray(model.eta_fn(v_grid), dtype=float)
        models[model.name] = {
            "v0": model.v0,
            "sabr": list(model.sabr) if model.sabr is not None else None,
            "jump_intensity": model.jump_intensity,
            "v": v_grid.tolist(),
            "mu": np.asarray(model.mu_fn(v_grid), dtype=float).tolist(),
            "gamma": np.asarray(model.gamma_fn(v_grid), dtype=float).tolist(),
            "eta2": (eta ** 2).tolist(),
        }
    truth = {
        "config_hash": config_hash,
        "regime_names": emitted.regime_names,
        "timestamps": [format_timestamp(ts) for ts in emitted.timestamps],
        "labels": emitted.labels.astype(int).tolist(),
        "v": [float(f"{x:.12g}") for x in emitted.vol],
        "models": models,
    }
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as f:
        json.dump(truth, f, indent=1)


def read_truth(path: str) -> Dict:
    with open(path) as f:
        truth = json.load(f)
    truth["timestamps"] = pd.to_datetime(truth["timestamps"], utc=True)
    truth["labels"] = np.asarray(truth["labels"], dtype=int)
    return truth


###############################
# GAUSSIAN REGIME PANELS
# 高斯狀態面板
###############################

def simulate_regime_panel(n_assets: int = 10, n_timestamps: int = 400, n_regimes: int = 2,
                          block_length: int = 100, seed: int = 0, mean_gap: float = 0.5,
                          noise: float = 0.02, start: str = config.SYNTH_START,
                          sampling_interval_minutes: int = config.SAMPLING_INTERVAL_MINUTES
                          ) -> Tuple[PanelMatrix, np.ndarray]:
    """
    Assets x timestamps Gaussian panel whose regimes alternate in blocks.

    Regime c has mean level 0.5 + c * mean_gap and its own random covariance
    of scale noise^2.

    Returns:
        tuple: (PanelMatrix, true label per timestamp)
    """
    rng = np.random.default_rng(seed)
    labels = (np.arange(n_timestamps) // block_length) % n_regimes
    values = np.empty((n_timestamps, n_assets))
    for c in range(n_regimes):
        loadings = rng.standard_normal((n_assets, n_assets))
        cov = noise ** 2 * (loadings @ loadings.T / n_assets + 0.5 * np.eye(n_assets))
        mean = 0.5 + c * mean_gap + 0.05 * rng.standard_normal(n_assets)
        members = labels == c
        values[members] = rng.multivariate_normal(mean, cov, size=int(members.sum()))

    interval = pd.Timedelta(minutes=sampling_interval_minutes)
    first = to_utc(start)
    panel = PanelMatrix(
        asset_ids=[f"ASSET-{i:02d}" for i in range(n_assets)],
        timestamps=pd.DatetimeIndex([first + i * interval for i in range(n_timestamps)]),
        values=values.T.copy(),
        mask=np.ones((n_assets, n_timestamps), dtype=bool),
    )
    return panel, labels
