"""
Configuration file for the regime-clustered implied stochastic volatility pipeline.

This file contains all default parameters used throughout the project,
organized by category, plus the loader for per-run YAML pipeline files.
Values in a YAML file override the defaults below; command line flags
override the YAML file.

市場狀態聚類隱含隨機波動率管線的配置文件。

本文件包含項目中使用的所有默認參數，按類別組織，並提供每次運行的 YAML 管線文件加載器。
"""
import os
import json
import hashlib
import dataclasses
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import yaml

from src.errors import ConfigError

###############################
# MARKET DATA SETTINGS
# 市場數據設置
###############################

# Rates used to build forwards
# 用於計算遠期價格的利率
RISK_FREE_RATE = 0.0  # Continuously compounded risk-free rate r (無風險利率) - Crypto venues quote inverse options; 0 keeps forward = spot
DIVIDEND_YIELD = 0.0  # Continuous dividend / funding yield d (股息率) - Nonzero values shift every forward by e^{-d tau}
DAYS_PER_YEAR = 365.0  # ACT/365 day count with fractional days (日計數基準) - Changing this rescales every tau in the pipeline

# Sampling grid
# 採樣網格
SAMPLING_INTERVAL_MINUTES = 20  # Quote grid spacing (報價網格間隔) - Finer grids give more timestamps per window but more missing data
WINDOW_LENGTH_MINUTES = 5 * 24 * 60  # Rolling window length, 5 days (滾動窗口長度) - Longer windows mix more regimes into one clustering problem
WINDOW_STEP_MINUTES = 24 * 60  # Step between rolling windows, 1 day (滾動窗口步長) - Smaller steps produce more overlapping windows
MISSING_THRESHOLD = 0.66  # Minimum observed fraction per instrument row (最低觀測比例) - Raising it keeps only the most liquid instruments

# Clustering data filter
# 聚類數據篩選
CLUSTER_MONEYNESS_BAND = (0.8, 1.2)  # Strike/forward band for clustering, inclusive (聚類價內外程度範圍) - Wider bands admit illiquid wings
CLUSTER_MAX_TAU_DAYS = 7.0  # Maximum maturity for clustering, inclusive (聚類最長到期日) - Short maturities reflect current beliefs most closely

# ISVM data filter
# ISVM 數據篩選
ISVM_TAU_RANGE_DAYS = (5.0, 60.0)  # Maturity range for surface fits, inclusive (曲面擬合到期範圍) - Lower bound excludes the noisiest expiries

###############################
# CLUSTERING (ICC) PARAMETERS
# 聚類參數
###############################

ICC_K = 2  # Number of regimes (狀態數量) - Empirically between 2 and 3; 1 means the unclustered baseline
ICC_LAMBDA = 0.5  # Switching penalty in units of the median best-vs-runner-up gain gap (切換懲罰) - Larger values give longer regimes, 0 disables temporal consistency
ICC_LAMBDA_DECAY = 0.75  # Factor applied to lambda after a degenerate fit (懲罰衰減因子) - Closer to 1 tries more values before giving up
ICC_LAMBDA_FLOOR = 1e-6  # Annealing stops below this |lambda| (懲罰下限) - Falls back to the lambda=0 fit below it
ICC_MAX_SWITCH_RATIO = 0.5  # Largest lambda=0 switch count, relative to shuffled labels, that still counts as regimes (最大切換比例) - Panels above it have no temporal structure to cluster
ICC_GAIN_KIND = "gaussian_likelihood"  # Gain function, euclidean or gaussian_likelihood (增益函數類型)
ICC_PAPER_EXACT_GAIN = True  # Keep the factor n on the Mahalanobis term (保留馬氏距離的 n 因子) - False gives the textbook log-likelihood
ICC_ASSIGNMENT = "greedy"  # Temporal assignment, greedy sweep or viterbi (時間分配方式) - viterbi maximizes total penalized gain
ICC_EUCLIDEAN_WARM_START = True  # Refine the random labels with euclidean gains before likelihood gains (歐氏距離預熱) - Keeps the first split on the regime means
ICC_MAX_ITERATIONS = 50  # Maximum refit/assign iterations (最大迭代次數) - Most panels converge within 10
ICC_SEED = 0  # Seed for the random initial assignment (隨機初始化種子)
ICC_MIN_CLUSTER_SIZE = None  # None means max(n_assets + 1, 25) (最小聚類大小) - Keeps cluster covariances well posed
RIDGE_SCALE = 1e-8  # Ridge epsilon as a fraction of trace/n (嶺正則化比例) - Only used when a clique submatrix is singular

###############################
# SURFACE AND ISVM PARAMETERS
# 曲面與 ISVM 參數
###############################

SURFACE_MIN_OBSERVATIONS = 7  # Regressors in the bivariate surface (曲面回歸元數量) - Fewer observations are under-determined
SURFACE_RANK_TOLERANCE = 1e-10  # Relative |R_ii| threshold for rank deficiency (秩虧閾值)
MIN_CLUSTER_OBSERVATIONS = 25  # Minimum targets per cluster for local regression (每聚類最少觀測數) - Below this a cluster is skipped
INVERSION = "leading_order"  # Coefficient inversion, leading_order or curvature_consistent (係數反演方法)
GRID_POINTS = 50  # Evaluation grid size over v (評估網格點數)
GRID_PERCENTILES = (5.0, 95.0)  # Grid spans these percentiles of observed v (網格百分位範圍) - Avoids sparse tails
BANDWIDTH_FLOOR_FRACTION = 0.05  # Bandwidth floor as a fraction of the v range (帶寬下限比例)
BOOTSTRAP_SAMPLES = 500  # Bootstrap replicates (自助抽樣次數) - Fewer replicates give noisier bands but run faster
BOOTSTRAP_SEED = 1234  # Base seed; replicate b uses BOOTSTRAP_SEED + b (自助抽樣基礎種子)
BOOTSTRAP_MAX_REDRAWS = 10  # Redraws before a failing replicate is skipped (重抽次數上限)
BAND_WIDTH_SD = 2.0  # Band half-width in pointwise standard deviations (置信帶寬度)

###############################
# SYNTHETIC MARKET SETTINGS
# 合成市場設置
###############################

SYNTH_START = "2022-01-23T00:00:00Z"  # First quote timestamp (首個報價時間)
SYNTH_HORIZON_DAYS = 7.0  # Simulated horizon (模擬時間跨度)
SYNTH_S0 = 40000.0  # Initial underlying price (初始標的價格)
SYNTH_SEED = 7  # Seed for path and quote noise (模擬種子)
SYNTH_STRIKE_MONEYNESS = tuple(round(0.8 + 0.04 * i, 2) for i in range(11))  # 11 strikes spanning 0.8-1.2 (行權價網格)
SYNTH_EXPIRY_DAYS = (3, 7, 14, 30, 60)  # Rolling constant maturities in days (到期日網格)
SYNTH_IV_NOISE_SD = 0.0  # Additive Gaussian noise on emitted IV (隱含波動率噪聲) - Mimics quote noise
SYNTH_MISSING_RATE = 0.0  # Probability a quote is dropped (報價缺失概率) - Exercises imputation
SYNTH_MC_PATHS = 10000  # Monte Carlo sub-paths per timestamp, antithetic (蒙特卡洛路徑數)
SYNTH_MC_STEPS_PER_DAY = 2  # Monte Carlo sub-steps per day (蒙特卡洛每日步數)

###############################
# OUTPUT SETTINGS
# 輸出設置
###############################

RESULTS_DIR = "results"  # Main results directory (主要結果目錄)
FLOAT_SIGNIFICANT_DIGITS = 12  # Digits written for every float (浮點輸出有效位數) - Fixed so repeated runs are byte-identical
FLOAT_FORMAT = f"%.{FLOAT_SIGNIFICANT_DIGITS}g"
DEFAULT_THREADS = 1  # Worker threads for per-timestamp fits and bootstrap (工作線程數)
ENABLE_FILE_LOGGING = True  # Whether to write logs to files (是否將日誌寫入文件)
LOGGER_BATCH_SIZE = 20  # Stage records to accumulate before writing (累積多少記錄後寫入磁盤)

###############################
# CONFIGURATION VALIDATION
# 配置驗證
###############################

def validate_config():
    """
    Validate module-level defaults for consistency and sanity.

    驗證模組級默認值的一致性和合理性。

    Returns:
        list: List of validation errors, empty if all valid
    """
    errors = []
    warnings_list = []

    if SAMPLING_INTERVAL_MINUTES <= 0:
        errors.append("SAMPLING_INTERVAL_MINUTES must be positive")
    elif WINDOW_LENGTH_MINUTES % SAMPLING_INTERVAL_MINUTES != 0:
        errors.append("WINDOW_LENGTH_MINUTES must be a multiple of SAMPLING_INTERVAL_MINUTES")

    if not 0 < MISSING_THRESHOLD <= 1:
        errors.append("MISSING_THRESHOLD must be in (0, 1]")

    if CLUSTER_MONEYNESS_BAND[0] >= CLUSTER_MONEYNESS_BAND[1] or CLUSTER_MONEYNESS_BAND[0] <= 0:
        errors.append("CLUSTER_MONEYNESS_BAND must be (low, high) with 0 < low < high")

    if ISVM_TAU_RANGE_DAYS[0] > ISVM_TAU_RANGE_DAYS[1]:
        errors.append("ISVM_TAU_RANGE_DAYS must be (min, max) with min <= max")

    if ICC_K < 1:
        errors.append("ICC_K must be at least 1")

    if not 0 < ICC_LAMBDA_DECAY < 1:
        errors.append("ICC_LAMBDA_DECAY must be in (0, 1)")

    if ICC_GAIN_KIND not in ("euclidean", "gaussian_likelihood"):
        errors.append("ICC_GAIN_KIND must be euclidean or gaussian_likelihood")

    if ICC_ASSIGNMENT not in ("greedy", "viterbi"):
        errors.append("ICC_ASSIGNMENT must be greedy or viterbi")

    if ICC_MAX_ITERATIONS < 1:
        errors.append("ICC_MAX_ITERATIONS must be at least 1")

    if not 0 < ICC_MAX_SWITCH_RATIO <= 1:
        errors.append("ICC_MAX_SWITCH_RATIO must be in (0, 1]")

    if BOOTSTRAP_SAMPLES < 2:
        errors.append("BOOTSTRAP_SAMPLES must be at least 2")

    if GRID_POINTS < 2:
        errors.append("GRID_POINTS must be at least 2")

    if not 0 <= GRID_PERCENTILES[0] < GRID_PERCENTILES[1] <= 100:
        errors.append("GRID_PERCENTILES must satisfy 0 <= low < high <= 100")

    if MIN_CLUSTER_OBSERVATIONS < 25:
        warnings_list.append("MIN_CLUSTER_OBSERVATIONS below 25 makes local regression unstable")

    if ICC_LAMBDA < 0:
        warnings_list.append("negative ICC_LAMBDA rewards switching between regimes")

    if warnings_list:
        print("Configuration warnings:")
        for warning in warnings_list:
            print(f"  WARNING: {warning}")

    return errors


def get_config_summary():
    """
    Get a summary of key default parameters.

    獲取關鍵默認參數的摘要。

    Returns:
        dict: Summary of configuration
    """
    return {
        'market_data': {
            'sampling_interval_minutes': SAMPLING_INTERVAL_MINUTES,
            'window_length_minutes': WINDOW_LENGTH_MINUTES,
            'missing_threshold': MISSING_THRESHOLD,
            'cluster_moneyness_band': list(CLUSTER_MONEYNESS_BAND),
            'cluster_max_tau_days': CLUSTER_MAX_TAU_DAYS,
            'isvm_tau_range_days': list(ISVM_TAU_RANGE_DAYS),
        },
        'clustering': {
            'k': ICC_K,
            'lambda': ICC_LAMBDA,
            'lambda_decay': ICC_LAMBDA_DECAY,
            'gain_kind': ICC_GAIN_KIND,
            'paper_exact_gain': ICC_PAPER_EXACT_GAIN,
            'assignment': ICC_ASSIGNMENT,
            'euclidean_warm_start': ICC_EUCLIDEAN_WARM_START,
        },
        'isvm': {
            'min_cluster_observations': MIN_CLUSTER_OBSERVATIONS,
            'bootstrap_samples': BOOTSTRAP_SAMPLES,
            'grid_points': GRID_POINTS,
            'inversion': INVERSION,
        },
    }


###############################
# PIPELINE FILE SCHEMA
# 管線文件結構
###############################

@dataclass
class RegimeConfig:
    """One synthetic regime. kind is sabr, mean_reverting or constant."""
    name: str = "regime"
    kind: str = "sabr"
    v0: float = 0.8
    rho: float = 0.0
    nu: float = 0.0
    kappa: float = 0.0
    theta: float = 0.8
    jump_intensity: float = 0.0
    jump_mean: float = 0.0
    jump_sd: float = 0.0


@dataclass
class SegmentConfig:
    start: int = 0
    regime: str = "regime"


@dataclass
class SyntheticConfig:
    start: str = SYNTH_START
    horizon_days: float = SYNTH_HORIZON_DAYS
    s0: float = SYNTH_S0
    seed: int = SYNTH_SEED
    iv_noise_sd: float = SYNTH_IV_NOISE_SD
    missing_rate: float = SYNTH_MISSING_RATE
    strike_moneyness: List[float] = field(default_factory=lambda: list(SYNTH_STRIKE_MONEYNESS))
    expiry_days: List[float] = field(default_factory=lambda: list(SYNTH_EXPIRY_DAYS))
    mc_paths: int = SYNTH_MC_PATHS
    mc_steps_per_day: int = SYNTH_MC_STEPS_PER_DAY
    regimes: List[RegimeConfig] = field(default_factory=lambda: [RegimeConfig()])
    segments: List[SegmentConfig] = field(default_factory=lambda: [SegmentConfig()])


@dataclass
class SourceConfig:
    kind: str = "synthetic"  # synthetic | file
    path: Optional[str] = None
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)


@dataclass
class WindowConfig:
    window_length_minutes: int = WINDOW_LENGTH_MINUTES
    step_minutes: int = WINDOW_STEP_MINUTES
    sampling_interval_minutes: int = SAMPLING_INTERVAL_MINUTES
    missing_threshold: float = MISSING_THRESHOLD


@dataclass
class ClusteringConfig:
    k: int = ICC_K
    lambda_: float = ICC_LAMBDA
    lambda_decay: float = ICC_LAMBDA_DECAY
    gain_kind: str = ICC_GAIN_KIND
    paper_exact_gain: bool = ICC_PAPER_EXACT_GAIN
    assignment: str = ICC_ASSIGNMENT
    euclidean_warm_start: bool = ICC_EUCLIDEAN_WARM_START
    max_iterations: int = ICC_MAX_ITERATIONS
    seed: int = ICC_SEED
    min_cluster_size: Optional[int] = ICC_MIN_CLUSTER_SIZE
    moneyness_band: List[float] = field(default_factory=lambda: list(CLUSTER_MONEYNESS_BAND))
    max_tau_days: float = CLUSTER_MAX_TAU_DAYS


@dataclass
class IsvmSettings:
    tau_range_days: List[float] = field(default_factory=lambda: list(ISVM_TAU_RANGE_DAYS))
    min_observations: int = MIN_CLUSTER_OBSERVATIONS
    bootstrap_samples: int = BOOTSTRAP_SAMPLES
    bootstrap_seed: int = BOOTSTRAP_SEED
    max_redraws: int = BOOTSTRAP_MAX_REDRAWS
    grid_points: int = GRID_POINTS
    grid_percentiles: List[float] = field(default_factory=lambda: list(GRID_PERCENTILES))
    bandwidth_floor_fraction: float = BANDWIDTH_FLOOR_FRACTION
    band_width_sd: float = BAND_WIDTH_SD
    inversion: str = INVERSION


@dataclass
class PipelineConfig:
    source: SourceConfig = field(default_factory=SourceConfig)
    window: WindowConfig = field(default_factory=WindowConfig)
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    isvm: IsvmSettings = field(default_factory=IsvmSettings)
    r: float = RISK_FREE_RATE
    d: float = DIVIDEND_YIELD
    output_dir: str = os.path.join(RESULTS_DIR, "run")
    threads: int = DEFAULT_THREADS


# YAML keys that are Python keywords map to a trailing-underscore attribute
_KEY_ALIASES = {"lambda": "lambda_"}
_ATTRIBUTE_ALIASES = {value: key for key, value in _KEY_ALIASES.items()}


def _build(cls, data: Any, where: str):
    """Recursively build dataclass `cls` from a mapping, rejecting unknown keys."""
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping, got {type(data).__name__}")

    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for raw_key, value in data.items():
        key = _KEY_ALIASES.get(raw_key, raw_key)
        if key not in known:
            raise ConfigError(f"unknown key '{raw_key}' in {where}")
        default = getattr(cls(), key)
        if dataclasses.is_dataclass(default):
            kwargs[key] = _build(type(default), value, f"{where}.{raw_key}")
        elif key == "regimes":
            kwargs[key] = [_build(RegimeConfig, item, f"{where}.regimes[{i}]") for i, item in enumerate(value or [])]
        elif key == "segments":
            kwargs[key] = [_build(SegmentConfig, item, f"{where}.segments[{i}]") for i, item in enumerate(value or [])]
        else:
            kwargs[key] = value
    return cls(**kwargs)


def validate_pipeline_config(cfg: PipelineConfig) -> List[str]:
    """
    Validate a loaded pipeline configuration.

    驗證已加載的管線配置。

    Returns:
        list: Validation errors, empty if valid
    """
    errors = []
    src = cfg.source
    if src.kind not in ("synthetic", "file"):
        errors.append("source.kind must be synthetic or file")
    if src.kind == "file":
        if not src.path:
            errors.append("source.path is required when source.kind is file")
        elif not os.path.isfile(src.path):
            errors.append(f"input file does not exist: {src.path}")
    if src.kind == "synthetic":
        syn = src.synthetic
        names = [regime.name for regime in syn.regimes]
        if not names:
            errors.append("source.synthetic.regimes must not be empty")
        if len(set(names)) != len(names):
            errors.append("source.synthetic.regimes names must be unique")
        for regime in syn.regimes:
            if regime.kind not in ("sabr", "mean_reverting", "constant"):
                errors.append(f"regime {regime.name}: kind must be sabr, mean_reverting or constant")
            if regime.v0 <= 0:
                errors.append(f"regime {regime.name}: v0 must be positive")
            if not -1 < regime.rho < 1:
                errors.append(f"regime {regime.name}: rho must be in (-1, 1)")
            if regime.nu < 0 or regime.jump_intensity < 0 or regime.jump_sd < 0:
                errors.append(f"regime {regime.name}: nu, jump_intensity and jump_sd must be non-negative")
        starts = [segment.start for segment in syn.segments]
        if not starts or starts[0] != 0 or any(b <= a for a, b in zip(starts, starts[1:])):
            errors.append("source.synthetic.segments must start at 0 with increasing starts")
        for segment in syn.segments:
            if segment.regime not in names:
                errors.append(f"segment at {segment.start} references unknown regime {segment.regime}")
        if syn.horizon_days <= 0 or syn.s0 <= 0:
            errors.append("source.synthetic horizon_days and s0 must be positive")
        if not 0 <= syn.missing_rate < 1:
            errors.append("source.synthetic.missing_rate must be in [0, 1)")
        if not syn.strike_moneyness or not syn.expiry_days:
            errors.append("source.synthetic strike and expiry grids must not be empty")

    win = cfg.window
    if win.sampling_interval_minutes <= 0 or win.window_length_minutes <= 0 or win.step_minutes <= 0:
        errors.append("window lengths must be positive")
    elif win.window_length_minutes % win.sampling_interval_minutes != 0:
        errors.append("window.window_length_minutes must be a multiple of sampling_interval_minutes")
    if not 0 < win.missing_threshold <= 1:
        errors.append("window.missing_threshold must be in (0, 1]")

    clu = cfg.clustering
    if clu.k < 1:
        errors.append("clustering.k must be at least 1")
    if not 0 < clu.lambda_decay < 1:
        errors.append("clustering.lambda_decay must be in (0, 1)")
    if clu.gain_kind not in ("euclidean", "gaussian_likelihood"):
        errors.append("clustering.gain_kind must be euclidean or gaussian_likelihood")
    if clu.assignment not in ("greedy", "viterbi"):
        errors.append("clustering.assignment must be greedy or viterbi")
    if clu.max_iterations < 1:
        errors.append("clustering.max_iterations must be at least 1")
    if len(clu.moneyness_band) != 2 or not 0 < clu.moneyness_band[0] < clu.moneyness_band[1]:
        errors.append("clustering.moneyness_band must be [low, high] with 0 < low < high")

    isv = cfg.isvm
    if len(isv.tau_range_days) != 2 or isv.tau_range_days[0] > isv.tau_range_days[1]:
        errors.append("isvm.tau_range_days must be [min, max] with min <= max")
    if isv.bootstrap_samples < 2:
        errors.append("isvm.bootstrap_samples must be at least 2")
    if isv.inversion not in ("leading_order", "curvature_consistent"):
        errors.append("isvm.inversion must be leading_order or curvature_consistent")
    if isv.grid_points < 2:
        errors.append("isvm.grid_points must be at least 2")

    if cfg.threads < 1:
        errors.append("threads must be at least 1")
    return errors


def load_pipeline_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> PipelineConfig:
    """
    Load a YAML pipeline file over the module defaults.

    從 YAML 文件加載管線配置並覆蓋默認值。

    Args:
        path: YAML file, or None for pure defaults
        overrides: Dotted-key overrides applied after the file, e.g. {"clustering.seed": 3}

    Returns:
        PipelineConfig: The validated configuration

    Raises:
        ConfigError: Missing file, malformed YAML, unknown keys or invalid values
    """
    data: Dict[str, Any] = {}
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"config file does not exist: {path}")
        try:
            with open(path, "r") as f:
                loaded = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"malformed YAML in {path}: {e}") from e
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigError(f"{path} must contain a YAML mapping")
        data = loaded or {}

    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        node = data
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value

    try:
        cfg = _build(PipelineConfig, data, "config")
    except TypeError as e:
        raise ConfigError(f"invalid configuration: {e}") from e

    errors = validate_pipeline_config(cfg)
    if errors:
        raise ConfigError("configuration validation failed:\n" + "\n".join(f"  - {e}" for e in errors))
    return cfg


def config_to_dict(cfg: PipelineConfig) -> Dict[str, Any]:
    """Plain-dict form with YAML key names (lambda instead of lambda_)."""
    def rename(node):
        if isinstance(node, dict):
            return {_ATTRIBUTE_ALIASES.get(k, k): rename(v) for k, v in node.items()}
        if isinstance(node, list):
            return [rename(v) for v in node]
        return node
    return rename(dataclasses.asdict(cfg))


def config_hash(cfg: PipelineConfig) -> str:
    """SHA-256 of the canonical JSON form; stamped on every artifact."""
    payload = config_to_dict(cfg)
    # output location and thread count do not change numeric results
    payload.pop("output_dir", None)
    payload.pop("threads", None)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# Validate configuration on import
_validation_errors = validate_config()
if _validation_errors:
    error_msg = "Configuration validation failed:\n" + "\n".join(f"  - {error}" for error in _validation_errors)
    raise ValueError(error_msg)
