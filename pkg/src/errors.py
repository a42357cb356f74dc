"""
Exception hierarchy for the regime-clustered ISVM pipeline.

Every error raised by a pipeline stage derives from PipelineError and carries
the process exit code the command line uses when the stage fails.

管線異常層級。每個階段錯誤都帶有命令列使用的退出碼。
"""

from typing import Any, Optional, Sequence


class PipelineError(Exception):
    """Base class for all pipeline failures."""

    exit_code = 1
    category = "pipeline error"


class ConfigError(PipelineError):
    """Invalid or incomplete run configuration (配置錯誤)."""

    exit_code = 2
    category = "config error"


class DataError(PipelineError):
    """Input data cannot support the requested computation (數據錯誤)."""

    exit_code = 3
    category = "data error"


class NumericalError(PipelineError):
    """A numerical routine failed (數值錯誤)."""

    exit_code = 4
    category = "numerical failure"


# Data errors

class NoLiquidOptionsError(DataError):
    """No option survived the liquidity/maturity/moneyness filter."""


class MissingInstantaneousVolError(DataError):
    def __init__(self, timestamp: Any):
        self.timestamp = timestamp
        super().__init__(f"no instantaneous volatility for timestamp {timestamp}")


class InsufficientPanelError(DataError):
    """Fewer than two instruments survive the missingness threshold."""


class InsufficientObservationsError(DataError):
    def __init__(self, message: str, n_points: Optional[int] = None):
        self.n_points = n_points
        super().__init__(message)


class DegenerateSurfaceError(DataError):
    def __init__(self, timestamp: Any = None, reason: str = ""):
        self.timestamp = timestamp
        detail = f" at {timestamp}" if timestamp is not None else ""
        suffix = f": {reason}" if reason else ""
        super().__init__(f"degenerate surface sample{detail}{suffix}")


class ClusteringError(DataError):
    """The panel cannot be split into K non-degenerate regimes."""


class EvaluationError(DataError):
    """Error tables cannot be formed from the given inputs."""


# Numerical errors

class SingularCliqueError(NumericalError):
    def __init__(self, clique: Sequence[int]):
        self.clique = tuple(int(i) for i in clique)
        super().__init__(f"singular covariance submatrix for clique {self.clique}")


class NotPositiveDefiniteError(NumericalError):
    """Matrix failed a Cholesky factorization."""


class PriceBoundsError(NumericalError):
    def __init__(self, price: float, lower: float, upper: float):
        self.price = price
        self.lower = lower
        self.upper = upper
        super().__init__(
            f"option price {price:.12g} outside no-arbitrage bounds ({lower:.12g}, {upper:.12g})"
        )
