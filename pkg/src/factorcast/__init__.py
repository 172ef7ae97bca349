"""factorcast: tensor factor extraction plus temporal convolutional
forecasting for tensor-on-tensor time series."""

__version__ = "0.1.0"

from . import factor_model, harness, io, simgen, spectral, tcn, tensor_ops
from .errors import ConfigError, DataError, FactorcastError, NumericalError

__all__ = [
    "__version__",
    "tensor_ops",
    "spectral",
    "factor_model",
    "simgen",
    "tcn",
    "harness",
    "io",
    "FactorcastError",
    "ConfigError",
    "DataError",
    "NumericalError",
]
