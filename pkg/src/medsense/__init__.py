"""Maximum-eigenvalue spectrum sensing with RIS-assisted multi-antenna receivers."""

from .detector import DetectorConfig, p_d, p_fa, roc, test_statistic, threshold_for_pfa
from .model import SystemGeometry
from .system import SystemModel, build_model
from .wishart import NumericalFailure, max_eig_cdf, spectrum_of, ts_cdf

__all__ = [
    "DetectorConfig",
    "NumericalFailure",
    "SystemGeometry",
    "SystemModel",
    "build_model",
    "max_eig_cdf",
    "p_d",
    "p_fa",
    "roc",
    "spectrum_of",
    "test_statistic",
    "threshold_for_pfa",
    "ts_cdf",
]

__version__ = "0.1.0"
