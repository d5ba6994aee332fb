"""
Strapdown AHRS with a virtual-platform correction loop and separate gyro and
accelerometer bias estimation from the loop's torque signal.
"""

from .ahrs import AhrsConfig, AidSample, ImuSample
from .config import RunConfig, parse_config
from .estimator import BiasEstimate, EstimatorConfig
from .pipeline import EstimateSeries, estimate_from_velocity, run_estimator

__all__ = [
    "AhrsConfig",
    "AidSample",
    "BiasEstimate",
    "EstimateSeries",
    "EstimatorConfig",
    "ImuSample",
    "RunConfig",
    "estimate_from_velocity",
    "parse_config",
    "run_estimator",
]

__version__ = "0.1.0"
