"""Delay-aware collaboration between small on-orbit detectors and a large
shared model over a LEO constellation: topology, delay accounting, learned
packet routing, and bisection over the offloaded-feature ratio.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ContractViolation,
    InfeasibleError,
    LeoCollabError,
    RouteError,
    TrainingDiverged,
)

__all__ = [
    "ConfigError",
    "ContractViolation",
    "InfeasibleError",
    "LeoCollabError",
    "RouteError",
    "TrainingDiverged",
    "__version__",
]
