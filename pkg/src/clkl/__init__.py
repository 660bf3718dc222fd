"""Compressed-covariance near-field channel estimation toolkit.

Library + CLI implementing a curvature-learning covariance-fitting channel
estimator (CL-KL) for hybrid arrays, a polar-dictionary simultaneous-OMP
baseline (P-SOMP), the compressed-domain Cramer-Rao bound, and a seeded
Monte-Carlo benchmark harness that writes per-trial CSV records.
"""

from clkl.manifold import ArrayConfig, PathParam
from clkl.scene import CompressedObservation, Scene, ScenarioConfig

__all__ = [
    "ArrayConfig",
    "PathParam",
    "Scene",
    "ScenarioConfig",
    "CompressedObservation",
]

__version__ = "0.1.0"
