"""Simulation and analysis toolkit for a high-coherence 3D cavity quantum memory."""

__version__ = "0.1.0"

from .errors import QmemError  # noqa: E402
from .operators import DensityMatrix, Operator, SpaceSignature  # noqa: E402
from .system import DEVICE_PARAMS, SystemParams, load_params  # noqa: E402

__all__ = ["__version__", "QmemError", "DensityMatrix", "Operator", "SpaceSignature", "DEVICE_PARAMS",
           "SystemParams", "load_params"]
