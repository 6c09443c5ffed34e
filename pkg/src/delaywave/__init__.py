"""Damped wave equation with interior time delay and boundary velocity feedback."""
from .core import (
    DlpParams,
    EnergySample,
    GeometryConstants,
    Grid1D,
    Grid2D,
    HistoryBuffer,
    LyapunovWeights,
    PhysicalParams,
    SimState,
    SpectralResult,
    validate_params,
)
from .kernels import BACKEND

__version__ = "0.1.0"
