"""Stabilising functionals of marked Poisson processes: simulation, certified radii and normal-approximation checks."""

from .errors import (
    ConfigurationError,
    ConstraintError,
    ContractError,
    DecompositionError,
    DomainError,
    DuplicateError,
    ParameterError,
    SampleSizeError,
    StabLabError,
)
from .point_process import MarkedConfiguration, MarkedPoint, MarkSampler, Window, sample_poisson, sample_slab

__version__ = "0.1.0"
