"""Incremental data-driven controller synthesis on fair Büchi game abstractions."""
from .errors import IncsynthError, MonotonicityViolation, NotWinning
from .geometry import Box, GridPartition
from .learning import Dataset, LearnerConfig, NoiseSupport, ReachLearner, Sample
from .session import SynthesisSession, initialise

__version__ = "0.1.0"

__all__ = [
    "Box", "Dataset", "GridPartition", "IncsynthError", "LearnerConfig", "MonotonicityViolation", "NoiseSupport",
    "NotWinning", "ReachLearner", "Sample", "SynthesisSession", "initialise",
]
