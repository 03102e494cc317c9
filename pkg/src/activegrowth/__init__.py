"""Discrete generative models that grow their own structure.

Dirichlet-categorical state-space models learn their factors, states and
paths from an ordered stream of observations, then act by minimising
expected free energy.
"""

from .model import Factor, GenerativeModel, Modality, load_model, new_minimal, save_model, validate
from .inference import BeliefState, infer_epoch
from .structure import IngestConfig, ingest_stream, prune
from .planner import plan

__version__ = "0.1.0"

__all__ = [
    "BeliefState",
    "Factor",
    "GenerativeModel",
    "IngestConfig",
    "Modality",
    "infer_epoch",
    "ingest_stream",
    "load_model",
    "new_minimal",
    "plan",
    "prune",
    "save_model",
    "validate",
]
