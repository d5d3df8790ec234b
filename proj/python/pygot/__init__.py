"""Python bindings for the got transport library."""

import json

from ._got import (
    ConfigError,
    ConvergenceError,
    DimensionError,
    NumericalError,
    PreconditionError,
    TransportMap,
    __version__,
    energy_distance_sq,
    gradcheck,
    gradcheck_components,
    load_checkpoint,
    verify_instance,
)
from ._got import make_dataset as _make_dataset
from ._got import train as _train


def make_dataset(**spec):
    """Build a dataset from keyword arguments of the 'dataset' config block."""
    return _make_dataset(json.dumps(spec))


def train(config):
    """Train from a run config dict with 'train', 'dataset' and 'eval' blocks."""
    return _train(json.dumps(config))


__all__ = [
    "ConfigError",
    "ConvergenceError",
    "DimensionError",
    "NumericalError",
    "PreconditionError",
    "TransportMap",
    "__version__",
    "energy_distance_sq",
    "gradcheck",
    "gradcheck_components",
    "load_checkpoint",
    "make_dataset",
    "train",
    "verify_instance",
]
