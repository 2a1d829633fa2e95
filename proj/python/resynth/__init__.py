"""Source attribution of synthetic images by resynthesis.

Reports come back from the native layer as JSON text and are decoded here.
"""

import json

from . import _core
from ._core import (
    ConfigError,
    DimensionError,
    Error,
    FeatureStore,
    FormatError,
    LookupError,
    Manifest,
    OperatorError,
    SplitArityError,
    TrainingError,
    attribute,
    attribute_dataset,
    distance,
    operators,
    perturb,
    sample_params,
    validate_manifest,
)

__all__ = [
    "ConfigError", "DimensionError", "Error", "FeatureStore", "FormatError", "LookupError",
    "Manifest", "OperatorError", "SplitArityError", "TrainingError", "attribute",
    "attribute_dataset", "default_simulator_config", "distance", "operators", "perturb",
    "report_csv", "run_few_shot", "run_plain", "sample_params", "simulate", "validate_manifest",
]


def default_simulator_config():
    return json.loads(_core.default_simulator_config())


def simulate(config=None, jobs=1):
    """Returns (manifest, store) for a synthetic dataset."""
    return _core.simulate(json.dumps(config or {}), jobs)


def run_plain(manifest, store, **kwargs):
    return json.loads(_core.run_plain(manifest, store, **kwargs))


def run_few_shot(manifest, store, **kwargs):
    return json.loads(_core.run_few_shot(manifest, store, **kwargs))


def report_csv(report):
    return _core.report_csv(json.dumps(report))
