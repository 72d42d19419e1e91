"""Learned harmonic mean evidence estimation.

Thin wrappers over the C++ core: experiment entry points take and return
plain dicts (the same documents the command line tool writes), while
``Flow``, ``sample`` and ``estimate_evidence`` expose the building blocks.
"""

import json
import os

# an installed wheel carries its own copy of the Pima data
_PIMA = os.path.join(os.path.dirname(__file__), "data", "pima_indian.csv")
if os.path.exists(_PIMA):
    os.environ.setdefault("LHM_PIMA_PATH", _PIMA)

from . import _lhm  # noqa: E402
from ._lhm import (  # noqa: E402
    ConfigError,
    ConvergenceError,
    DataError,
    DimensionError,
    Error,
    Flow,
    NonFiniteError,
    estimate_evidence,
    sample,
)

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "DataError",
    "DimensionError",
    "Error",
    "Flow",
    "NonFiniteError",
    "bayes_factor",
    "default_config",
    "estimate_evidence",
    "ground_truth",
    "run",
    "sample",
]


def _text(config):
    return config if isinstance(config, str) else json.dumps(config)


def default_config(problem):
    """Desk-scale experiment config for ``problem``."""
    return json.loads(_lhm.default_config(problem))


def run(config, output_dir=""):
    """Run every trial of an experiment and return its summary."""
    return json.loads(_lhm.run(_text(config), output_dir))


def bayes_factor(first, second, output_dir=""):
    """Log Bayes factor of two single-case experiments, paired by trial."""
    return json.loads(_lhm.bayes_factor(_text(first), _text(second), output_dir))


def ground_truth(config):
    """Analytic, quadrature or published reference values for each case."""
    return json.loads(_lhm.ground_truth(_text(config)))
