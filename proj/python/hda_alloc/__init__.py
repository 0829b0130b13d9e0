"""Power and bandwidth allocation for hybrid digital-analog transmission."""

import json as _json

from . import _core
from ._core import (
    CSV_HEADER,
    DEFAULT_RATE_CEILING,
    ConvergenceError,
    InfeasibleError,
    ValidationError,
    expected_distortion,
    opta_distortion,
    optimize_multi,
    optimize_single,
    outage_probability,
    psi,
    psi_derivative,
    quantizer_error_variance,
    sdr_db,
    simulate,
)


def _as_text(config):
    return config if isinstance(config, str) else _json.dumps(config)


def run_experiment(config):
    """Run a sweep from a config dict (or JSON text); returns one dict per row."""
    return _core.run_experiment(_as_text(config))


def run_experiment_csv(config):
    """Same as run_experiment, rendered as the CLI's CSV."""
    return _core.run_experiment_csv(_as_text(config))


__version__ = "0.1.0"
