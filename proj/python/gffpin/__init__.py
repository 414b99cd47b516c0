"""Discrete Gaussian free field with disordered square-well pinning."""

import json

from ._core import (
    AssumptionViolation,
    ConfigError,
    NumericalError,
    StatisticsGuardError,
    __version__,
    annealed_strength,
    config_keys,
    free_energy_expansion,
    free_energy_importance,
    free_energy_thermo,
    gap_bound,
    gap_expectation,
    green_function,
    rectangle_probability,
    sample_environment,
)
from ._core import run as _run


def run(command, config=None, **flags):
    """Run a CLI command in-process.

    `config` is a mapping (sectioned or flat, as in a config file) or YAML text. Keyword
    arguments override it like command-line flags; lists are joined with commas.
    Returns {exit_code, run_dir, result, log}.
    """
    if config is None:
        text = ""
    elif isinstance(config, str):
        text = config
    else:
        text = json.dumps(config)
    as_text = {}
    for key, value in flags.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        as_text[key] = str(value)
    return _run(command, text, as_text)


__all__ = [
    "AssumptionViolation",
    "ConfigError",
    "NumericalError",
    "StatisticsGuardError",
    "__version__",
    "annealed_strength",
    "config_keys",
    "free_energy_expansion",
    "free_energy_importance",
    "free_energy_thermo",
    "gap_bound",
    "gap_expectation",
    "green_function",
    "rectangle_probability",
    "run",
    "sample_environment",
]
