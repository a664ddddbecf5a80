"""Domain exceptions and the CLI error boundary.

Every domain error is a ValueError so callers that only care about "bad input"
can keep catching ValueError. exit_code_for maps each class to a CLI exit code.
"""

import json
import sys


class DiffusionError(ValueError):
    """Base class for all user-facing errors raised by this package."""


class TopologyError(DiffusionError):
    pass


class CombinationError(DiffusionError):
    pass


class SubspaceError(DiffusionError):
    pass


class DataModelError(DiffusionError):
    pass


class AlgorithmError(DiffusionError):
    pass


class StabilityError(DiffusionError):
    pass


class PredictorUnavailable(DiffusionError):
    pass


class ConfigError(DiffusionError):
    pass


class SimulationError(DiffusionError):
    pass


EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID_INPUT = 2
EXIT_UNSTABLE = 3

_INVALID_INPUT_ERRORS = (
    TopologyError,
    CombinationError,
    SubspaceError,
    DataModelError,
    AlgorithmError,
    ConfigError,
    PredictorUnavailable,
)
_UNSTABLE_ERRORS = (StabilityError, SimulationError)


def error_payload(exc):
    return {"error": type(exc).__name__, "message": str(exc)}


def exit_code_for(exc):
    if isinstance(exc, _UNSTABLE_ERRORS):
        return EXIT_UNSTABLE
    if isinstance(exc, _INVALID_INPUT_ERRORS):
        return EXIT_INVALID_INPUT
    return EXIT_FAILURE


def register_error_handlers(runtime):
    """Attach the CLI error boundary to ``runtime.handle_error``."""

    def handle_error(exc, stream=None):
        stream = stream if stream is not None else sys.stderr
        if isinstance(exc, DiffusionError):
            runtime.logger.warning("%s: %s", type(exc).__name__, exc)
        else:
            runtime.logger.exception("Unexpected failure: %s", exc)
        stream.write(json.dumps(error_payload(exc), sort_keys=True) + "\n")
        return exit_code_for(exc)

    runtime.handle_error = handle_error
    return handle_error
