"""
Exception types shared across the engine. The CLI maps them to exit codes.
"""

from typing import Optional


class ReAbcError(RuntimeError):
    """Runtime failure of an inference algorithm (exit code 3)."""


class SliceSamplingError(ReAbcError):
    """Slice sampler exceeded its iteration cap. Usually a nondeterministic phi."""


class StageLimitError(ReAbcError):
    """ADAPT-RE-SMC did not reach its target threshold within max_stages."""


class DegenerateThresholdError(ReAbcError):
    """ADAPT-RE-SMC threshold would be infinite: too many particles with phi = inf."""


class InitialLikelihoodError(ReAbcError):
    """No nonzero likelihood estimate at the initial chain state."""


class TuningError(ReAbcError):
    """Pilot or tuning step produced a degenerate result."""


class ConfigError(ValueError):
    """Invalid run configuration (exit code 2)."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")
