"""Shared exception base classes.

Every module defines its own specific exceptions; they all inherit from
PipelineError so callers (and the CLI) can distinguish pipeline failures
from programming errors. InputError marks problems with user-supplied
files or configuration, which the CLI maps to exit code 2.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class InputError(PipelineError):
    """A user-supplied file, flag, or config value is unusable."""
