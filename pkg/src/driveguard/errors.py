"""Shared exception types.

Every error raised by this package derives from DriveGuardError so callers
(and the command line front end) can catch domain failures without
swallowing programming mistakes like TypeError.
"""


class DriveGuardError(Exception):
    """Base class for all domain errors."""


class ValidationError(DriveGuardError):
    """A value violates a structural invariant (range, shape, consistency)."""


class ParameterError(DriveGuardError):
    """A caller-supplied parameter is outside its documented domain."""
