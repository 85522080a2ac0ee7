"""Exception and warning types shared across the package.

The CLI maps these onto exit codes: configuration problems exit with 2,
numerical failures (NaN, box saturation, failed band identification) with 3,
and validity-regime violations with 4 when strict mode is on.
"""


class ConfigError(ValueError):
    """A run configuration is malformed, inconsistent, or violates an invariant."""


class NumericsError(RuntimeError):
    """A numerical computation failed (NaN/overflow, saturated box, bad eigenbasis)."""


class RegimeWarning(UserWarning):
    """A result was requested outside the validity regime of the formula used."""
