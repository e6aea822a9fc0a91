"""Exception types shared across the package."""

from __future__ import annotations


class InvalidArgument(ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigError(ValueError):
    """A configuration failed validation.

    ``problems`` maps each offending field (dotted path) to a message.
    """

    def __init__(self, problems: dict[str, str]):
        self.problems = dict(problems)
        lines = [f"{field}: {msg}" for field, msg in sorted(self.problems.items())]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))


class UndefinedStatistic(ArithmeticError):
    """A ratio statistic was requested with an empty denominator."""


class DataError(ValueError):
    """Malformed trial records."""
