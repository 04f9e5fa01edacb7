"""Exception hierarchy.

Every failure mode surfaces as a typed exception carrying a short machine
code (used by the CLI for structured rows and exit codes).  Exit code
convention: 2 config/parse, 3 math domain, 4 validation.
"""

from __future__ import annotations


class QBorelError(Exception):
    code = "error"
    exit_code = 3


class ConfigError(QBorelError):
    code = "config"
    exit_code = 2


class ParseError(ConfigError):
    """Malformed operator/family document; `path` locates the offending key."""

    code = "parse"

    def __init__(self, message, path=""):
        super().__init__(f"{message} (at {path})" if path else message)
        self.path = path


class ArgumentError(ConfigError):
    code = "argument"


class ValidationError(QBorelError):
    code = "validation"
    exit_code = 4


class DomainError(QBorelError):
    code = "domain"


class RangeError(QBorelError):
    code = "range"


class UnsupportedError(QBorelError):
    code = "unsupported"


class ResonanceError(QBorelError):
    """Recurrence leading factor vanished at index `n` with inconsistent data."""

    code = "resonance"

    def __init__(self, message, n=None):
        super().__init__(message)
        self.n = n


class SingularDirectionError(DomainError):
    code = "singular-direction"


class DirectionError(DomainError):
    """Direction excluded by an explicit hypothesis (e.g. d = (r-s-1)*pi)."""

    code = "forbidden-direction"


class GrowthError(QBorelError):
    code = "growth"


class PoleError(DomainError):
    """Evaluation on (or too near) a recorded pole spiral."""

    code = "pole-spiral"


class SpiralCollisionError(DomainError):
    """A continuation ray intersects a pole spiral of the q-difference system."""

    code = "spiral-collision"


class BracketingError(DomainError):
    """No admissible lateral directions around a singular direction."""

    code = "bracketing"


class DegenerateParameterError(ArgumentError):
    code = "degenerate-parameters"
