"""
Exceptions for gsn-shaper

Every error raised by the library derives from GsnError. Input-validation
errors also derive from ValueError so plain callers can catch either.
"""
from __future__ import annotations
from typing import Optional, Any


class GsnError(Exception):
    """Root of the gsn-shaper exception hierarchy."""


class ShapeError(GsnError, ValueError):
    """Operand shapes do not conform."""

    def __init__(self, op: str, *shapes: tuple):
        self.op = op
        self.shapes = shapes
        rendered = " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: shape mismatch {rendered}")


class DomainError(GsnError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class NumericError(GsnError, ArithmeticError):
    """A forward value became NaN or infinite."""


class SupportError(GsnError, ValueError):
    """A probability table violates a support requirement."""

    def __init__(self, message: str, index: Optional[int] = None):
        self.index = index
        super().__init__(message)


class ErgodicityError(GsnError):
    """A transition matrix is not ergodic where ergodicity is required."""

    def __init__(self, verdict: Any):
        self.verdict = verdict
        super().__init__(f"transition matrix is not ergodic: {verdict}")


class ConfigError(GsnError, ValueError):
    """A configuration key is unknown or its value is invalid."""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(message)


class DataFormatError(GsnError, ValueError):
    """A data file is malformed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class CheckpointError(GsnError):
    """A checkpoint file is corrupt or inconsistent."""

    def __init__(self, message: str, record: Optional[str] = None):
        self.record = record
        super().__init__(f"{record}: {message}" if record else message)
