"""Exception hierarchy shared by every module.

Each error class carries a stable CLI exit code so front ends can map
failures without string matching.
"""

from __future__ import annotations


class LabError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class InvalidArgument(LabError, ValueError):
    exit_code = 2


class ParseError(InvalidArgument):
    """Malformed instance file; ``line`` is 1-based."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class LocalityViolation(LabError):
    """A procedure read beyond its declared radius."""

    def __init__(self, node: int, radius: int, allowed: int):
        self.node, self.radius, self.allowed = node, radius, allowed
        super().__init__(f"node {node} queried radius {radius} > declared {allowed}")


class WriteViolation(LabError):
    def __init__(self, node: int, target: int, allowed: int):
        self.node, self.target, self.allowed = node, target, allowed
        super().__init__(f"node {node} wrote to {target}, outside write radius {allowed}")


class InvariantError(LabError, AssertionError):
    """An internal guarantee of an algorithm failed to hold."""


class CompilationError(LabError):
    """Compiled execution could not be carried out soundly."""


class SeparationViolation(CompilationError):
    pass


class CapacityError(LabError):
    exit_code = 3

    def __init__(self, message: str, radius: int | None = None):
        self.radius = radius
        super().__init__(message)


class InfeasibleError(LabError):
    exit_code = 3


class OracleFailure(LabError):
    exit_code = 4
