"""
Exception hierarchy for the local search solvers
Every error raised by the engines, oracles, parsers and generators derives from SolverError

The CLI maps the three families to exit codes:
    InstanceError   -> 2 (bad input)
    InfeasibleError -> 3 (instance or start solution cannot be solved)
    LimitError      -> 4 (a configured size cap or budget was exceeded)
"""

from typing import Optional


class SolverError(Exception):
    """Base class for all solver errors"""


# Input problems

class InstanceError(SolverError, ValueError):
    """The instance (or its text) is malformed"""


class ParseError(InstanceError):
    """
    Raised by the text parsers

    Args:
        message: What went wrong
        line: 1-based line number of the offending line (if known)
    """

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NotATree(InstanceError):
    """The edge list does not describe a spanning tree"""


class BadVertex(InstanceError):
    """A vertex id is outside the valid range"""


class NonPositiveWeight(InstanceError):
    """A link or edge has weight <= 0"""


class SelfLoopLink(InstanceError):
    """A link joins a vertex with itself"""


class MissingSection(InstanceError):
    """A required section of an STP file is absent"""


class ConfigError(InstanceError):
    """Generator or run configuration is inconsistent"""


# Feasibility problems

class InfeasibleError(SolverError):
    """No feasible solution exists for the requested operation"""


class Infeasible(InfeasibleError):
    """The full link set does not cover the tree"""


class InfeasibleStart(InfeasibleError):
    """The given starting solution is not a cover"""


class Disconnected(InfeasibleError):
    """Some terminals (or subset vertices) are not mutually reachable"""


# Limits

class LimitError(SolverError):
    """A configured limit was exceeded"""


class SizeLimit(LimitError):
    """An input is larger than the configured cap for an exact routine"""


class SearchTimeout(LimitError):
    """The branch-and-bound node budget was exhausted"""

    def __init__(self, message: str, nodes: int = 0):
        self.nodes = nodes
        super().__init__(message)


class InvariantViolation(SolverError, AssertionError):
    """A runtime check of a solver invariant failed"""
