"""
Exception types raised by netembed.

Every error derives from :class:`NetEmbedError` so that the harness can
record a failing check without masking unrelated bugs.
"""

from __future__ import annotations

from typing import Any, Iterable, Sequence


class NetEmbedError(Exception):
    """Base class for all netembed errors."""


class DomainError(NetEmbedError, ValueError):
    """An input lies outside the domain of an operation."""


class SingularMetricError(NetEmbedError, ArithmeticError):
    """The metric tensor is not invertible at a queried point."""


class IntegrationError(NetEmbedError):
    """The geodesic integrator failed (for example step-size underflow)."""


class BVPError(NetEmbedError):
    """Shooting did not converge within the restart budget."""

    def __init__(self, message: str, residual: float) -> None:
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class ConfigurationError(NetEmbedError, ValueError):
    """A scenario or generator precondition is violated."""

    def __init__(self, problems: Iterable[str] | str) -> None:
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class CoverageError(NetEmbedError):
    """A point lies outside the region covered by a net or table."""


class EvaluationError(NetEmbedError):
    """A simplex-map evaluation failed."""

    def __init__(self, message: str, vertices: Sequence[Any]) -> None:
        super().__init__(f"{message} on vertices {list(vertices)}")
        self.vertices = tuple(vertices)


class ResolutionError(NetEmbedError):
    """Adaptive refinement ran out of budget."""


class DegeneracyError(NetEmbedError):
    """No regular value was found, or an image hit the basepoint."""
