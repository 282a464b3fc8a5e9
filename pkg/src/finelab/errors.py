"""
Exception hierarchy for finelab.

Every failure raised by the library derives from FineLabError, which is a
ValueError so that callers written against plain ValueError keep working.
"""

from __future__ import annotations

from typing import Any, Dict, Optional


class FineLabError(ValueError):
    """Base class for all finelab errors.

    Args:
        message: Human readable description.
        step: Optional certification step label this error should be reported under.
    """

    step: Optional[str] = None

    def __init__(self, message: str, *, step: Optional[str] = None):
        super().__init__(message)
        if step is not None:
            self.step = step


class DomainError(FineLabError):
    """A point lies outside the domain of an operation."""


class GeometryError(FineLabError):
    """Inconsistent geometric input (overlaps, wrong circle, degenerate shapes)."""


class ParameterError(FineLabError):
    """A scalar parameter is out of range."""


class SingularNodeError(FineLabError):
    """An integrand is not finite at a quadrature node."""

    def __init__(self, node: complex, value: Any):
        super().__init__(f"integrand not finite at node {node!r} (value {value!r})")
        self.node = node
        self.value = value


class BranchCutError(DomainError):
    """Evaluation point lies on a branch cut."""


class PreconditionError(FineLabError):
    """A caller-asserted precondition failed a spot check."""

    def __init__(self, message: str, *, witness: Any = None, step: Optional[str] = None):
        super().__init__(message, step=step)
        self.witness = witness


class ConstructionError(FineLabError):
    """A constructive recipe did not reach its target within its budget."""

    def __init__(self, message: str, *, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CertificationError(FineLabError):
    """Base class for failures of the certification chain."""


class CircleSelectionError(CertificationError):
    """No radius in the schedule yields a circle avoiding the thin set."""

    step = "circle-selection"


class NormalizationError(CertificationError):
    """The affine normalization of a thinness certificate is infeasible."""

    step = "normalization"


class BoundConstructionError(CertificationError):
    """The quarter-bound radius search failed."""

    step = "quarter-bound"


class ScenarioInputError(FineLabError):
    """A scenario file failed to parse or validate.

    Args:
        message: Description of the problem.
        field: Dotted field path, when known.
        line: 1-based line number in the source file, when known.
    """

    def __init__(self, message: str, *, field: Optional[str] = None, line: Optional[int] = None):
        location = []
        if field:
            location.append(f"field {field!r}")
        if line:
            location.append(f"line {line}")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")
        self.field = field
        self.line = line


class StepFailed(FineLabError):
    """A registered step raised a foreign exception; carries the step name and cause."""

    def __init__(self, step: str, cause: BaseException):
        super().__init__(f"step {step!r} failed: {cause}", step=step)
        self.cause = cause
