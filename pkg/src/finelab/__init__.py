"""finelab package.

Numerical certificates for fine analytic continuation and pluripolar hulls.

High-level entrypoints:
- Scenario, certify_fine_continuation, run_scenario_file
- StepRegistry, StepPlugin
- hm_wos, hm_disk_arc_exact, fine_quarter_bound
- build_thin_union, normalize_certificate
"""

from .core import StepEntry, StepPlugin, StepRegistry
from .errors import (
    BranchCutError,
    CertificationError,
    CircleSelectionError,
    DomainError,
    FineLabError,
    GeometryError,
    ParameterError,
    PreconditionError,
    ScenarioInputError,
)
from .harmonic import fine_quarter_bound, hm_disk_arc_exact, hm_wos
from .plugins import GuardPlugin, TracePlugin, ValidatePlugin
from .potential import build_thin_union, normalize_certificate
from .scenario import Scenario, certify_fine_continuation, run_scenario_file, verify_certificate

__all__ = [
    "StepRegistry",
    "StepPlugin",
    "StepEntry",
    "GuardPlugin",
    "TracePlugin",
    "ValidatePlugin",
    "FineLabError",
    "DomainError",
    "GeometryError",
    "ParameterError",
    "PreconditionError",
    "BranchCutError",
    "CertificationError",
    "CircleSelectionError",
    "ScenarioInputError",
    "hm_wos",
    "hm_disk_arc_exact",
    "fine_quarter_bound",
    "build_thin_union",
    "normalize_certificate",
    "Scenario",
    "certify_fine_continuation",
    "run_scenario_file",
    "verify_certificate",
]

__version__ = "0.1.0"
