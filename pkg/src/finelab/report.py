"""
Report emission and parsing.

Certificates are pydantic models written as JSON; tables are comma-separated
with a header row and '.' decimals; plot data are tables with x, y and an
optional err column. Every writer has a reader, and reading back what was
written gives the same record.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .geometry import CircArc, Disk
from .walk import HMEstimate

Pair = Tuple[float, float]
PathLike = Union[str, Path]

CERTIFICATE_FORMAT = "finelab-certificate/1"
LICENSE_TEXT = (
    "conclusion of the fine analytic continuation theorem, every recorded hypothesis holding "
    "with its stated margin: "
    "the graph of F over V1 = D(p, r1) minus U1 lies in the pluripolar hull of the graph of F over V ∩ D"
)


def pair(z: complex) -> Pair:
    z = complex(z)
    return (z.real, z.imag)


def point(xy: Sequence[float]) -> complex:
    return complex(xy[0], xy[1])


def finite_or_none(x: float) -> Optional[float]:
    return float(x) if math.isfinite(x) else None


# ============================================================
# RECORDS
# ============================================================


class _Record(BaseModel):
    # cert(p) is -inf on a certified thin set; keep it through JSON.
    model_config = ConfigDict(extra="forbid", ser_json_inf_nan="constants")


class DiskRecord(_Record):
    center: Pair
    radius: float

    @classmethod
    def of(cls, disk: Disk) -> "DiskRecord":
        return cls(center=pair(disk.center), radius=disk.radius)

    def to_disk(self) -> Disk:
        return Disk(point(self.center), self.radius)


class ArcRecord(_Record):
    center: Pair
    radius: float
    start: float
    sweep: float

    @classmethod
    def of(cls, arc: CircArc) -> "ArcRecord":
        return cls(center=pair(arc.center), radius=arc.radius, start=arc.start, sweep=arc.sweep)

    def to_arc(self) -> CircArc:
        return CircArc(point(self.center), self.radius, self.start, self.sweep)


class EstimateRecord(_Record):
    value: float
    std_error: float
    samples: int
    hits: int
    max_step_paths: int
    seed: int

    @classmethod
    def of(cls, e: HMEstimate) -> "EstimateRecord":
        return cls(
            value=e.value,
            std_error=e.std_error,
            samples=e.samples_used,
            hits=e.hits,
            max_step_paths=e.max_step_paths,
            seed=e.seed,
        )


class StageRecord(_Record):
    """Walks of one exhaustion stage at the V1 sample points."""

    obstacles: List[DiskRecord] = Field(default_factory=list)
    exact: List[float] = Field(default_factory=list)
    certificate: List[float] = Field(default_factory=list)
    estimates: List[EstimateRecord] = Field(default_factory=list)


class ThinnessRecord(_Record):
    verdict: str
    value_at_target: float
    sup_on_union: Optional[float] = None
    samples: int = 0


class ConvergenceRecord(_Record):
    stage: int
    gap: float
    sup: float
    bound: Optional[float] = None


class TwoConstantRecord(_Record):
    stage: int
    eps: float
    bound: float


class HullCertificate(_Record):
    """Self-contained record of one certification run.

    FAILED records keep whatever was computed before the failing step.
    """

    format: Literal["finelab-certificate/1"] = CERTIFICATE_FORMAT
    label: str
    verdict: Literal["CERTIFIED", "FAILED"]
    failed_step: Optional[str] = None
    reason: Optional[str] = None
    reliable: bool = True
    licenses: str = LICENSE_TEXT

    p: Pair
    thinness: Optional[ThinnessRecord] = None
    union: List[DiskRecord] = Field(default_factory=list)
    rho: Optional[float] = None
    J: Optional[ArcRecord] = None

    r1: Optional[float] = None
    disk_minimum: Optional[float] = None
    U1: List[DiskRecord] = Field(default_factory=list)
    points: List[Pair] = Field(default_factory=list)
    stages: List[StageRecord] = Field(default_factory=list)
    omega_minima: List[float] = Field(default_factory=list)
    quarter: float = 0.25
    sigma: float = 3.0

    convergence: List[ConvergenceRecord] = Field(default_factory=list)
    uniform_bound: Optional[float] = None
    convergence_tol: Optional[float] = None
    two_constant: List[TwoConstantRecord] = Field(default_factory=list)
    propagation: Dict[str, float] = Field(default_factory=dict)

    wos: Dict[str, Any] = Field(default_factory=dict)
    tolerances: Dict[str, Any] = Field(default_factory=dict)
    sampling: Dict[str, Any] = Field(default_factory=dict)
    scenario: Dict[str, Any] = Field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.verdict == "CERTIFIED"


class RunSummary(_Record):
    """Structured report of the pipelines other than certify."""

    label: str
    pipeline: str
    verdict: str
    details: Dict[str, Any] = Field(default_factory=dict)


# ============================================================
# WRITERS AND READERS
# ============================================================


def write_certificate(path: PathLike, cert: HullCertificate) -> Path:
    path = Path(path)
    path.write_text(cert.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def read_certificate(path: PathLike) -> HullCertificate:
    return HullCertificate.model_validate_json(Path(path).read_text(encoding="utf-8"))


def _cell(value: Any) -> str:
    if isinstance(value, np.generic):
        value = value.item()
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table(path: PathLike, rows: Iterable[Mapping[str, Any]], fieldnames: Sequence[str]) -> Path:
    """Comma-separated table with a header row; floats use repr, None is empty."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(row.get(k)) for k in fieldnames})
    return path


def read_table(path: PathLike) -> List[Dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_plot_data(
    path: PathLike, x: Sequence[float], y: Sequence[float], err: Optional[Sequence[float]] = None
) -> Path:
    if len(x) != len(y) or (err is not None and len(err) != len(x)):
        raise ValueError("plot columns must have equal length")
    names = ["x", "y"] if err is None else ["x", "y", "err"]
    columns = [x, y] if err is None else [x, y, err]
    rows = [dict(zip(names, (float(c) for c in values))) for values in zip(*columns)]
    return write_table(path, rows, names)


def read_plot_data(path: PathLike) -> Dict[str, List[float]]:
    rows = read_table(path)
    if not rows:
        return {}
    return {name: [float(r[name]) for r in rows] for name in rows[0]}
