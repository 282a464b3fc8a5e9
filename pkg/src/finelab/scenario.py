"""
Scenario pipelines.

A scenario file names one pipeline (certify, components, sheets, hm-study,
decay-study) and everything it needs: the function, the boundary point p, the
thin set and its certificate, the walk settings and the tolerances.

The certification chain runs as named steps on the ``steps`` registry, whose
guard plugin labels any failure with the step it came from:

    thinness -> normalization -> arc-selection -> quarter-bound
             -> convergence -> propagation
"""

from __future__ import annotations

import itertools
import logging
import math
import re
import sys
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError
from scipy import ndimage

from . import plugins  # noqa: F401  (registers guard/trace/validate)
from .config import ScenarioFile, SamplingConfig, StudySection, Tolerances, WoSConfig, resolve_profile
from .core import StepRegistry
from .errors import CertificationError, FineLabError, ParameterError, PreconditionError, ScenarioInputError
from .finefun import (
    ApproximantSeq,
    BorelSeriesFn,
    CauchyTransformFn,
    ConvergenceTable,
    EntireFn,
    FineFunction,
    SqrtBranchSumFn,
    continue_sqrt_branch,
    uniform_convergence_check,
)
from .geometry import CircArc, Disk, DiskUnion, ObstacleSet, Segment, as_point, circle_points, disk_cloud
from .harmonic import (
    MIN_ARC_SWEEP,
    QUARTER_DISK_LEVEL,
    DecayReport,
    Exhaustion,
    QuarterBound,
    SlitDomain,
    arm_exhaustion,
    exterior_hm_decay,
    fine_quarter_bound,
    hm_disk_arc_exact,
    hm_wos,
    propagation_bound,
    two_constant_bound,
)
from .potential import (
    LogPotentialCertificate,
    ThinnessReport,
    ThinSetSpec,
    build_thin_union,
    normalize_certificate,
    thinness_report,
)
from .report import (
    ArcRecord,
    ConvergenceRecord,
    DiskRecord,
    EstimateRecord,
    HullCertificate,
    RunSummary,
    StageRecord,
    ThinnessRecord,
    TwoConstantRecord,
    finite_or_none,
    pair,
    point,
    read_certificate,
    write_certificate,
    write_plot_data,
    write_table,
)
from .walk import ArcTarget, derive_seed

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAILED = 1
EXIT_INPUT = 2
EXIT_UNRELIABLE = 3

ARC_MARGIN = 1e-3


# ============================================================
# SCENARIO LOADING
# ============================================================


def _locate(text: str, loc: Sequence[Any]) -> Optional[int]:
    """Line of ``[section]`` / ``key = ...`` named by a validation error location."""
    if not loc:
        return None
    section = str(loc[0])
    key = str(loc[1]) if len(loc) > 1 else None
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line.startswith("[") and line.endswith("]"):
            current = line.strip("[]").strip()
            if key is None and current == section:
                return lineno
        elif current == section and key is not None and line.split("=", 1)[0].strip() == key:
            return lineno
    return None


def parse_scenario_text(text: str) -> ScenarioFile:
    """Parse and validate scenario TOML.

    Raises:
        ScenarioInputError: On syntax errors or schema violations, naming the
            field and line when they can be found.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        match = re.search(r"line (\d+)", str(exc))
        raise ScenarioInputError(f"malformed scenario: {exc}", line=int(match.group(1)) if match else None) from exc
    try:
        return ScenarioFile.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = err.get("loc", ())
        dotted = ".".join(str(part) for part in loc) or None
        raise ScenarioInputError(err.get("msg", "invalid value"), field=dotted, line=_locate(text, loc)) from exc


def apply_overrides(
    config: ScenarioFile,
    *,
    profile: Optional[str] = None,
    samples: Optional[int] = None,
    seed: Optional[int] = None,
    resolution: Optional[int] = None,
) -> ScenarioFile:
    """Merge command-line overrides, then file values, then profile defaults.

    Raises:
        ScenarioInputError: If a merged value fails validation (e.g. samples < 1000).
    """
    wos, sampling, tol = config.wos, config.sampling, config.tolerances
    try:
        opts = resolve_profile(
            profile or config.scenario.profile,
            samples=samples if samples is not None else (wos.samples if "samples" in wos.model_fields_set else None),
            seed=seed if seed is not None else wos.seed,
            resolution=resolution
            if resolution is not None
            else (sampling.grid_resolution if "grid_resolution" in sampling.model_fields_set else None),
        )
    except ValueError as exc:
        raise ScenarioInputError(str(exc), field="scenario.profile") from exc

    def chosen(model, name, value):
        return getattr(model, name) if name in model.model_fields_set else value

    try:
        merged_wos = WoSConfig.model_validate({**wos.model_dump(), "samples": opts.samples, "seed": opts.seed})
        merged_sampling = SamplingConfig.model_validate(
            {
                **sampling.model_dump(),
                "grid_resolution": opts.grid_resolution,
                "normalize_samples": chosen(sampling, "normalize_samples", opts.normalize_samples),
            }
        )
        merged_tol = Tolerances.model_validate({**tol.model_dump(), "sigma": chosen(tol, "sigma", opts.sigma)})
    except ValidationError as exc:
        err = exc.errors()[0]
        section = {"WoSConfig": "wos.", "SamplingConfig": "sampling.", "Tolerances": "tolerances."}.get(exc.title, "")
        dotted = ".".join(str(p) for p in err.get("loc", ()))
        raise ScenarioInputError(err.get("msg", "invalid value"), field=f"{section}{dotted}") from exc
    return config.model_copy(update={"wos": merged_wos, "sampling": merged_sampling, "tolerances": merged_tol})


def spiral_points(p: complex, count: int, turns: float, gap: float, decay: float) -> List[complex]:
    """p exp(s_n (1 + e^{iφ_n} / 2)), s_n = gap decay^n: outside the unit disk, spiralling into p."""
    pts = []
    for n in range(1, count + 1):
        s = gap * decay**n
        phi = 2.0 * math.pi * turns * n / max(count, 1)
        pts.append(complex(p * np.exp(s * (1.0 + 0.5 * np.exp(1j * phi)))))
    return pts


def build_function(config: ScenarioFile, thin: ThinSetSpec) -> FineFunction:
    section = config.function
    if section.kind == "borel":
        return BorelSeriesFn.from_union(thin.union)
    if section.kind == "cauchy":
        return CauchyTransformFn(thin.union, section.density, resolution=section.resolution)
    if section.kind == "sqrt":
        segments = tuple(Segment(complex(ax, ay), complex(bx, by)) for ax, ay, bx, by in section.segments)
        if section.weights:
            coeffs = tuple(point(w) for w in section.weights)
        else:
            coeffs = tuple(1.0 / (n + 1) ** 2 for n in range(len(segments)))
        return SqrtBranchSumFn(segments, coeffs)
    return EntireFn(tuple(point(c) for c in section.coefficients))


@dataclass
class Scenario:
    """A validated scenario with its derived objects."""

    config: ScenarioFile
    p: complex
    thin: ThinSetSpec
    function: FineFunction
    source: Optional[Path] = None

    @classmethod
    def from_config(cls, config: ScenarioFile, source: Optional[Path] = None) -> "Scenario":
        geo, sampling = config.geometry, config.sampling
        p = complex(np.exp(1j * geo.target_angle))
        if geo.union == "spiral":
            points = spiral_points(p, geo.count, geo.spiral_turns, geo.spiral_gap, geo.spiral_decay)
        elif geo.union == "explicit":
            points = [point(xy) for xy in geo.points]
        else:
            points = []
        thin = build_thin_union(
            points,
            p,
            ambient_radius=geo.ambient_radius,
            weight_ratio=geo.weight_ratio,
            samples_per_disk=sampling.union_samples_per_disk,
            cloud_seed=sampling.cloud_seed,
        )
        return cls(config, p, thin, build_function(config, thin), source)

    @classmethod
    def from_file(cls, path: Union[str, Path], **overrides: Any) -> "Scenario":
        """Load a scenario file; keyword overrides go through apply_overrides."""
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ScenarioInputError(f"cannot read scenario: {exc}") from exc
        config = apply_overrides(parse_scenario_text(text), **overrides)
        return cls.from_config(config, path)

    @property
    def label(self) -> str:
        return self.config.scenario.label

    @property
    def pipeline(self) -> str:
        return self.config.scenario.pipeline

    @property
    def union(self) -> DiskUnion:
        return self.thin.union

    @property
    def radius(self) -> float:
        return self.config.geometry.radius

    @property
    def wos(self) -> WoSConfig:
        return self.config.wos

    @property
    def tolerances(self) -> Tolerances:
        return self.config.tolerances

    @property
    def sampling(self) -> SamplingConfig:
        return self.config.sampling

    @property
    def study(self) -> StudySection:
        return self.config.study

    @cached_property
    def approximants(self) -> ApproximantSeq:
        return self.function.approximants()

    def fine_samples(self, count: Optional[int] = None) -> np.ndarray:
        """Points of V = closed D(p, r) minus U, off every excluded compact of the approximants."""
        count = count or self.sampling.v_samples
        cloud = disk_cloud(Disk(self.p, self.radius), 4 * count, self.sampling.cloud_seed + 7, shrink=0.999)
        keep = ~self.union.contains(cloud, closed=True) if len(self.union) else np.ones(cloud.shape, bool)
        seq = self.approximants
        excluded = {id(ob): ob for n in seq.stages for ob in seq.generator(n).excluded}
        if excluded:
            d, _ = ObstacleSet(tuple(excluded.values())).distances(cloud)
            keep &= d > 1e-9
        return cloud[keep][:count]


# ============================================================
# CERTIFICATION STEPS
# ============================================================

steps = StepRegistry("steps", prefix="step_").plug("guard").plug("trace")


@steps
def step_thinness(s: Scenario) -> ThinnessReport:
    report = thinness_report(
        s.thin,
        depth=s.sampling.thinness_depth,
        per_annulus=s.sampling.thinness_per_annulus,
        cloud_seed=s.sampling.cloud_seed,
    )
    if not report.certified:
        raise CertificationError(
            f"thinness at p not certified (cert(p)={report.value_at_target:.4g}, sup on U={report.sup_on_union:.4g})"
        )
    return report


@steps
def step_normalization(s: Scenario) -> Tuple[LogPotentialCertificate, float]:
    return normalize_certificate(
        s.thin.certificate,
        s.p,
        s.union,
        schedule=s.sampling.rho_schedule(),
        samples=s.sampling.normalize_samples,
        per_disk=s.sampling.union_samples_per_disk,
        cloud_seed=s.sampling.cloud_seed,
    )


@steps
def step_arc_selection(p: complex, rho: float) -> CircArc:
    """Arc of |z - p| = rho inside the unit disk, centred on the inward direction at p."""
    half = math.acos(min(1.0, 0.5 * rho)) - ARC_MARGIN
    arc = CircArc(p, rho, math.atan2(p.imag, p.real) + math.pi - half, 2.0 * half)
    if arc.sweep < MIN_ARC_SWEEP:
        raise CertificationError(f"arc inside the unit disk has angular length {arc.sweep:.6g} < 5π/6")
    return arc


@steps("quarter-bound")
def step_quarter_bound(s: Scenario, cert: LogPotentialCertificate, rho: float, J: CircArc) -> QuarterBound:
    disk = Disk(s.p, rho)
    exhaustion = Exhaustion.from_union(s.union, s.config.geometry.exhaustion, within=disk)
    tol, sampling = s.tolerances, s.sampling
    result = fine_quarter_bound(
        s.p,
        rho,
        s.union,
        cert,
        exhaustion,
        J,
        s.wos,
        sigma=tol.sigma,
        quarter=tol.quarter,
        gap=tol.hm3_gap,
        r1_schedule=sampling.r1_schedule(rho),
        resolution=sampling.grid_resolution,
        v1_points=sampling.v1_points,
        circle_samples=sampling.circle_samples,
        cloud_seed=sampling.cloud_seed,
    )
    if not (result.passed and result.margins_passed):
        raise CertificationError(f"harmonic measure of J fell below the bound on V1 (minima {list(result.minima)})")
    return result


@steps
def step_convergence(s: Scenario) -> ConvergenceTable:
    stages = s.config.function.stages or None
    table = uniform_convergence_check(s.approximants, s.fine_samples(), stages=stages, tol=s.tolerances.convergence)
    if not table.passed:
        raise CertificationError(
            f"approximants not uniformly convergent on V (final gap {table.final_gap:.4g}, bounded={table.bounded})"
        )
    return table


@steps
def step_propagation(levels: Sequence[float], omega_lb: float) -> Dict[str, float]:
    return {repr(float(N)): propagation_bound(float(N), omega_lb) for N in levels}


def two_constant_table(
    seq: ApproximantSeq, J: CircArc, stages: Optional[int] = None, omega_lb: float = 0.25, samples: int = 64
) -> List[TwoConstantRecord]:
    """Bounds omega log(eps_n) + (1 - omega) log(C) with eps_n = sup_J |F_n - F| and C = 2 x uniform bound."""
    pts = J.sample(samples)
    chosen = seq.stages if stages is None else seq.stages[:stages]
    limit = seq.limit if seq.limit is not None else seq.generator(chosen[-1]).func
    target = np.asarray(limit(pts))
    C = max(1.0, 2.0 * seq.uniform_bound)
    rows = []
    for n in chosen:
        gap = float(np.max(np.abs(np.asarray(seq.generator(n).func(pts)) - target)))
        eps = min(1.0, max(gap, sys.float_info.min))
        rows.append(TwoConstantRecord(stage=n, eps=eps, bound=two_constant_bound(eps, C, omega_lb)))
    return rows


# ============================================================
# CERTIFY
# ============================================================


def _base_record(s: Scenario) -> Dict[str, Any]:
    ambient = s.config.geometry.ambient_radius
    return {
        "label": s.label,
        "p": pair(s.p),
        "union": [DiskRecord.of(d) for d in s.union.near(s.p, ambient)],
        "quarter": s.tolerances.quarter,
        "sigma": s.tolerances.sigma,
        "wos": s.wos.model_dump(),
        "tolerances": s.tolerances.model_dump(mode="json"),
        "sampling": s.sampling.model_dump(),
        "scenario": s.config.model_dump(mode="json"),
    }


def certify_fine_continuation(s: Scenario) -> HullCertificate:
    """Run the certification chain; FAILED records name the first failing step."""
    record = _base_record(s)
    try:
        thin = steps["thinness"](s)
        record["thinness"] = ThinnessRecord(
            verdict=thin.verdict,
            value_at_target=thin.value_at_target,
            sup_on_union=finite_or_none(thin.sup_on_union),
            samples=thin.samples,
        )
        cert, rho = steps["normalization"](s)
        record["rho"] = rho
        J = steps["arc-selection"](s.p, rho)
        record["J"] = ArcRecord.of(J)

        quarter = steps["quarter-bound"](s, cert, rho, J)
        record.update(
            r1=quarter.r1,
            disk_minimum=quarter.disk_minimum,
            U1=[DiskRecord.of(d) for d in quarter.U1],
            points=[pair(z) for z in quarter.points],
            omega_minima=list(quarter.minima),
            reliable=quarter.reliable,
            stages=[
                StageRecord(
                    obstacles=[DiskRecord.of(ob) for ob in rep.obstacles],
                    exact=list(rep.exact),
                    certificate=list(rep.certificate),
                    estimates=[EstimateRecord.of(e) for e in rep.estimates],
                )
                for rep in quarter.stages
            ],
        )

        table = steps["convergence"](s)
        record.update(
            convergence=[ConvergenceRecord(stage=r.stage, gap=r.gap, sup=r.sup, bound=r.bound) for r in table.rows],
            uniform_bound=table.uniform_bound,
            convergence_tol=table.tolerance,
            two_constant=two_constant_table(s.approximants, J, s.config.function.stages or None, s.tolerances.quarter),
        )
        record["propagation"] = steps["propagation"](s.tolerances.propagation_levels, s.tolerances.quarter)
    except FineLabError as exc:
        step = exc.step or "unknown"
        logger.warning("certification of %s FAILED at %s: %s", s.label, step, exc)
        return HullCertificate(verdict="FAILED", failed_step=step, reason=str(exc), **record)
    logger.info("certification of %s: CERTIFIED (reliable=%s)", s.label, record.get("reliable", True))
    return HullCertificate(verdict="CERTIFIED", **record)


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    failures: Tuple[str, ...] = ()
    reproduced: int = 0


def verify_certificate(record: HullCertificate, reproduce: bool = False) -> VerificationReport:
    """Re-check a certificate from its own data.

    The static pass re-derives every verdict from the stored numbers. With
    ``reproduce`` the stored walks are re-run from their seeds and must give
    the same hit counts.
    """
    failures: List[str] = []
    if not record.certified:
        return VerificationReport(False, (f"verdict is FAILED at {record.failed_step}",))

    p = point(record.p)
    if record.thinness is None or record.thinness.verdict != "THIN-CERTIFIED":
        failures.append("thinness")
    if record.J is None or record.rho is None:
        return VerificationReport(False, tuple(failures + ["arc-selection: missing J"]))
    J = record.J.to_arc()
    if abs(J.center - p) > 1e-12 or abs(J.radius - record.rho) > 1e-12 * record.rho:
        failures.append("arc-selection: J is not on the circle |z - p| = rho")
    if J.sweep < MIN_ARC_SWEEP - 1e-12 or np.any(np.abs(J.sample(256)) >= 1.0):
        failures.append("arc-selection: J too short or not inside the unit disk")
    union = DiskUnion(tuple(d.to_disk() for d in record.union))
    if len(union) and union.meets_circle(p, record.rho):
        failures.append("circle-selection: circle meets U")

    if record.disk_minimum is None or record.disk_minimum < QUARTER_DISK_LEVEL:
        failures.append("quarter-bound: disk minimum below 4/12")
    for k, stage in enumerate(record.stages):
        for i, e in enumerate(stage.estimates):
            if e.value < record.quarter - record.sigma * e.std_error:
                failures.append(f"quarter-bound: stage {k} point {i} below the quarter bound")
            if e.value - (stage.exact[i] + stage.certificate[i]) < -record.sigma * e.std_error:
                failures.append(f"quarter-bound: stage {k} point {i} margin negative")
    if record.stages:
        expected = [min(e.value for e in st.estimates) for st in record.stages]
        if expected != list(record.omega_minima):
            failures.append("quarter-bound: stored minima disagree with estimates")

    if not record.convergence or record.convergence_tol is None or record.uniform_bound is None:
        failures.append("convergence: missing table")
    else:
        if record.convergence[-1].gap > record.convergence_tol:
            failures.append("convergence: final gap above tolerance")
        if any(r.sup > record.uniform_bound * (1.0 + 1e-12) for r in record.convergence):
            failures.append("convergence: sup above uniform bound")
    for key, value in record.propagation.items():
        if value != propagation_bound(float(key), record.quarter):
            failures.append(f"propagation: N={key}")

    reproduced = 0
    if reproduce and not failures:
        cfg = WoSConfig.model_validate(record.wos)
        target = ArcTarget(J)
        disk = Disk(p, record.rho)
        for k, stage in enumerate(record.stages):
            domain = SlitDomain(disk, tuple(d.to_disk() for d in stage.obstacles), label=f"stage-{k}")
            for i, (xy, e) in enumerate(zip(record.points, stage.estimates)):
                again = hm_wos(domain, target, point(xy), cfg.with_seed(e.seed))
                reproduced += 1
                if again.hits != e.hits or again.value != e.value:
                    failures.append(f"reproduce: stage {k} point {i} gave {again.hits} hits, stored {e.hits}")
    return VerificationReport(not failures, tuple(failures), reproduced)


# ============================================================
# COMPONENTS
# ============================================================


@dataclass(frozen=True)
class Component:
    label: int
    side: str
    cells: int
    witness_fraction: float


@dataclass(frozen=True)
class ComponentReport:
    """Components of the grid region with the share of the witness half-circle each holds."""

    components: Tuple[Component, ...]
    unique_nonthin: Optional[int]
    opposite: Optional[int] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)


def _half_circle(p: complex, rho: float, outside, n: int) -> np.ndarray:
    pts = circle_points(p, rho, n)
    return pts[outside(pts)]


def component_analysis(
    p: complex,
    r: float,
    U: DiskUnion,
    rho: float,
    *,
    resolution: int = 512,
    dividing_line: bool = False,
    witnesses: int = 720,
) -> ComponentReport:
    """Flood-fill the part of D(p, r) minus the closure of U beyond the unit circle.

    The component holding every sampled point of the half-circle |z - p| = rho
    beyond the unit circle is the selected one. None is selected when a
    witness lies in the closure of U. With ``dividing_line`` the tangent line at p
    replaces the circle, and both sides are labelled.
    """
    p = as_point(p)
    if not 0 < rho < r:
        raise ParameterError(f"witness radius must lie in (0, r), got {rho!r}")
    offsets = (np.arange(resolution) + 0.5) / resolution * 2.0 * r - r
    Z = p + offsets[None, :] + 1j * offsets[:, None]
    h = 2.0 * r / resolution
    region = np.abs(Z - p) < r
    if len(U):
        region &= ~U.contains(Z.ravel(), closed=True).reshape(Z.shape)

    if dividing_line:
        u = p / abs(p)

        def beyond(z):
            return (np.asarray(z) * np.conj(u)).real > 1.0

        def within(z):
            return (np.asarray(z) * np.conj(u)).real < 1.0

        sides = [("outer", beyond), ("inner", within)]
    else:
        sides = [("outer", lambda z: np.abs(z) > 1.0)]

    def cell_of(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        col = np.clip(((z.real - (p.real - r)) / h).astype(int), 0, resolution - 1)
        row = np.clip(((z.imag - (p.imag - r)) / h).astype(int), 0, resolution - 1)
        return row, col

    components: List[Component] = []
    selected: Dict[str, Optional[int]] = {}
    diagnostics: Dict[str, Any] = {"resolution": resolution}
    next_label = 0
    for side, test in sides:
        labels, count = ndimage.label(region & test(Z))
        witness = _half_circle(p, rho, test, witnesses)
        hit = labels[cell_of(witness)]
        cut = U.contains(witness, closed=True) if len(U) else np.zeros(witness.shape, dtype=bool)
        diagnostics[f"{side}_witness_missed"] = int(np.count_nonzero(hit == 0))
        diagnostics[f"{side}_witness_in_U"] = int(np.count_nonzero(cut))
        # A background cell under a witness outside the closure of U lies within a cell of an edge.
        hit = hit[(hit > 0) | cut]
        sizes = ndimage.sum_labels(np.ones(labels.shape), labels, index=np.arange(1, count + 1))
        chosen = None
        for k in range(1, count + 1):
            frac = float(np.mean(hit == k)) if hit.size else 0.0
            components.append(Component(next_label + k, side, int(sizes[k - 1]), frac))
            if hit.size and frac == 1.0 and not cut.any():
                chosen = next_label + k
        next_label += count
        selected[side] = chosen
    report = ComponentReport(tuple(components), selected["outer"], selected.get("inner"), diagnostics)
    logger.info("components: %d found, selected %s", len(components), report.unique_nonthin)
    return report


def unique_component_finder(s: Scenario, rho: float, *, dividing_line: bool = False) -> ComponentReport:
    """Component analysis of the scenario's V beyond the unit circle.

    Raises:
        PreconditionError: If thinness of U at p is not certified.
    """
    thin = thinness_report(s.thin, s.sampling.thinness_depth, s.sampling.thinness_per_annulus, s.sampling.cloud_seed)
    if not thin.certified:
        raise PreconditionError("U is not certified thin at p", witness=thin)
    return component_analysis(
        s.p, s.radius, s.union, rho, resolution=s.sampling.component_resolution, dividing_line=dividing_line
    )


# ============================================================
# SHEETS
# ============================================================


@dataclass(frozen=True)
class Sheet:
    signs: Tuple[int, ...]
    flipped: Tuple[int, ...]
    function: SqrtBranchSumFn
    residual: float


@dataclass(frozen=True)
class SheetAtlas:
    base: SqrtBranchSumFn
    sheets: Tuple[Sheet, ...]
    branch_points: Tuple[Tuple[complex, complex], ...]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(sh.residual <= self.tolerance for sh in self.sheets)


def _sheet_test_points(n: int = 16) -> np.ndarray:
    return circle_points(0j, 0.5, n)


def branched_cover_enumerate(f: SqrtBranchSumFn, flips: int, tol: float = 1e-10) -> SheetAtlas:
    """All sheets whose sign vector differs from the base in at most ``flips`` places.

    Raises:
        ParameterError: If flips exceeds the number of segments.
    """
    if flips > len(f):
        raise ParameterError(f"flips={flips} exceeds the {len(f)} segments")
    pts = _sheet_test_points()
    sheets = []
    for k in range(flips + 1):
        for idx in itertools.combinations(range(len(f)), k):
            sheet = f
            for n in idx:
                sheet = sheet.flipped(n)
            residual = max(
                (float(np.max(sheet.flipped(n).sheet_residual(n, pts))) for n in range(len(f))), default=0.0
            )
            sheets.append(Sheet(sheet.signs, idx, sheet, residual))
    logger.info("sheet atlas: %d sheets", len(sheets))
    return SheetAtlas(f, tuple(sheets), tuple((s.a, s.b) for s in f.segments), tol)


@dataclass(frozen=True)
class MonodromyReport:
    index: int
    radius: float
    error: float
    passed: bool


def monodromy_check(f: SqrtBranchSumFn, n: int, *, steps_per_loop: int = 4096, tol: float = 1e-8) -> MonodromyReport:
    """Continue F once around a_n alone and compare with the sheet flipping sign n."""
    seg = f.segments[n]
    others = [s for i, s in enumerate(f.segments) if i != n]
    clearance = min([float(s.distance(seg.a)) for s in others] + [seg.length])
    radius = 0.5 * clearance
    away = (seg.a - seg.b) / abs(seg.a - seg.b)
    loop = seg.a + radius * away * np.exp(1j * np.linspace(0.0, 2.0 * math.pi, steps_per_loop + 1))
    z0 = complex(loop[0])
    term0 = f.signs[n] * complex(f.term(n, z0))
    end = continue_sqrt_branch(seg.a, seg.b, loop, term0 / f.coeffs[n])[-1] * f.coeffs[n]
    rest = complex(f(z0)) - term0
    landed = rest + end
    expected = complex(f.flipped(n)(z0))
    error = abs(landed - expected) / max(1.0, abs(expected))
    return MonodromyReport(n, float(radius), float(error), bool(error <= tol))


# ============================================================
# STUDIES
# ============================================================


@dataclass(frozen=True)
class StudyRow:
    z: complex
    exact: float
    estimate: float
    std_error: float
    with_obstacle: Optional[float]
    passed: bool


def hm_study(s: Scenario) -> Tuple[StudyRow, ...]:
    """Walk estimates against the exact disk measure, plus the obstacle comparison when K fits inside."""
    st, cfg, sigma = s.study, s.wos, s.tolerances.sigma
    center = point(st.p)
    disk = Disk(center, st.disk_radius)
    arc = CircArc(center, st.disk_radius, st.arc_start, st.arc_sweep)
    K = Disk(point(st.k_center), st.k_radius)
    obstacle = None
    if abs(K.center - center) + K.radius < disk.radius:
        obstacle = SlitDomain(disk, (K,), label="study-obstacle")
    plain = SlitDomain(disk, (), label="study")
    points = [point(xy) for xy in st.points]
    if not points:
        # centre plus three points halfway out: toward the arc, across, and away
        half = 0.5 * st.disk_radius
        points = [center] + [
            center + half * complex(np.exp(1j * (arc.mid_angle + t))) for t in (0.0, 0.5 * math.pi, math.pi)
        ]
    rows = []
    for i, z in enumerate(points):
        seeded = cfg.with_seed(derive_seed(cfg.seed, i))
        exact = hm_disk_arc_exact(disk, arc, z)
        est = hm_wos(plain, ArcTarget(arc), z, seeded)
        ok = abs(est.value - exact) <= sigma * est.std_error + 1e-12
        other = None
        if obstacle is not None and not K.contains(z, closed=True):
            with_k = hm_wos(obstacle, ArcTarget(arc), z, seeded)
            other = with_k.value
            ok &= with_k.value <= exact + sigma * with_k.std_error
        rows.append(StudyRow(complex(z), exact, est.value, est.std_error, other, bool(ok)))
    return tuple(rows)


def decay_study(s: Scenario) -> DecayReport:
    st = s.study
    p = point(st.p)
    stages = arm_exhaustion(p, st.arms, st.arm_inner, st.arm_outer, st.arm_width, st.stages)
    return exterior_hm_decay(
        Disk(point(st.k_center), st.k_radius),
        stages,
        p,
        s.wos,
        threshold=s.tolerances.decay_threshold,
        sigma=s.tolerances.sigma,
    )


# ============================================================
# RUNNING SCENARIO FILES
# ============================================================


@dataclass(frozen=True)
class RunResult:
    exit_code: int
    verdict: str
    artifacts: Tuple[Path, ...] = ()
    message: str = ""


def _exit_for(passed: bool, reliable: bool) -> int:
    if not passed:
        return EXIT_FAILED
    return EXIT_PASS if reliable else EXIT_UNRELIABLE


def _run_certify(s: Scenario, out: Path) -> RunResult:
    cert = certify_fine_continuation(s)
    files = [write_certificate(out / "certificate.json", cert)]
    convergence = [r.model_dump() for r in cert.convergence]
    files.append(write_table(out / "convergence.csv", convergence, ["stage", "gap", "sup", "bound"]))
    minima = [{"stage": k, "minimum": m} for k, m in enumerate(cert.omega_minima)]
    files.append(write_table(out / "stage_minima.csv", minima, ["stage", "minimum"]))
    propagation = [{"N": k, "bound": v} for k, v in cert.propagation.items()]
    files.append(write_table(out / "propagation.csv", propagation, ["N", "bound"]))
    two_constant = [r.model_dump() for r in cert.two_constant]
    files.append(write_table(out / "two_constant.csv", two_constant, ["stage", "eps", "bound"]))
    if cert.stages:
        last = cert.stages[-1].estimates
        files.append(
            write_plot_data(
                out / "quarter_bound.plot.csv",
                list(range(len(last))),
                [e.value for e in last],
                [e.std_error for e in last],
            )
        )
    code = _exit_for(cert.certified, cert.reliable)
    message = cert.verdict if cert.certified else f"FAILED({cert.failed_step}): {cert.reason}"
    return RunResult(code, cert.verdict, tuple(files), message)


def _summary(out: Path, s: Scenario, verdict: str, details: Dict[str, Any]) -> Path:
    summary = RunSummary(label=s.label, pipeline=s.pipeline, verdict=verdict, details=details)
    path = out / "summary.json"
    path.write_text(summary.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def _run_components(s: Scenario, out: Path) -> RunResult:
    rho = s.sampling.rho_start
    for candidate in s.sampling.rho_schedule():
        if candidate < s.radius and not s.union.meets_circle(s.p, candidate):
            rho = candidate
            break
    report = unique_component_finder(s, rho)
    rows = [vars(c) for c in report.components]
    table = write_table(out / "components.csv", rows, ["label", "side", "cells", "witness_fraction"])
    passed = report.unique_nonthin is not None
    verdict = "PASS" if passed else "NONE"
    details = {"rho": rho, "unique_nonthin": report.unique_nonthin, **report.diagnostics}
    return RunResult(_exit_for(passed, True), verdict, (table, _summary(out, s, verdict, details)))


def _run_sheets(s: Scenario, out: Path) -> RunResult:
    if not isinstance(s.function, SqrtBranchSumFn):
        raise ScenarioInputError("the sheets pipeline needs kind = 'sqrt'", field="function.kind")
    tol = s.tolerances
    atlas = branched_cover_enumerate(s.function, s.config.function.flips, tol.sheet_rel)
    checks = [monodromy_check(s.function, n, tol=tol.monodromy) for n in range(len(s.function))]
    sheet_rows = [
        {"sheet": k, "signs": " ".join(str(x) for x in sh.signs), "residual": sh.residual}
        for k, sh in enumerate(atlas.sheets)
    ]
    files = [
        write_table(out / "sheets.csv", sheet_rows, ["sheet", "signs", "residual"]),
        write_table(out / "monodromy.csv", [vars(c) for c in checks], ["index", "radius", "error", "passed"]),
    ]
    passed = atlas.passed and all(c.passed for c in checks)
    verdict = "PASS" if passed else "FAIL"
    files.append(_summary(out, s, verdict, {"sheets": len(atlas.sheets), "segments": len(s.function)}))
    return RunResult(_exit_for(passed, True), verdict, tuple(files))


def _run_hm_study(s: Scenario, out: Path) -> RunResult:
    rows = hm_study(s)
    fields = ["x", "y", "exact", "estimate", "std_error", "with_obstacle", "passed"]
    records = [
        {
            "x": r.z.real,
            "y": r.z.imag,
            "exact": r.exact,
            "estimate": r.estimate,
            "std_error": r.std_error,
            "with_obstacle": r.with_obstacle,
            "passed": r.passed,
        }
        for r in rows
    ]
    table = write_table(out / "hm_study.csv", records, fields)
    plot = write_plot_data(
        out / "hm_study.plot.csv", [r.exact for r in rows], [r.estimate for r in rows], [r.std_error for r in rows]
    )
    passed = all(r.passed for r in rows)
    verdict = "PASS" if passed else "FAIL"
    return RunResult(_exit_for(passed, True), verdict, (table, plot, _summary(out, s, verdict, {"points": len(rows)})))


def _run_decay_study(s: Scenario, out: Path) -> RunResult:
    report = decay_study(s)
    rows = [{"stage": n, "h": e.value, "std_error": e.std_error} for n, e in enumerate(report.estimates)]
    table = write_table(out / "decay.csv", rows, ["stage", "h", "std_error"])
    plot = write_plot_data(
        out / "decay.plot.csv", list(range(len(rows))), list(report.values), [e.std_error for e in report.estimates]
    )
    passed = report.monotone and report.decayed
    verdict = "PASS" if passed else "FAIL"
    details = {"monotone": report.monotone, "decayed": report.decayed, "threshold": report.threshold}
    return RunResult(_exit_for(passed, report.reliable), verdict, (table, plot, _summary(out, s, verdict, details)))


PIPELINES = {
    "certify": _run_certify,
    "components": _run_components,
    "sheets": _run_sheets,
    "hm-study": _run_hm_study,
    "decay-study": _run_decay_study,
}


def run_scenario_file(
    path: Union[str, Path],
    out: Optional[Union[str, Path]] = None,
    *,
    pipeline: Optional[str] = None,
    **overrides: Any,
) -> RunResult:
    """Load a scenario, run its pipeline (or ``pipeline``) and write the reports into ``out``.

    Exit codes: 0 pass, 1 check failed, 2 input error, 3 numerical-reliability flag.
    """
    try:
        s = Scenario.from_file(path, **overrides)
        name = pipeline or s.pipeline
        runner = PIPELINES[name]
        target = Path(out) if out is not None else Path(f"{s.label}-{name}")
        target.mkdir(parents=True, exist_ok=True)
        result = runner(s, target)
    except ScenarioInputError as exc:
        logger.error("input error: %s", exc)
        return RunResult(EXIT_INPUT, "INPUT-ERROR", (), str(exc))
    except FineLabError as exc:
        logger.error("%s failed at %s: %s", path, exc.step or "unknown", exc)
        return RunResult(EXIT_FAILED, "FAILED", (), f"FAILED({exc.step or 'unknown'}): {exc}")
    logger.info("%s: %s (exit %d)", name, result.verdict, result.exit_code)
    return result


def reverify_file(path: Union[str, Path], reproduce: bool = False) -> VerificationReport:
    return verify_certificate(read_certificate(path), reproduce=reproduce)


def bundled_scenario(name: str) -> Path:
    """Path of a scenario file shipped with the package."""
    path = Path(__file__).parent / "scenarios" / f"{name}.scenario"
    if not path.exists():
        raise ScenarioInputError(f"no bundled scenario named {name!r}")
    return path
