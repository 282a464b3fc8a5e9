"""
Logarithmic-potential certificates of thinness.

A certificate is a finite sum of logarithmic atoms

    U(z) = scale * sum_n a_n log(|z - p_n| / rho_n) + offset

which is subharmonic for every positive scale and any offset. This module
builds such certificates for disk unions accumulating at a boundary point,
normalizes them for the certification chain, covers their sublevel sets by
disks and checks the pushforward inequalities for discrete measures.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .config import SamplingConfig
from .errors import (
    CircleSelectionError,
    ConstructionError,
    DomainError,
    GeometryError,
    NormalizationError,
    ParameterError,
    PreconditionError,
)
from .geometry import (
    UNIT_TOL,
    Disk,
    DiskUnion,
    annulus_cloud,
    as_point,
    circle_points,
    disk_cloud,
    union_cloud,
)

logger = logging.getLogger(__name__)

NORMALIZED_AT_TARGET = -1.0 / 12.0
NORMALIZED_ON_UNION = -1.0
MIN_RADIUS = 1e-250

THIN_CERTIFIED = "THIN-CERTIFIED"
INCONCLUSIVE = "INCONCLUSIVE"


# ============================================================
# CERTIFICATES
# ============================================================


@dataclass(frozen=True)
class LogAtom:
    """One term a log(|z - point| / scale) of a certificate."""

    point: complex
    weight: float
    scale: float

    def __post_init__(self):
        object.__setattr__(self, "point", as_point(self.point))
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise ParameterError(f"atom weight must be positive, got {self.weight!r}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ParameterError(f"atom scale must be positive, got {self.scale!r}")
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "scale", float(self.scale))


@dataclass(frozen=True)
class LogPotentialCertificate:
    """Finite logarithmic potential with an affine normalization."""

    atoms: Tuple[LogAtom, ...] = ()
    offset: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ParameterError(f"certificate scale must be positive, got {self.scale!r}")
        if not math.isfinite(self.offset):
            raise ParameterError(f"certificate offset must be finite, got {self.offset!r}")
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "scale", float(self.scale))

    @classmethod
    def constant(cls, value: float) -> "LogPotentialCertificate":
        return cls((), offset=value)

    @cached_property
    def points(self) -> NDArray:
        return np.array([a.point for a in self.atoms], dtype=complex)

    @cached_property
    def weights(self) -> NDArray:
        return np.array([a.weight for a in self.atoms], dtype=float)

    @cached_property
    def radii(self) -> NDArray:
        return np.array([a.scale for a in self.atoms], dtype=float)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum()) if self.atoms else 0.0

    def __call__(self, z: ArrayLike, chunk: int = 2048):
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        total = np.zeros(flat.shape)
        if self.atoms:
            with np.errstate(divide="ignore"):
                for lo in range(0, len(self.atoms), chunk):
                    p = self.points[lo : lo + chunk]
                    terms = np.log(np.abs(flat[:, None] - p[None, :]) / self.radii[lo : lo + chunk])
                    total += terms @ self.weights[lo : lo + chunk]
        out = (self.scale * total + self.offset).reshape(z.shape)
        return float(out) if out.ndim == 0 else out

    def shifted(self, delta: float) -> "LogPotentialCertificate":
        return LogPotentialCertificate(self.atoms, self.offset + delta, self.scale)

    def scaled(self, factor: float) -> "LogPotentialCertificate":
        """Multiply the whole potential (offset included) by a positive factor."""
        return LogPotentialCertificate(self.atoms, self.offset * factor, self.scale * factor)

    def with_radii_scaled(self, t: float) -> "LogPotentialCertificate":
        """Replace every rho_n by t * rho_n."""
        atoms = tuple(LogAtom(a.point, a.weight, a.scale * t) for a in self.atoms)
        return LogPotentialCertificate(atoms, self.offset, self.scale)

    def bounds_on_disks(self, centers: NDArray, radii: NDArray, chunk: int = 2048) -> Tuple[NDArray, NDArray]:
        """Lower and upper bounds of the potential over closed disks.

        Each atom's distance ranges over [max(0, d - r), d + r]; weights are
        positive so the bounds follow term by term.
        """
        centers = np.asarray(centers, dtype=complex)
        radii = np.asarray(radii, dtype=float)
        lb = np.zeros(centers.shape)
        ub = np.zeros(centers.shape)
        if self.atoms:
            with np.errstate(divide="ignore"):
                for lo in range(0, len(self.atoms), chunk):
                    p = self.points[lo : lo + chunk]
                    rho = self.radii[lo : lo + chunk]
                    w = self.weights[lo : lo + chunk]
                    d = np.abs(centers[:, None] - p[None, :])
                    near = np.maximum(d - radii[:, None], 0.0)
                    far = d + radii[:, None]
                    lb += np.log(near / rho) @ w
                    ub += np.log(far / rho) @ w
        return self.scale * lb + self.offset, self.scale * ub + self.offset


def eval_log_potential(cert: LogPotentialCertificate, z: ArrayLike):
    """Evaluate a certificate; -inf exactly at atom locations."""
    return cert(z)


@dataclass(frozen=True)
class ThinSetSpec:
    """A disk union together with a certificate of its thinness at a point."""

    target: complex
    union: DiskUnion
    certificate: LogPotentialCertificate
    ambient_radius: float = 0.5
    diagnostics: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "target", as_point(self.target))
        if self.ambient_radius <= 0:
            raise ParameterError("ambient radius must be positive")
        if self.union.contains(self.target):
            raise DomainError(f"target {self.target!r} lies in the union")
        if not np.isfinite(self.certificate(self.target)):
            raise DomainError("certificate is -inf at the target")

    @property
    def near_disks(self) -> DiskUnion:
        """Disks of the union within 2 * ambient_radius of the target."""
        return self.union.near(self.target, 2.0 * self.ambient_radius)

    def restricted(self, certificate: LogPotentialCertificate, radius: float) -> "ThinSetSpec":
        """Same union with a new certificate and ambient radius."""
        return ThinSetSpec(self.target, self.union, certificate, radius, dict(self.diagnostics))


# ============================================================
# DISCRETE MEASURES
# ============================================================


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite sum of point masses."""

    atoms: Tuple[Tuple[complex, float], ...]

    def __post_init__(self):
        atoms = tuple((as_point(z), float(m)) for z, m in self.atoms)
        if not atoms:
            raise ParameterError("a measure needs at least one atom")
        if any(not (m > 0 and math.isfinite(m)) for _, m in atoms):
            raise ParameterError("atom masses must be positive and finite")
        object.__setattr__(self, "atoms", atoms)

    @cached_property
    def locations(self) -> NDArray:
        return np.array([z for z, _ in self.atoms], dtype=complex)

    @cached_property
    def masses(self) -> NDArray:
        return np.array([m for _, m in self.atoms], dtype=float)

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def potential(self, z: ArrayLike):
        """V(z) = sum m log|xi - z|."""
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore"):
            out = np.log(np.abs(z.ravel()[:, None] - self.locations[None, :])) @ self.masses
        out = out.reshape(z.shape)
        return float(out) if out.ndim == 0 else out

    def pushforward(self, T: Callable[[NDArray], ArrayLike]) -> "DiscreteMeasure":
        """mu_1(A) = mu(T^{-1}(A)); atoms move, masses stay."""
        moved = np.asarray(T(self.locations), dtype=complex)
        return DiscreteMeasure(tuple(zip(moved.tolist(), self.masses.tolist())))


# ============================================================
# THIN UNIONS
# ============================================================


def build_thin_union(
    points: Sequence[complex],
    target: complex,
    depth: Optional[int] = None,
    *,
    ambient_radius: float = 0.5,
    weight_ratio: float = 0.5,
    samples_per_disk: int = 64,
    budget: int = 8,
    cloud_seed: int = 0,
) -> ThinSetSpec:
    """Disk union around points outside the closed unit disk, thin at target.

    Around each p_n a protective radius rho_n keeps D(p_n, rho_n) off the
    closed unit disk and off its neighbours. Weights

        a_n = weight_ratio**n / max(1, log(R / rho_n))

    make the certificate non-negative outside the protective disks, and radii
    r_n = rho_n * exp(-(1 + S_n) / a_n), with S_n bounding the other atoms on
    D(p_n, rho_n) from above, force the certificate below -1 on D(p_n, r_n).
    Radii that underflow are dropped from the union (their atoms stay).

    Args:
        points: Accumulation points, all with |p_n| > 1.
        target: Point on the unit circle.
        depth: Use only the first depth points.
        ambient_radius: Radius recorded on the returned spec.
        weight_ratio: Geometric decay of the weights.
        samples_per_disk: Low-discrepancy samples checking each disk.
        budget: Halvings of a radius allowed when a sampled check fails.
        cloud_seed: Seed of the sample clouds.

    Raises:
        DomainError: If the target is off the unit circle or some |p_n| <= 1.
        GeometryError: If two points coincide.
        ConstructionError: If the sampled check still fails after the budget.
    """
    target = as_point(target)
    if abs(abs(target) - 1.0) > UNIT_TOL:
        raise DomainError(f"target {target!r} is not on the unit circle")
    pts = np.array([as_point(z) for z in points], dtype=complex)
    if depth is not None:
        pts = pts[:depth]
    if pts.size == 0:
        return ThinSetSpec(target, DiskUnion((), True), LogPotentialCertificate(), ambient_radius)

    mods = np.abs(pts)
    bad = np.flatnonzero(mods <= 1.0)
    if bad.size:
        raise DomainError(f"accumulation point {int(bad[0])} has modulus {mods[bad[0]]:.6g} <= 1")
    gaps = np.abs(pts[:, None] - pts[None, :])
    np.fill_diagonal(gaps, np.inf)
    if np.any(gaps == 0.0):
        i, j = np.argwhere(gaps == 0.0)[0]
        raise GeometryError(f"accumulation points {i} and {j} coincide")

    rho = np.minimum(0.5 * (mods - 1.0), 0.45 * gaps.min(axis=1))
    big_r = 4.0 * max(float(mods.max()), 1.0)
    n = np.arange(1, pts.size + 1)
    weights = weight_ratio**n / np.maximum(1.0, np.log(big_r / rho))

    # Upper bound of the other atoms over D(p_n, rho_n).
    reach = np.log((gaps + rho[:, None]) / rho[None, :])
    np.fill_diagonal(reach, 0.0)
    others = np.maximum(reach, 0.0) @ weights

    with np.errstate(under="ignore"):
        radii = rho * np.exp(-(1.0 + others) / weights)
    cert = LogPotentialCertificate(
        tuple(LogAtom(complex(p), float(a), float(s)) for p, a, s in zip(pts, weights, rho))
    )

    shrinks = np.zeros(pts.size, dtype=int)
    for attempt in range(budget + 1):
        keep = radii >= MIN_RADIUS
        failing = []
        for i in np.flatnonzero(keep):
            cloud = disk_cloud(Disk(pts[i], radii[i]), samples_per_disk, cloud_seed + int(i))
            if np.max(cert(cloud)) >= NORMALIZED_ON_UNION:
                failing.append(int(i))
        if not failing:
            break
        if attempt == budget:
            raise ConstructionError(
                f"certificate not below -1 on disks {failing} after {budget} halvings",
                diagnostics={"failing": failing, "radii": radii.tolist(), "weights": weights.tolist()},
            )
        logger.debug("halving radii of disks %s", failing)
        radii[failing] *= 0.5
        shrinks[failing] += 1

    dropped = np.flatnonzero(radii < MIN_RADIUS).tolist()
    if dropped:
        logger.info("dropped %d disks whose radius underflows", len(dropped))
    union = DiskUnion(
        tuple(Disk(complex(p), float(r)) for p, r in zip(pts, radii) if r >= MIN_RADIUS), True
    )
    diagnostics = {
        "weights": weights.tolist(),
        "protective_radii": rho.tolist(),
        "radii": radii.tolist(),
        "dropped": dropped,
        "shrinks": shrinks.tolist(),
        "ambient_bound": big_r,
    }
    return ThinSetSpec(target, union, cert, ambient_radius, diagnostics)


# ============================================================
# NORMALIZATION
# ============================================================


def _sup_on_union(
    cert: LogPotentialCertificate, U: DiskUnion, p: complex, rho: float, per_disk: int, seed: int
) -> float:
    local = U.near(p, rho)
    if not len(local):
        return -math.inf
    cloud = union_cloud(local, per_disk, seed)
    cloud = cloud[np.abs(cloud - p) <= rho]
    return float(np.max(cert(cloud))) if cloud.size else -math.inf


def normalize_certificate(
    cert: LogPotentialCertificate,
    p: complex,
    U: DiskUnion,
    *,
    schedule: Optional[Sequence[float]] = None,
    samples: int = 4096,
    per_disk: int = 64,
    cloud_seed: int = 0,
) -> Tuple[LogPotentialCertificate, float]:
    """Affinely adjust a thinness certificate around p.

    Walks the radius schedule and returns the first (cert', rho) such that,
    on the sample clouds, cert' < 0 on the closed disk around p, cert'(p) >
    -1/12, cert' < -1 on U inside that disk, and the circle |z - p| = rho
    misses U. The adjustment is cert' = s * (cert - M - delta) with M the
    sampled maximum on the disk; a certificate already meeting all four
    conditions is returned as is.

    Raises:
        PreconditionError: If cert is not finite at p.
        CircleSelectionError: If every circle in the schedule meets U.
        NormalizationError: If no admissible circle admits a normalization.
    """
    p = as_point(p)
    u_p = cert(p)
    if not np.isfinite(u_p):
        raise PreconditionError(f"certificate is not finite at {p!r}", witness=p)
    if schedule is None:
        schedule = SamplingConfig().rho_schedule()

    circle_found = False
    for rho in schedule:
        if U.meets_circle(p, rho):
            logger.debug("circle of radius %.4g meets the union", rho)
            continue
        circle_found = True
        disk = Disk(p, rho)
        cloud = np.concatenate([[p], disk_cloud(disk, samples, cloud_seed), circle_points(p, rho, 256)])
        vals = cert(cloud)
        M = float(np.max(vals))
        L = _sup_on_union(cert, U, p, rho, per_disk, cloud_seed)
        if M < 0 and u_p > NORMALIZED_AT_TARGET and L < NORMALIZED_ON_UNION:
            return cert, float(rho)

        delta = 0.01 * (M - u_p) + 1e-12
        s_hi = (1.0 / 12.0) / (M + delta - u_p)
        if math.isinf(L):
            s = min(1.0, 0.5 * s_hi)
        else:
            s_lo = 1.0 / (M + delta - L)
            if not s_lo < s_hi:
                logger.debug("radius %.4g: scale window [%.4g, %.4g] empty", rho, s_lo, s_hi)
                continue
            s = 1.0 if s_lo < 1.0 < s_hi else math.sqrt(s_lo * s_hi)

        out = LogPotentialCertificate(cert.atoms, s * (cert.offset - M - delta), s * cert.scale)
        if (
            float(np.max(out(cloud))) < 0
            and out(p) > NORMALIZED_AT_TARGET
            and _sup_on_union(out, U, p, rho, per_disk, cloud_seed) < NORMALIZED_ON_UNION
        ):
            logger.info("normalized certificate at rho=%.4g (scale %.4g)", rho, s)
            return out, float(rho)

    if not circle_found:
        raise CircleSelectionError(f"every circle around {p!r} in the schedule meets the union")
    raise NormalizationError(f"no radius in the schedule admits a normalization around {p!r}")


# ============================================================
# SUBLEVEL SETS
# ============================================================


def sublevel_set(
    cert: LogPotentialCertificate, threshold: float, region: Disk, resolution: int = 512
) -> DiskUnion:
    """Disk cover of {cert < threshold} inside region.

    A quadtree over the region's bounding square is refined down to cells of
    side 2R / 2**ceil(log2(resolution)). A cell's circumscribed disk is kept
    when the interval bound proves cert < threshold on it, dropped when it
    proves cert >= threshold, and split otherwise; undecided finest cells are
    kept, so the cover contains the whole sublevel set. Circumscribed disks
    of children lie inside their parent's, which makes the result monotone
    in the threshold.
    """
    if threshold == -math.inf:
        return DiskUnion()
    if not math.isfinite(threshold):
        raise ParameterError(f"threshold must be finite, got {threshold!r}")
    levels = max(0, math.ceil(math.log2(resolution)))

    centers = np.array([region.center])
    half = region.radius
    kept: List[Tuple[complex, float]] = []
    for level in range(levels + 1):
        r_circ = half * math.sqrt(2.0)
        touching = np.abs(centers - region.center) - r_circ < region.radius
        centers = centers[touching]
        if centers.size == 0:
            break
        lb, ub = cert.bounds_on_disks(centers, np.full(centers.shape, r_circ))
        accept = ub < threshold
        undecided = ~accept & (lb < threshold)
        if level == levels:
            accept |= undecided
            undecided[:] = False
        kept.extend((complex(c), r_circ) for c in centers[accept])
        split = centers[undecided]
        h = 0.5 * half
        centers = np.concatenate([split + h * o for o in (1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j)])
        half = h
    return DiskUnion(tuple(Disk(c, r) for c, r in kept))


# ============================================================
# PUSHFORWARD
# ============================================================


@dataclass(frozen=True)
class PushforwardReport:
    """Margins of V(z) + log C ||mu|| - V_1(Tz) and V_1(o) - V(o) - log c ||mu||."""

    upper_margins: NDArray
    lower_margin: float
    lipschitz: float
    expansion: float
    pushed: DiscreteMeasure
    passed: bool


def estimate_lipschitz_constants(
    T: Callable[[NDArray], ArrayLike],
    points: ArrayLike,
    origin: complex = 0j,
    inflate: float = 1e-9,
) -> Tuple[float, float]:
    """Measured (C, c) of T over all pairs of the points (and the origin).

    C is the largest |Tz1 - Tz2| / |z1 - z2|, c the smallest |Tz - o| / |z - o|,
    each widened by the relative inflate.
    """
    z = np.unique(np.concatenate([np.asarray(points, dtype=complex).ravel(), [origin]]))
    tz = np.asarray(T(z), dtype=complex)
    dz = np.abs(z[:, None] - z[None, :])
    dt = np.abs(tz[:, None] - tz[None, :])
    off = dz > 0
    big = float(np.max(dt[off] / dz[off])) if off.any() else 1.0
    away = np.abs(z - origin) > 0
    small = float(np.min(np.abs(tz[away] - origin) / np.abs(z[away] - origin))) if away.any() else 1.0
    return big * (1.0 + inflate), small * (1.0 - inflate)


def lipschitz_push(
    mu: DiscreteMeasure,
    T: Callable[[NDArray], ArrayLike],
    C: float,
    c: float,
    test_points: ArrayLike,
    origin: complex = 0j,
    *,
    margin: float = 1e-10,
) -> PushforwardReport:
    """Check the pushforward inequalities for mu_1 = T_* mu.

    V_1(Tz) <= V(z) + log C ||mu|| at every test point and
    V_1(o) >= V(o) + log c ||mu|| at the origin o.

    Raises:
        PreconditionError: If T moves the origin, or the spot check of
            |Tz1 - Tz2| <= C |z1 - z2| or |Tz - o| >= c |z - o| fails on
            test points, atoms and origin; the witness is the offending pair.
    """
    if not (C > 0 and c > 0):
        raise ParameterError("C and c must be positive")
    origin = as_point(origin)
    tests = np.asarray(test_points, dtype=complex).ravel()
    pool = np.concatenate([tests, mu.locations, [origin]])
    image = np.asarray(T(pool), dtype=complex)
    t_origin = image[-1]
    if abs(t_origin - origin) > 1e-12 * max(1.0, abs(origin)):
        raise PreconditionError(f"T moves the origin to {t_origin!r}", witness=(origin, t_origin))

    dz = np.abs(pool[:, None] - pool[None, :])
    dt = np.abs(image[:, None] - image[None, :])
    over = dt > C * dz * (1.0 + 1e-12) + 1e-15
    if over.any():
        i, j = np.argwhere(over)[0]
        raise PreconditionError(
            f"Lipschitz bound C={C:.6g} violated", witness=(complex(pool[i]), complex(pool[j]))
        )
    under = np.abs(image - origin) < c * np.abs(pool - origin) * (1.0 - 1e-12)
    if under.any():
        i = int(np.flatnonzero(under)[0])
        raise PreconditionError(
            f"expansion bound c={c:.6g} violated", witness=(complex(pool[i]), origin)
        )

    pushed = mu.pushforward(T)
    mass = mu.total_mass
    v_z = np.atleast_1d(mu.potential(tests))
    v1_tz = np.atleast_1d(pushed.potential(image[: tests.size]))
    with np.errstate(invalid="ignore"):
        upper = v_z + math.log(C) * mass - v1_tz
    upper = np.where(np.isneginf(v_z) & np.isneginf(v1_tz), np.inf, upper)
    lower = pushed.potential(origin) - mu.potential(origin) - math.log(c) * mass
    if not np.isfinite(lower):
        lower = math.inf
    passed = bool(np.all(upper >= -margin) and lower >= -margin)
    return PushforwardReport(upper, float(lower), float(C), float(c), pushed, passed)


# ============================================================
# THINNESS REPORT
# ============================================================


@dataclass(frozen=True)
class ThinnessReport:
    verdict: str
    value_at_target: float
    sup_on_union: float
    samples: int
    annulus_maxima: Tuple[float, ...]

    @property
    def certified(self) -> bool:
        return self.verdict == THIN_CERTIFIED


def thinness_report(
    spec: ThinSetSpec, depth: int = 12, per_annulus: int = 256, cloud_seed: int = 0
) -> ThinnessReport:
    """Evaluate the certificate at the target and on U approaching it.

    Samples of U are drawn annulus by annulus (2^-k <= |z - p| <= 2^-k+1,
    k = 1..depth) within the ambient radius. The verdict is THIN-CERTIFIED iff
    cert(p) > -1/12 and every sample is below -1, INCONCLUSIVE otherwise.
    """
    p = spec.target
    cert = spec.certificate
    at_p = float(cert(p))
    local = spec.union.near(p, spec.ambient_radius)
    maxima: List[float] = []
    total = 0
    for k in range(1, depth + 1):
        lo, hi = 2.0 ** (-k), 2.0 ** (-k + 1)
        ring = local.near(p, hi)
        cloud = annulus_cloud(p, lo, hi, per_annulus, cloud_seed + k)
        if len(ring):
            cloud = np.concatenate([cloud, union_cloud(ring, per_annulus, cloud_seed + 1000 * k)])
        dist = np.abs(cloud - p)
        mask = (dist >= lo) & (dist <= hi) & (dist <= spec.ambient_radius)
        mask &= ring.contains(cloud) if len(ring) else False
        pts = cloud[mask]
        total += int(pts.size)
        maxima.append(float(np.max(cert(pts))) if pts.size else -math.inf)
    sup = max(maxima) if maxima else -math.inf
    ok = at_p > NORMALIZED_AT_TARGET and sup < NORMALIZED_ON_UNION
    verdict = THIN_CERTIFIED if ok else INCONCLUSIVE
    logger.info("thinness at %r: %s (cert(p)=%.4g, sup on U=%.4g)", p, verdict, at_p, sup)
    return ThinnessReport(verdict, at_p, sup, total, tuple(maxima))
