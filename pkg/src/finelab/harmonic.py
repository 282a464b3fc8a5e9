"""
Harmonic measure in disks, slit disks and inverted exteriors.

Key features:
- Exact harmonic measure of a boundary arc of a disk (Möbius move to the centre).
- Slit domains D(c, R) minus closed disks, rhombs, polygons or segments, with
  a flood-fill connectivity check.
- Walk-on-spheres estimates (see ``finelab.walk``).
- The chain bounding omega from below on the fine neighbourhood: the pointwise
  lower-bound margins and the quarter bound over an exhaustion.
- Closed-form two-constant and propagation bounds.
- Decay of the exterior harmonic measure of a compact over an exhaustion,
  computed after the inversion w = 1/(z - z0).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Annotated, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import Field
from scipy import ndimage

from .config import WoSConfig
from .core import StepRegistry
from .errors import BoundConstructionError, DomainError, GeometryError, PreconditionError
from .geometry import (
    TWO_PI,
    CircArc,
    Disk,
    DiskUnion,
    Obstacle,
    ObstacleSet,
    Polygon,
    Rhomb,
    Segment,
    as_point,
    boundary_distances,
    circle_points,
    disk_cloud,
    invert_disk,
)
from .plugins import ValidatePlugin  # noqa: F401  (registers "validate")
from .potential import LogPotentialCertificate, sublevel_set
from .walk import ArcTarget, HMEstimate, OuterRemainder, Target, derive_seed, hm_estimate

logger = logging.getLogger(__name__)

QUARTER_DISK_LEVEL = 4.0 / 12.0
MIN_ARC_SWEEP = 5.0 * math.pi / 6.0


# ============================================================
# DOMAINS
# ============================================================


def _boundary_samples(obstacle: Obstacle, n: int = 64) -> NDArray:
    if isinstance(obstacle, Disk):
        return circle_points(obstacle.center, obstacle.radius, n)
    if isinstance(obstacle, Segment):
        return obstacle.a + np.linspace(0.0, 1.0, n) * (obstacle.b - obstacle.a)
    verts = obstacle.vertices
    t = np.linspace(0.0, 1.0, max(2, n // len(verts)), endpoint=False)
    return np.concatenate([verts[i] + t * (verts[(i + 1) % len(verts)] - verts[i]) for i in range(len(verts))])


def _obstacles_meet(a: Obstacle, b: Obstacle) -> bool:
    if isinstance(a, Disk) and isinstance(b, Disk):
        return abs(a.center - b.center) <= a.radius + b.radius
    sa, sb = ObstacleSet([a]), ObstacleSet([b])
    return bool(sb.inside(_boundary_samples(a, 128)).any() or sa.inside(_boundary_samples(b, 128)).any())


class SlitDomain:
    """Open disk minus finitely many closed obstacles.

    Args:
        outer: The disk.
        obstacles: Disks, rhombs, polygons or segments, pairwise disjoint and
            inside the disk.
        label: Free text carried into reports.
        check_connected: Flood-fill the complement on a grid of this resolution
            (0 disables the check).

    Raises:
        GeometryError: If an obstacle leaves the disk, two obstacles meet, or
            the complement falls apart.
    """

    def __init__(
        self,
        outer: Disk,
        obstacles: Sequence[Obstacle] = (),
        label: str = "",
        check_connected: int = 256,
    ):
        self.outer = outer
        self.obstacles: Tuple[Obstacle, ...] = tuple(obstacles)
        self.label = label
        for i, ob in enumerate(self.obstacles):
            if np.any(np.abs(_boundary_samples(ob) - outer.center) >= outer.radius):
                raise GeometryError(f"obstacle {i} is not inside the outer disk")
        for i in range(len(self.obstacles)):
            for j in range(i + 1, len(self.obstacles)):
                if _obstacles_meet(self.obstacles[i], self.obstacles[j]):
                    raise GeometryError(f"obstacles {i} and {j} are not disjoint")
        self._set = ObstacleSet(self.obstacles)
        if check_connected and self.obstacles:
            self._check_connected(check_connected)

    def _check_connected(self, resolution: int, min_cells: int = 4) -> None:
        c, r = self.outer.center, self.outer.radius
        axis = np.linspace(-r, r, resolution)
        grid = c + axis[None, :] + 1j * axis[:, None]
        free = (np.abs(grid - c) < r) & ~self._set.inside(grid)
        labels, count = ndimage.label(free)
        if count > 1:
            sizes = np.sort(np.bincount(labels.ravel())[1:])[::-1]
            if sizes[1] > min_cells:
                raise GeometryError(f"domain {self.label!r} is not connected ({count} grid components)")

    @property
    def scale(self) -> float:
        return self.outer.radius

    def boundary_distances(self, z: NDArray) -> Tuple[NDArray, NDArray]:
        return boundary_distances(z, self._set, self.outer)

    def contains(self, z: ArrayLike) -> NDArray:
        z = np.asarray(z, dtype=complex)
        return self.outer.contains(z) & ~self._set.inside(z)

    def with_obstacles(self, obstacles: Sequence[Obstacle], label: Optional[str] = None) -> "SlitDomain":
        return SlitDomain(self.outer, obstacles, label if label is not None else self.label)

    def __repr__(self) -> str:
        return f"SlitDomain({self.outer!r}, {len(self.obstacles)} obstacles, label={self.label!r})"


def _interior_samples(obstacle: Obstacle, n: int, seed: int = 0) -> NDArray:
    if isinstance(obstacle, Disk):
        return disk_cloud(obstacle, n, seed, shrink=0.999)
    if isinstance(obstacle, Segment):
        return _boundary_samples(obstacle, n)
    centre, radius = obstacle.bounding_radius
    cloud = disk_cloud(Disk(centre, radius), 4 * n, seed)
    return np.concatenate([cloud[obstacle.contains(cloud)], _boundary_samples(obstacle, n)])


@dataclass(frozen=True)
class Exhaustion:
    """Increasing sequence of obstacle lists."""

    stages: Tuple[Tuple[Obstacle, ...], ...] = ()

    def __post_init__(self):
        stages = tuple(tuple(s) for s in self.stages)
        object.__setattr__(self, "stages", stages)
        for k in range(len(stages) - 1):
            nxt = ObstacleSet(stages[k + 1])
            for i, ob in enumerate(stages[k]):
                if not np.all(nxt.inside(_interior_samples(ob, 32))):
                    raise GeometryError(f"obstacle {i} of stage {k} is not covered by stage {k + 1}")

    @classmethod
    def from_union(
        cls, union: DiskUnion, fractions: Sequence[float], within: Optional[Disk] = None
    ) -> "Exhaustion":
        """Concentric closed disks D(a_n, f r_n), one stage per fraction.

        Only disks whose closure lies inside ``within`` are used.
        """
        disks = list(union.inside(within)) if within is not None else list(union)
        return cls(tuple(tuple(Disk(d.center, f * d.radius) for d in disks) for f in fractions))

    def __len__(self) -> int:
        return len(self.stages)

    def __iter__(self) -> Iterator[Tuple[Obstacle, ...]]:
        return iter(self.stages)

    def __getitem__(self, k: int) -> Tuple[Obstacle, ...]:
        return self.stages[k]


class InvertedExterior:
    """Image of the sphere minus (K and obstacles) under w = 1/(z - z0), z0 inside K.

    The exterior of K becomes a bounded region with boundary component -1 the
    image of the boundary of K, and w = 0 the image of infinity. Disk
    components have exact disk images; other shapes use the lower bound
    dist_z(z, A) |w| / M on the distance of w to the image of A, where M
    bounds |z' - z0| over all boundary points z'.
    """

    def __init__(
        self, K: Union[Disk, Polygon, Rhomb], obstacles: Sequence[Obstacle] = (), z0: Optional[complex] = None
    ):
        if isinstance(K, Rhomb):
            K = K.polygon
        self.K = K
        self.obstacles: Tuple[Obstacle, ...] = tuple(obstacles)
        if z0 is None:
            z0 = K.center if isinstance(K, Disk) else K.bounding_radius[0]
        self.z0 = as_point(z0)
        if not K.contains(self.z0):
            raise GeometryError("inversion centre must lie inside K")
        k_set = ObstacleSet([K])
        for i, ob in enumerate(self.obstacles):
            if k_set.inside(_boundary_samples(ob, 128)).any() or _obstacles_meet(K, ob):
                raise DomainError(f"obstacle {i} meets K")

        reach = [float(np.max(np.abs(_boundary_samples(ob, 256) - self.z0))) for ob in (K,) + self.obstacles]
        if isinstance(K, Disk):
            reach[0] = abs(K.center - self.z0) + K.radius
        self._reach = max(reach)

        self.outer: Optional[Disk] = invert_disk(K, self.z0) if isinstance(K, Disk) else None
        self._images = ObstacleSet([invert_disk(ob, self.z0) for ob in self.obstacles if isinstance(ob, Disk)])
        self._image_index = np.array([i for i, ob in enumerate(self.obstacles) if isinstance(ob, Disk)], dtype=int)
        self._others = [(i, ob) for i, ob in enumerate(self.obstacles) if not isinstance(ob, Disk)]
        if self.outer is not None:
            self._scale = self.outer.radius + abs(self.outer.center)
        else:
            self._scale = 1.0 / float(np.min(K.boundary_distance(np.array([self.z0]))))

    @property
    def scale(self) -> float:
        return self._scale

    def to_w(self, z: ArrayLike):
        return 1.0 / (np.asarray(z, dtype=complex) - self.z0)

    def _bound(self, shape: Obstacle, w: NDArray, z: NDArray, at_infinity: NDArray) -> NDArray:
        d = shape.boundary_distance(z)
        if not isinstance(shape, Segment):
            d = np.where(shape.contains(z, closed=True), 0.0, d)
        return np.where(at_infinity, 1.0 / self._reach, d * np.abs(w) / self._reach)

    def boundary_distances(self, w: NDArray) -> Tuple[NDArray, NDArray]:
        w = np.asarray(w, dtype=complex)
        at_infinity = w == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(at_infinity, self.z0 + 1e300, self.z0 + 1.0 / np.where(at_infinity, 1.0, w))
        if self.outer is not None:
            best = self.outer.radius - np.abs(w - self.outer.center)
        else:
            best = self._bound(self.K, w, z, at_infinity)
            best = np.where(self.K.contains(z) & ~at_infinity, 0.0, best)
        which = np.full(w.shape, -1, dtype=int)
        if len(self._images):
            d, k = self._images.distances(w)
            closer = d < best
            best = np.where(closer, d, best)
            which = np.where(closer, self._image_index[np.maximum(k, 0)], which)
        for i, ob in self._others:
            d = self._bound(ob, w, z, at_infinity)
            closer = d < best
            best = np.where(closer, d, best)
            which = np.where(closer, i, which)
        return best, which


# ============================================================
# EXACT HARMONIC MEASURE
# ============================================================


def _arc_measure(u: NDArray, start: float, sweep: float) -> NDArray:
    """Harmonic measure of the arc (start, start + sweep) of the unit circle at u."""
    if sweep >= TWO_PI:
        return np.ones(u.shape)
    za, zb = np.exp(1j * start), np.exp(1j * (start + sweep))
    wa = (za - u) / (1.0 - np.conj(u) * za)
    wb = (zb - u) / (1.0 - np.conj(u) * zb)
    mapped = np.mod(np.angle(wb / wa), TWO_PI)
    return np.where(u == 0, sweep / TWO_PI, mapped / TWO_PI)


def disk_arc_measure(disk: Disk, arc: CircArc, z: ArrayLike) -> NDArray:
    """Vectorized exact harmonic measure of an arc of the disk's boundary."""
    off_center = abs(arc.center - disk.center) > 1e-12 * max(1.0, disk.radius)
    if off_center or abs(arc.radius - disk.radius) > 1e-12 * disk.radius:
        raise GeometryError("arc is not on the boundary of the disk")
    u = (np.asarray(z, dtype=complex) - disk.center) / disk.radius
    if np.any(np.abs(u) >= 1.0):
        raise DomainError("point is not strictly inside the disk")
    return np.clip(_arc_measure(u, arc.start, arc.sweep), 0.0, 1.0)


def hm_disk_arc_exact(disk: Disk, arc: CircArc, z: complex) -> float:
    """Exact harmonic measure of a boundary arc seen from z.

    At the centre this is sweep / 2π. Elsewhere the disk automorphism moving
    z to the centre maps the arc to an arc whose angular length gives the
    value.

    Raises:
        DomainError: If z is not strictly inside the disk.
        GeometryError: If the arc does not lie on the disk's circle.
    """
    return float(disk_arc_measure(disk, arc, np.array([as_point(z)]))[0])


def hm_wos(domain, target: Target, z: complex, cfg: WoSConfig) -> HMEstimate:
    """Walk-on-spheres estimate of omega(z, target, domain)."""
    return hm_estimate(domain, target, as_point(z), cfg)


# ============================================================
# LOWER BOUNDS ON THE FINE NEIGHBOURHOOD
# ============================================================


@dataclass(frozen=True)
class LowerBoundReport:
    """Per-point margins omega_slit - (omega_disk + U)."""

    points: Tuple[complex, ...]
    exact: Tuple[float, ...]
    certificate: Tuple[float, ...]
    estimates: Tuple[HMEstimate, ...]
    sigma: float
    obstacles: Tuple[Obstacle, ...] = ()

    @property
    def margins(self) -> Tuple[float, ...]:
        return tuple(e.value - (w + u) for e, w, u in zip(self.estimates, self.exact, self.certificate))

    @property
    def passed(self) -> bool:
        return all(m >= -self.sigma * e.std_error for m, e in zip(self.margins, self.estimates))

    @property
    def reliable(self) -> bool:
        return all(e.reliable for e in self.estimates)

    @property
    def seeds(self) -> Tuple[int, ...]:
        return tuple(e.seed for e in self.estimates)


def hm_lower_bound_check(
    domain: SlitDomain,
    J: CircArc,
    cert: LogPotentialCertificate,
    sample_points: Sequence[complex],
    cfg: WoSConfig,
    sigma: float = 3.0,
) -> LowerBoundReport:
    """Check omega(z, J, D minus K) >= omega(z, J, D) + U(z) at sample points.

    Point i runs with seed derive_seed(cfg.seed, i), so calls over different
    stages of an exhaustion are paired point by point.
    """
    points = tuple(as_point(z) for z in sample_points)
    disk = domain.outer
    exact = disk_arc_measure(disk, J, np.array(points, dtype=complex))
    values = np.atleast_1d(cert(np.array(points, dtype=complex)))
    target = ArcTarget(J)
    estimates = tuple(
        hm_wos(domain, target, z, cfg.with_seed(derive_seed(cfg.seed, i))) for i, z in enumerate(points)
    )
    return LowerBoundReport(
        points, tuple(exact.tolist()), tuple(values.tolist()), estimates, sigma, domain.obstacles
    )


@dataclass(frozen=True)
class QuarterBound:
    """Data of the quarter bound on V1 = D(p, r1) minus U1 over an exhaustion."""

    rho: float
    r1: float
    disk_minimum: float
    U1: DiskUnion
    points: Tuple[complex, ...]
    stages: Tuple[LowerBoundReport, ...]
    quarter: float
    sigma: float

    @property
    def minima(self) -> Tuple[float, ...]:
        if not self.stages:
            return (self.disk_minimum,)
        return tuple(min(e.value for e in rep.estimates) for rep in self.stages)

    @property
    def passed(self) -> bool:
        return all(
            e.value >= self.quarter - self.sigma * e.std_error for rep in self.stages for e in rep.estimates
        )

    @property
    def margins_passed(self) -> bool:
        return all(rep.passed for rep in self.stages)

    @property
    def reliable(self) -> bool:
        return all(rep.reliable for rep in self.stages)


def fine_quarter_bound(
    p: complex,
    rho: float,
    U: DiskUnion,
    cert: LogPotentialCertificate,
    exhaustion: Exhaustion,
    J: CircArc,
    cfg: WoSConfig,
    *,
    sigma: float = 3.0,
    quarter: float = 0.25,
    gap: float = 1e-6,
    r1_schedule: Optional[Sequence[float]] = None,
    resolution: int = 512,
    v1_points: int = 10,
    circle_samples: int = 720,
    cloud_seed: int = 0,
) -> QuarterBound:
    """Bound omega(z, J, D(p, rho) minus K_n) below by 1/4 on V1, for every stage.

    r1 is the first radius of the schedule on whose circle the exact disk
    measure of J stays >= 4/12 + gap; U1 covers {cert < -1/12} in D(p, rho).
    Since cert < 0 on the disk, omega_slit >= omega_disk + cert > 4/12 - 1/12
    on V1, which the walks then confirm. Without obstacles inside the disk the
    exact minimum on the circle of radius r1 is the only stage minimum.

    Raises:
        PreconditionError: If J is not on the circle |z - p| = rho, is shorter
            than 5πρ/6, or leaves the unit disk.
        BoundConstructionError: If no radius of the schedule qualifies.
    """
    p = as_point(p)
    disk = Disk(p, rho)
    if abs(J.center - p) > 1e-12 or abs(J.radius - rho) > 1e-12 * rho:
        raise PreconditionError("J is not an arc of the circle |z - p| = rho", witness=J)
    if J.sweep < MIN_ARC_SWEEP - 1e-12:
        raise PreconditionError(f"J has angular length {J.sweep:.6g} < 5π/6", witness=J)
    if np.any(np.abs(J.sample(256)) >= 1.0):
        raise PreconditionError("J leaves the unit disk", witness=J)

    level = QUARTER_DISK_LEVEL + gap
    schedule = r1_schedule if r1_schedule is not None else [rho * 0.9**k for k in range(1, 81)]
    r1 = None
    for r in schedule:
        low = float(np.min(disk_arc_measure(disk, J, circle_points(p, r, circle_samples))))
        if low >= level:
            r1, disk_min = float(r), low
            break
    if r1 is None:
        raise BoundConstructionError(f"no radius in the schedule keeps the disk measure of J above {level:.6g}")

    U1 = sublevel_set(cert, -1.0 / 12.0, disk, resolution)
    stage_lists = [tuple(ob for ob in stage if _inside(ob, disk)) for stage in exhaustion] or [()]
    domains = [SlitDomain(disk, obs, label=f"stage-{k}") for k, obs in enumerate(stage_lists)]

    eps = cfg.eps_for(rho)
    cloud = np.concatenate([[p], disk_cloud(Disk(p, r1), 8 * v1_points, cloud_seed, shrink=0.999)])
    ok = ~U1.contains(cloud, closed=True) if len(U1) else np.ones(cloud.shape, dtype=bool)
    for dom in domains:
        d, _ = dom.boundary_distances(cloud)
        ok &= d > 2.0 * eps
    points = cloud[ok][:v1_points]
    if points.size == 0:
        raise BoundConstructionError("V1 sample is empty")

    if any(stage_lists):
        reports = tuple(hm_lower_bound_check(dom, J, cert, points, cfg, sigma) for dom in domains)
    else:
        reports = ()
    result = QuarterBound(rho, r1, disk_min, U1, tuple(points.tolist()), reports, quarter, sigma)
    logger.info("quarter bound: r1=%.4g, stage minima %s", r1, ["%.4f" % m for m in result.minima])
    return result


def _inside(ob: Obstacle, disk: Disk) -> bool:
    return bool(np.all(np.abs(_boundary_samples(ob) - disk.center) < disk.radius))


# ============================================================
# CLOSED-FORM BOUNDS
# ============================================================

formulas = StepRegistry("formulas").plug("validate")


@formulas
def two_constant_bound(
    eps_n: Annotated[float, Field(gt=0, le=1)],
    C: Annotated[float, Field(ge=1)],
    omega_lb: Annotated[float, Field(gt=0, le=1)],
) -> float:
    """omega log(eps) + (1 - omega) log(C)."""
    return omega_lb * math.log(eps_n) + (1.0 - omega_lb) * math.log(C)


@formulas
def propagation_bound(
    N: Annotated[float, Field(ge=0)],
    omega_lb: Annotated[float, Field(gt=0, le=1)],
) -> float:
    """-N omega: the value bound propagated from the fibre over a point of V1."""
    return -N * omega_lb


# ============================================================
# EXTERIOR DECAY
# ============================================================


@dataclass(frozen=True)
class DecayReport:
    estimates: Tuple[HMEstimate, ...]
    threshold: float
    sigma: float

    @property
    def values(self) -> Tuple[float, ...]:
        return tuple(e.value for e in self.estimates)

    @property
    def monotone(self) -> bool:
        pairs = zip(self.estimates, self.estimates[1:])
        return all(
            b.value <= a.value + self.sigma * math.hypot(a.std_error, b.std_error) for a, b in pairs
        )

    @property
    def decayed(self) -> bool:
        return self.estimates[-1].value < self.threshold

    @property
    def reliable(self) -> bool:
        return all(e.reliable for e in self.estimates)


def exterior_hm_decay(
    K: Union[Disk, Polygon, Rhomb],
    stages: Exhaustion,
    p: complex,
    cfg: WoSConfig,
    *,
    threshold: float = 0.1,
    sigma: float = 3.0,
    z0: Optional[complex] = None,
) -> DecayReport:
    """h_n = omega(p, boundary of K, sphere minus (K and K_n)) for n = 0..len(stages).

    Stage 0 has no obstacles. Every stage is walked in the inverted domain
    with the same seed, so consecutive values are paired.

    Raises:
        DomainError: If p lies in K or in an obstacle, or an obstacle meets K.
    """
    p = as_point(p)
    if K.contains(p, closed=True):
        raise DomainError(f"p={p!r} lies in K")
    estimates: List[HMEstimate] = []
    for n, obstacles in enumerate([()] + list(stages)):
        if obstacles and ObstacleSet(obstacles).inside(np.array([p]))[0]:
            raise DomainError(f"p={p!r} lies in an obstacle of stage {n}")
        domain = InvertedExterior(K, obstacles, z0)
        est = hm_wos(domain, OuterRemainder(), domain.to_w(p), cfg)
        logger.info("exterior measure at stage %d: %.5f ± %.5f", n, est.value, est.std_error)
        estimates.append(est)
    return DecayReport(tuple(estimates), threshold, sigma)


def fattened_arms(
    p: complex, count: int, inner: float, outer: float, width: float, phase: float = math.pi
) -> Tuple[Polygon, ...]:
    """``count`` rectangles of the given width along rays from p, from inner to outer."""
    angles = phase + TWO_PI * np.arange(count) / count
    return tuple(
        Polygon.fattened_segment(p + inner * np.exp(1j * a), p + outer * np.exp(1j * a), width) for a in angles
    )


def arm_exhaustion(
    p: complex, count: int, inner: float, outer: float, width: float, stages: int
) -> Exhaustion:
    """Arms growing toward p: stage n reaches outer * (inner / outer)**(n / stages)."""
    reach = [outer * (inner / outer) ** (n / stages) for n in range(1, stages + 1)]
    return Exhaustion(tuple(fattened_arms(p, count, r, outer, width) for r in reach))
