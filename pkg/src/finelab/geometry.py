"""
Plane geometry used by every other module.

Points are Python complex numbers (complex128 arrays in vectorized paths).
All shapes are frozen dataclasses; all operations are pure.

Key features:
- Disks, circle arcs stored as (start, sweep), segments, polygons and rhombs.
- Vectorized boundary distances with the index of the nearest component.
- Rhombs over disjoint arcs of the unit circle and their radial-graph split.
- Composite Gauss-Legendre contour quadrature with a node-doubling error estimate.
- Inversion of disks under w = 1/(z - z0).
- Seeded low-discrepancy point clouds.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import roots_legendre
from scipy.stats import qmc

from .errors import DomainError, GeometryError, SingularNodeError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
UNIT_TOL = 1e-12
EDGE_TOL = 1e-12


def as_point(z: complex) -> complex:
    """Coerce to a finite complex point."""
    try:
        p = complex(z)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"not a point: {z!r}") from exc
    if not (math.isfinite(p.real) and math.isfinite(p.imag)):
        raise DomainError(f"point has non-finite coordinates: {p!r}")
    return p


def _segment_distance(z: NDArray, a: complex, b: complex) -> NDArray:
    d = b - a
    t = np.clip(((z - a) * np.conj(d)).real / (abs(d) ** 2), 0.0, 1.0)
    return np.abs(z - (a + t * d))


# ============================================================
# SHAPES
# ============================================================


@dataclass(frozen=True)
class Disk:
    """Open disk D(center, radius)."""

    center: complex
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        r = float(self.radius)
        if not (math.isfinite(r) and r > 0):
            raise GeometryError(f"disk radius must be positive and finite, got {self.radius!r}")
        object.__setattr__(self, "radius", r)

    def contains(self, z: ArrayLike, closed: bool = False):
        dist = np.abs(np.asarray(z) - self.center)
        return dist <= self.radius if closed else dist < self.radius

    def boundary_distance(self, z: ArrayLike):
        return np.abs(np.abs(np.asarray(z) - self.center) - self.radius)

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    def scaled(self, factor: float) -> "Disk":
        """Concentric disk with radius multiplied by factor."""
        return Disk(self.center, self.radius * factor)


@dataclass(frozen=True)
class CircArc:
    """Counterclockwise arc of the circle |z - center| = radius.

    Angles are stored as (start, sweep) with start normalized to [0, 2π) and
    0 < sweep <= 2π.
    """

    center: complex
    radius: float
    start: float
    sweep: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise GeometryError(f"arc radius must be positive, got {self.radius!r}")
        sweep = float(self.sweep)
        if not (0.0 < sweep <= TWO_PI + 1e-12):
            raise GeometryError(f"arc sweep must lie in (0, 2π], got {sweep!r}")
        object.__setattr__(self, "sweep", min(sweep, TWO_PI))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "start", float(self.start) % TWO_PI)

    @classmethod
    def from_angles(
        cls, center: complex, radius: float, start_angle: float, end_angle: float
    ) -> "CircArc":
        """Build from (start_angle, end_angle) with end_angle > start_angle."""
        return cls(center, radius, start_angle, end_angle - start_angle)

    @property
    def end(self) -> float:
        return self.start + self.sweep

    @property
    def length(self) -> float:
        return self.radius * self.sweep

    @property
    def mid_angle(self) -> float:
        return self.start + 0.5 * self.sweep

    @property
    def is_full(self) -> bool:
        return self.sweep >= TWO_PI

    def point_at(self, angle: ArrayLike):
        return self.center + self.radius * np.exp(1j * np.asarray(angle, dtype=float))

    @property
    def start_point(self) -> complex:
        return complex(self.point_at(self.start))

    @property
    def end_point(self) -> complex:
        return complex(self.point_at(self.end))

    def sample(self, n: int) -> NDArray:
        """n points from start to end, endpoints included."""
        return self.point_at(np.linspace(self.start, self.end, n))

    def contains_angle(self, angle: ArrayLike, strict: bool = True):
        """Angular containment; endpoints are excluded when strict."""
        rel = np.mod(np.asarray(angle, dtype=float) - self.start, TWO_PI)
        if self.is_full:
            return np.ones_like(rel, dtype=bool)
        if strict:
            return (rel > 0.0) & (rel < self.sweep)
        return rel <= self.sweep

    def on_unit_circle(self) -> bool:
        return abs(self.center) <= UNIT_TOL and abs(self.radius - 1.0) <= UNIT_TOL


@dataclass(frozen=True)
class Segment:
    """Closed segment [a, b]."""

    a: complex
    b: complex

    def __post_init__(self):
        object.__setattr__(self, "a", as_point(self.a))
        object.__setattr__(self, "b", as_point(self.b))
        if self.a == self.b:
            raise GeometryError(f"degenerate segment at {self.a!r}")

    @property
    def length(self) -> float:
        return abs(self.b - self.a)

    @property
    def midpoint(self) -> complex:
        return 0.5 * (self.a + self.b)

    def distance(self, z: ArrayLike):
        return _segment_distance(np.asarray(z, dtype=complex), self.a, self.b)

    def boundary_distance(self, z: ArrayLike):
        return self.distance(z)

    def contains(self, z: ArrayLike, closed: bool = True):
        return self.distance(z) <= EDGE_TOL

    def reversed(self) -> "Segment":
        return Segment(self.b, self.a)


@dataclass(frozen=True)
class Polygon:
    """Simple closed polygon, vertices stored counterclockwise."""

    vertices: Tuple[complex, ...]

    def __post_init__(self):
        verts = tuple(as_point(v) for v in self.vertices)
        if len(verts) < 3:
            raise GeometryError("polygon needs at least 3 vertices")
        x = np.array([v.real for v in verts])
        y = np.array([v.imag for v in verts])
        signed = 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
        if signed == 0.0:
            raise GeometryError("degenerate polygon with zero area")
        if signed < 0:
            verts = tuple(reversed(verts))
        object.__setattr__(self, "vertices", verts)

    @property
    def edges(self) -> List[Segment]:
        v = self.vertices
        return [Segment(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    @property
    def area(self) -> float:
        x = np.array([v.real for v in self.vertices])
        y = np.array([v.imag for v in self.vertices])
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    def boundary_distance(self, z: ArrayLike):
        z = np.asarray(z, dtype=complex)
        v = self.vertices
        out = np.full(z.shape, np.inf)
        for i in range(len(v)):
            out = np.minimum(out, _segment_distance(z, v[i], v[(i + 1) % len(v)]))
        return out

    def contains(self, z: ArrayLike, closed: bool = True):
        """Even-odd ray casting; boundary points count when closed."""
        z = np.asarray(z, dtype=complex)
        x, y = z.real, z.imag
        inside = np.zeros(z.shape, dtype=bool)
        v = self.vertices
        for i in range(len(v)):
            p, q = v[i], v[(i + 1) % len(v)]
            crosses = (p.imag > y) != (q.imag > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                x_cross = p.real + (y - p.imag) * (q.real - p.real) / (q.imag - p.imag)
            inside ^= crosses & (x < x_cross)
        if closed:
            inside |= self.boundary_distance(z) <= EDGE_TOL
        return inside

    @property
    def bounding_radius(self) -> Tuple[complex, float]:
        """Centroid of the vertices and the largest vertex distance from it."""
        c = complex(np.mean(self.vertices))
        return c, max(abs(v - c) for v in self.vertices)

    @classmethod
    def fattened_segment(cls, a: complex, b: complex, width: float) -> "Polygon":
        """Rectangle of the given width around the segment [a, b]."""
        a, b = as_point(a), as_point(b)
        if width <= 0:
            raise GeometryError("width must be positive")
        n = 1j * (b - a) / abs(b - a) * (0.5 * width)
        return cls((a - n, b - n, b + n, a + n))


@dataclass(frozen=True)
class Rhomb:
    """Rhomb with diagonal corner_a -> corner_b and second diagonal aspect times as long.

    When the corners are the endpoints of a counterclockwise arc of a circle
    around the origin, ``outer_vertex`` lies outside that circle and
    ``inner_vertex`` inside.
    """

    corner_a: complex
    corner_b: complex
    aspect: float = 1.0
    arc: Optional[CircArc] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "corner_a", as_point(self.corner_a))
        object.__setattr__(self, "corner_b", as_point(self.corner_b))
        if self.corner_a == self.corner_b:
            raise GeometryError("rhomb corners coincide")
        if not (math.isfinite(self.aspect) and self.aspect > 0):
            raise GeometryError(f"rhomb aspect must be positive, got {self.aspect!r}")

    @property
    def midpoint(self) -> complex:
        return 0.5 * (self.corner_a + self.corner_b)

    @property
    def _half(self) -> complex:
        return 0.5 * (self.corner_b - self.corner_a)

    @property
    def outer_vertex(self) -> complex:
        return self.midpoint - 1j * self.aspect * self._half

    @property
    def inner_vertex(self) -> complex:
        return self.midpoint + 1j * self.aspect * self._half

    @property
    def vertices(self) -> Tuple[complex, complex, complex, complex]:
        return (self.corner_a, self.outer_vertex, self.corner_b, self.inner_vertex)

    @property
    def diagonals(self) -> Tuple[float, float]:
        first = abs(self.corner_b - self.corner_a)
        return first, self.aspect * first

    @property
    def side(self) -> float:
        return 0.5 * abs(self.corner_b - self.corner_a) * math.hypot(1.0, self.aspect)

    @property
    def half_angle(self) -> float:
        """Half of the interior angle at corner_a."""
        return math.atan(self.aspect)

    @cached_property
    def polygon(self) -> Polygon:
        return Polygon(self.vertices)

    @property
    def covers_arc(self) -> Optional[bool]:
        """Whether the rhomb contains its generating arc (None without an arc)."""
        if self.arc is None:
            return None
        return self.aspect >= math.tan(0.5 * self.arc.sweep) - 1e-12

    def contains(self, z: ArrayLike, closed: bool = True):
        return self.polygon.contains(z, closed=closed)

    def boundary_distance(self, z: ArrayLike):
        return self.polygon.boundary_distance(z)

    def contour(self, **kwargs) -> "Contour":
        """Counterclockwise boundary."""
        return Contour.polygon(self.vertices, **kwargs)


Obstacle = Union[Disk, Rhomb, Segment, Polygon]
Piece = Union[Segment, CircArc]


# ============================================================
# DISK UNIONS
# ============================================================


@dataclass(frozen=True)
class DiskUnion:
    """Finite union of open disks."""

    disks: Tuple[Disk, ...] = ()
    disjoint: bool = False

    def __post_init__(self):
        object.__setattr__(self, "disks", tuple(self.disks))
        if self.disjoint and len(self.disks) > 1:
            c, r = self.centers, self.radii
            gap = np.abs(c[:, None] - c[None, :]) - (r[:, None] + r[None, :])
            np.fill_diagonal(gap, np.inf)
            if np.any(gap < 0):
                i, j = np.unravel_index(int(np.argmin(gap)), gap.shape)
                raise GeometryError(f"disks {i} and {j} of a disjoint union overlap")

    def __len__(self) -> int:
        return len(self.disks)

    def __iter__(self) -> Iterator[Disk]:
        return iter(self.disks)

    @cached_property
    def centers(self) -> NDArray:
        return np.array([d.center for d in self.disks], dtype=complex)

    @cached_property
    def radii(self) -> NDArray:
        return np.array([d.radius for d in self.disks], dtype=float)

    def signed_distance(self, z: ArrayLike, chunk: int = 4096) -> NDArray:
        """min over disks of |z - a| - r (negative inside the union, inf when empty)."""
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        out = np.full(flat.shape, np.inf)
        if len(self.disks) == 0:
            return out.reshape(z.shape)
        for lo in range(0, len(self.disks), chunk):
            c = self.centers[lo : lo + chunk]
            r = self.radii[lo : lo + chunk]
            d = np.abs(flat[:, None] - c[None, :]) - r[None, :]
            out = np.minimum(out, d.min(axis=1))
        return out.reshape(z.shape)

    def contains(self, z: ArrayLike, closed: bool = False):
        d = self.signed_distance(z)
        return d <= 0 if closed else d < 0

    def meets_circle(self, center: complex, radius: float) -> bool:
        """Whether the circle |z - center| = radius meets the (open) union."""
        if not self.disks:
            return False
        gap = np.abs(np.abs(self.centers - center) - radius)
        return bool(np.any(gap < self.radii))

    def near(self, point: complex, distance: float) -> "DiskUnion":
        """Disks coming within the given distance of a point."""
        if not self.disks:
            return DiskUnion((), self.disjoint)
        keep = np.abs(self.centers - point) - self.radii < distance
        return DiskUnion(tuple(d for d, k in zip(self.disks, keep) if k), self.disjoint)

    def inside(self, region: Disk) -> "DiskUnion":
        """Disks whose closure lies inside the open region."""
        if not self.disks:
            return DiskUnion((), self.disjoint)
        keep = np.abs(self.centers - region.center) + self.radii < region.radius
        return DiskUnion(tuple(d for d, k in zip(self.disks, keep) if k), self.disjoint)

    def scaled(self, factor: float) -> "DiskUnion":
        return DiskUnion(tuple(d.scaled(factor) for d in self.disks), self.disjoint)

    @property
    def area(self) -> float:
        """Sum of disk areas (exact for disjoint unions, an upper bound otherwise)."""
        return float(np.sum(math.pi * self.radii**2)) if self.disks else 0.0


# ============================================================
# DISTANCES
# ============================================================


class ObstacleSet:
    """Obstacles grouped for vectorized nearest-boundary queries.

    Disks are handled as one array; other shapes edge by edge.
    """

    def __init__(self, obstacles: Sequence[Obstacle]):
        self.obstacles: Tuple[Obstacle, ...] = tuple(obstacles)
        disk_idx = [i for i, o in enumerate(self.obstacles) if isinstance(o, Disk)]
        self._disk_index = np.array(disk_idx, dtype=int)
        self._disk_centers = np.array([self.obstacles[i].center for i in disk_idx], dtype=complex)
        self._disk_radii = np.array([self.obstacles[i].radius for i in disk_idx], dtype=float)
        self._others = [(i, o) for i, o in enumerate(self.obstacles) if not isinstance(o, Disk)]

    def __len__(self) -> int:
        return len(self.obstacles)

    def distances(self, z: NDArray) -> Tuple[NDArray, NDArray]:
        """Distance to the nearest obstacle boundary and that obstacle's index.

        Points inside an obstacle get a negative distance (disks) or zero.
        Without obstacles the distance is inf and the index -1.
        """
        z = np.asarray(z, dtype=complex)
        best = np.full(z.shape, np.inf)
        which = np.full(z.shape, -1, dtype=int)
        if self._disk_index.size:
            d = np.abs(z[..., None] - self._disk_centers) - self._disk_radii
            k = np.argmin(d, axis=-1)
            best = np.take_along_axis(d, k[..., None], axis=-1)[..., 0]
            which = self._disk_index[k]
        for i, o in self._others:
            d = o.boundary_distance(z)
            if not isinstance(o, Segment):
                d = np.where(o.contains(z, closed=True), 0.0, d)
            closer = d < best
            best = np.where(closer, d, best)
            which = np.where(closer, i, which)
        return best, which

    def inside(self, z: ArrayLike) -> NDArray:
        """Membership in the union of closed obstacles."""
        d, _ = self.distances(np.asarray(z, dtype=complex))
        return d <= 0.0


def boundary_distances(
    z: ArrayLike, obstacles: Union[ObstacleSet, Sequence[Obstacle]], outer: Disk
) -> Tuple[NDArray, NDArray]:
    """Vectorized distance to the nearest boundary component.

    Returns:
        (distance, component) with component -1 for the outer circle and the
        obstacle index otherwise.
    """
    if not isinstance(obstacles, ObstacleSet):
        obstacles = ObstacleSet(obstacles)
    z = np.asarray(z, dtype=complex)
    d_outer = outer.radius - np.abs(z - outer.center)
    d_obs, which = obstacles.distances(z)
    use_outer = d_outer <= d_obs
    return np.where(use_outer, d_outer, d_obs), np.where(use_outer, -1, which)


def distance_to_set(z: complex, obstacles: Sequence[Obstacle], outer: Disk) -> float:
    """Distance from z to the boundary of outer minus the obstacles.

    Raises:
        DomainError: If z is not inside outer or lies in a closed obstacle.
    """
    z = as_point(z)
    if not outer.contains(z):
        raise DomainError(f"point {z!r} is not inside the outer disk")
    dist, which = boundary_distances(np.array([z]), obstacles, outer)
    if which[0] >= 0 and dist[0] <= 0.0:
        raise DomainError(f"point {z!r} lies in obstacle {int(which[0])}")
    return float(dist[0])


def invert_point(z: ArrayLike, z0: complex):
    """w = 1/(z - z0)."""
    return 1.0 / (np.asarray(z, dtype=complex) - z0)


def invert_disk(disk: Disk, z0: complex) -> Disk:
    """Image circle of the boundary of disk under w = 1/(z - z0).

    For z0 outside the closed disk the image of the disk is the returned
    disk; for z0 inside, it is the exterior of the returned disk.
    """
    b = disk.center - z0
    denom = abs(b) ** 2 - disk.radius**2
    if abs(denom) <= UNIT_TOL * max(1.0, abs(b) ** 2):
        raise GeometryError(f"inversion centre {z0!r} lies on the circle")
    return Disk(b.conjugate() / denom, disk.radius / abs(denom))


# ============================================================
# RHOMBS OVER ARCS
# ============================================================


def _arcs_overlap(a: CircArc, b: CircArc) -> bool:
    rel = (b.start - a.start) % TWO_PI
    return rel <= a.sweep or (TWO_PI - rel) <= b.sweep


def rhombs_from_arcs(arcs: Sequence[CircArc], aspect: float = 1.0) -> List[Rhomb]:
    """One rhomb per arc of the unit circle, first diagonal joining the arc's endpoints.

    All rhombs share the aspect, so they are similar. A rhomb contains its arc
    iff aspect >= tan(sweep / 2); rhombs that do not are flagged through
    ``Rhomb.covers_arc`` and logged, not rejected.

    Raises:
        GeometryError: If an arc is off the unit circle, is not shorter than π,
            or two arcs intersect.
    """
    arcs = list(arcs)
    for i, arc in enumerate(arcs):
        if not arc.on_unit_circle():
            raise GeometryError(f"arc {i} is not on the unit circle")
        if arc.sweep >= math.pi:
            raise GeometryError(f"arc {i} has angular length {arc.sweep:.6g} >= π")
    for i in range(len(arcs)):
        for j in range(i + 1, len(arcs)):
            if _arcs_overlap(arcs[i], arcs[j]):
                raise GeometryError(f"arcs {i} and {j} overlap")

    rhombs = []
    for i, arc in enumerate(arcs):
        rhomb = Rhomb(arc.start_point, arc.end_point, aspect, arc=arc)
        if not rhomb.covers_arc:
            logger.warning(
                "rhomb %d (aspect %.4g) does not contain its arc of sweep %.4g", i, aspect, arc.sweep
            )
        rhombs.append(rhomb)
    return rhombs


@dataclass(frozen=True)
class RadialGraph:
    """Curve r = r(φ) over an angular interval."""

    phi: NDArray
    r: NDArray

    @property
    def points(self) -> NDArray:
        return self.r * np.exp(1j * self.phi)


@dataclass(frozen=True)
class RadialDecomposition:
    """Radial-graph split of a family of rhombs over unit-circle arcs.

    ``lambda_plus`` holds, per rhomb, the boundary points strictly outside the
    closed unit disk; ``lambda_minus`` the points inside or on it.
    """

    outer: Tuple[RadialGraph, ...]
    inner: Tuple[RadialGraph, ...]
    lambda_plus: Tuple[NDArray, ...]
    lambda_minus: Tuple[NDArray, ...]
    lipschitz: float
    expansion: float
    per_rhomb: Tuple[Tuple[float, float], ...]


def _ray_hits_line(phi: NDArray, p: complex, q: complex) -> NDArray:
    # Solve t e^{iφ} = p + s (q - p) for t.
    u = np.exp(1j * phi)
    d = q - p

    def cross(x, y):
        return (np.conj(x) * y).imag

    return cross(p, d) / cross(u, d)


def _pair_ratios(src: NDArray, dst: NDArray, chunk: int = 1024) -> Tuple[float, float]:
    hi, lo = 0.0, np.inf
    n = src.size
    for start in range(0, n, chunk):
        s = src[start : start + chunk]
        t = dst[start : start + chunk]
        ds = np.abs(s[:, None] - src[None, :])
        dt = np.abs(t[:, None] - dst[None, :])
        idx = np.arange(start, start + s.size)[:, None]
        mask = np.arange(n)[None, :] > idx
        mask &= ds > 0
        if not mask.any():
            continue
        ratio = dt[mask] / ds[mask]
        hi = max(hi, float(ratio.max()))
        lo = min(lo, float(ratio.min()))
    return hi, (lo if np.isfinite(lo) else 0.0)


def radial_graph_decompose(
    rhombs: Sequence[Rhomb], samples_per_edge: int = 1000, max_global_points: int = 4000
) -> RadialDecomposition:
    """Represent rhomb boundaries as radial graphs over their arcs.

    The map T(e^{iφ}) = r(φ) e^{iφ} from the arcs onto the outer and inner
    chains is sampled; C is the largest and c the smallest ratio
    |T u1 - T u2| / |u1 - u2| over sampled pairs.

    Raises:
        GeometryError: If a rhomb does not have both corners on the unit circle,
            spans an arc of π or more, or its inner chain is not a radial graph.
    """
    outer: List[RadialGraph] = []
    inner: List[RadialGraph] = []
    plus: List[NDArray] = []
    minus: List[NDArray] = []
    per_rhomb: List[Tuple[float, float]] = []
    arc_pts: List[NDArray] = []
    img_pts: List[NDArray] = []

    for i, rh in enumerate(rhombs):
        a, b = rh.corner_a, rh.corner_b
        if abs(abs(a) - 1.0) > UNIT_TOL or abs(abs(b) - 1.0) > UNIT_TOL:
            raise GeometryError(f"rhomb {i} is not built over a unit-circle arc")
        start = math.atan2(a.imag, a.real)
        sweep = (math.atan2(b.imag, b.real) - start) % TWO_PI
        if not 0.0 < sweep < math.pi:
            raise GeometryError(f"rhomb {i} spans an arc of angular length {sweep:.6g}")
        mid = start + 0.5 * sweep
        if (rh.inner_vertex * np.exp(-1j * mid)).real <= 0.0:
            raise GeometryError(f"inner chain of rhomb {i} is not a radial graph")

        phi = np.linspace(start, start + sweep, 2 * samples_per_edge)
        first = phi <= mid
        r_out = np.where(
            first, _ray_hits_line(phi, a, rh.outer_vertex), _ray_hits_line(phi, rh.outer_vertex, b)
        )
        r_in = np.where(
            first, _ray_hits_line(phi, a, rh.inner_vertex), _ray_hits_line(phi, rh.inner_vertex, b)
        )
        # endpoints are the corners themselves
        r_out[[0, -1]] = 1.0
        r_in[[0, -1]] = 1.0
        g_out, g_in = RadialGraph(phi, r_out), RadialGraph(phi, r_in)
        outer.append(g_out)
        inner.append(g_in)
        out_pts = g_out.points
        plus.append(out_pts[r_out > 1.0])
        minus.append(np.concatenate([out_pts[r_out <= 1.0], g_in.points]))

        u = np.exp(1j * phi)
        c_hi_o, c_lo_o = _pair_ratios(u, out_pts)
        c_hi_i, c_lo_i = _pair_ratios(u, g_in.points)
        per_rhomb.append((max(c_hi_o, c_hi_i), min(c_lo_o, c_lo_i)))
        arc_pts.append(u)
        img_pts.append(out_pts)

    if not rhombs:
        return RadialDecomposition((), (), (), (), 1.0, 1.0, ())

    big = max(c for c, _ in per_rhomb)
    small = min(c for _, c in per_rhomb)
    if len(rhombs) > 1:
        u_all = np.concatenate(arc_pts)
        t_all = np.concatenate(img_pts)
        stride = max(1, u_all.size // max_global_points)
        g_hi, g_lo = _pair_ratios(u_all[::stride], t_all[::stride])
        big, small = max(big, g_hi), min(small, g_lo)

    return RadialDecomposition(
        tuple(outer), tuple(inner), tuple(plus), tuple(minus), big, small, tuple(per_rhomb)
    )


# ============================================================
# CONTOURS AND QUADRATURE
# ============================================================


@dataclass(frozen=True)
class ContourPiece:
    """A smooth piece traversed forward or backward."""

    shape: Piece
    reverse: bool = False

    def _forward(self, t: NDArray) -> Tuple[NDArray, NDArray]:
        s = self.shape
        if isinstance(s, Segment):
            d = s.b - s.a
            return s.a + t * d, np.full(t.shape, d, dtype=complex)
        z = s.point_at(s.start + t * s.sweep)
        return z, 1j * s.sweep * (z - s.center)

    def evaluate(self, t: NDArray) -> Tuple[NDArray, NDArray]:
        """Position and derivative at parameters t in [0, 1]."""
        if self.reverse:
            z, dz = self._forward(1.0 - t)
            return z, -dz
        return self._forward(t)

    @property
    def start_point(self) -> complex:
        return complex(self.evaluate(np.array([0.0]))[0][0])

    @property
    def end_point(self) -> complex:
        return complex(self.evaluate(np.array([1.0]))[0][0])


@dataclass(frozen=True)
class Contour:
    """Ordered oriented pieces with composite Gauss-Legendre rules.

    Each piece is split into ``panels`` panels of ``order`` nodes.
    """

    pieces: Tuple[ContourPiece, ...]
    closed: bool = True
    order: int = 16
    panels: int = 4

    def __post_init__(self):
        pieces = tuple(p if isinstance(p, ContourPiece) else ContourPiece(p) for p in self.pieces)
        object.__setattr__(self, "pieces", pieces)
        if not pieces:
            raise GeometryError("contour has no pieces")
        if self.order < 8:
            raise GeometryError("contour quadrature needs at least 8 nodes per piece")
        scale = 1.0 + max(max(abs(p.start_point), abs(p.end_point)) for p in pieces)
        tol = 1e-9 * scale
        for i in range(len(pieces) - 1):
            if abs(pieces[i].end_point - pieces[i + 1].start_point) > tol:
                raise GeometryError(f"contour pieces {i} and {i + 1} do not connect")
        if self.closed and abs(pieces[-1].end_point - pieces[0].start_point) > tol:
            raise GeometryError("contour is flagged closed but does not close")

    @classmethod
    def circle(cls, center: complex, radius: float, clockwise: bool = False, **kwargs) -> "Contour":
        return cls((ContourPiece(CircArc(center, radius, 0.0, TWO_PI), clockwise),), **kwargs)

    @classmethod
    def polygon(cls, vertices: Sequence[complex], **kwargs) -> "Contour":
        v = list(vertices)
        return cls(tuple(Segment(v[i], v[(i + 1) % len(v)]) for i in range(len(v))), **kwargs)

    def reversed(self) -> "Contour":
        return Contour(
            tuple(ContourPiece(p.shape, not p.reverse) for p in reversed(self.pieces)),
            self.closed,
            self.order,
            self.panels,
        )

    @property
    def length(self) -> float:
        return sum(p.shape.length for p in self.pieces)

    def nodes(self, panels: Optional[int] = None) -> Tuple[NDArray, NDArray]:
        """Quadrature nodes and complex weights: ∫ f dz ≈ Σ f(z_k) w_k."""
        panels = panels or self.panels
        x, w = roots_legendre(self.order)
        base = np.arange(panels)[:, None]
        t = ((base + 0.5 * (x[None, :] + 1.0)) / panels).ravel()
        wt = np.tile(0.5 * w / panels, panels)
        zs, ws = [], []
        for piece in self.pieces:
            z, dz = piece.evaluate(t)
            zs.append(z)
            ws.append(dz * wt)
        return np.concatenate(zs), np.concatenate(ws)


@dataclass(frozen=True)
class ContourIntegral:
    value: Union[complex, NDArray]
    error: float
    nodes: int


def _evaluate_integrand(integrand: Callable, z: NDArray) -> NDArray:
    vals = np.asarray(integrand(z), dtype=complex)
    if vals.ndim == 0:
        vals = np.broadcast_to(vals, z.shape)
    bad = ~np.isfinite(vals)
    if bad.any():
        k = int(np.argwhere(bad)[0][0])
        raise SingularNodeError(complex(z[k]), vals.reshape(z.size, -1)[k].tolist())
    return vals


def contour_integral(
    contour: Contour,
    integrand: Callable[[NDArray], ArrayLike],
    *,
    rtol: float = 1e-13,
    max_levels: int = 7,
) -> ContourIntegral:
    """∫ f(ξ) dξ along the contour.

    The panel count is doubled until two successive rules agree to rtol (or
    max_levels is reached); the reported error is the last difference.
    The integrand receives a 1-D array of nodes and may return an array of
    shape (nodes,) or (nodes, m) to integrate m functions at once.

    Raises:
        SingularNodeError: If the integrand is not finite at some node.
    """
    panels = contour.panels
    z, w = contour.nodes(panels)
    f = _evaluate_integrand(integrand, z)
    prev = np.tensordot(w, f, axes=(0, 0))
    err = np.inf
    for _ in range(max_levels):
        panels *= 2
        z, w = contour.nodes(panels)
        f = _evaluate_integrand(integrand, z)
        cur = np.tensordot(w, f, axes=(0, 0))
        err = float(np.max(np.abs(cur - prev)))
        prev = cur
        if err <= rtol * max(1.0, float(np.max(np.abs(cur)))):
            break
    value = complex(prev) if np.ndim(prev) == 0 else prev
    return ContourIntegral(value, err, int(z.size))


# ============================================================
# POINT CLOUDS
# ============================================================


def halton_unit(n: int, seed: int = 0) -> NDArray:
    """n scrambled Halton points in the unit square, shape (n, 2)."""
    if n <= 0:
        return np.empty((0, 2))
    return qmc.Halton(d=2, scramble=True, seed=seed).random(n)


def disk_cloud(disk: Disk, n: int, seed: int = 0, shrink: float = 1.0) -> NDArray:
    """n low-discrepancy points in the disk (radius optionally shrunk)."""
    u = halton_unit(n, seed)
    r = disk.radius * shrink * np.sqrt(u[:, 0])
    return disk.center + r * np.exp(1j * TWO_PI * u[:, 1])


def annulus_cloud(center: complex, r_in: float, r_out: float, n: int, seed: int = 0) -> NDArray:
    """n low-discrepancy points with r_in <= |z - center| <= r_out (area-uniform)."""
    u = halton_unit(n, seed)
    r = np.sqrt(r_in**2 + u[:, 0] * (r_out**2 - r_in**2))
    return center + r * np.exp(1j * TWO_PI * u[:, 1])


def circle_points(center: complex, radius: float, n: int) -> NDArray:
    return center + radius * np.exp(1j * TWO_PI * np.arange(n) / n)


def union_cloud(union: Iterable[Disk], per_disk: int, seed: int = 0, shrink: float = 1.0) -> NDArray:
    """Points inside every disk of a union, per_disk each."""
    parts = [disk_cloud(d, per_disk, seed + i, shrink) for i, d in enumerate(union)]
    return np.concatenate(parts) if parts else np.empty(0, dtype=complex)
