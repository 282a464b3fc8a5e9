"""
Function families with approximant sequences.

- BorelSeriesFn: sum c_n / (z - a_n) over disks clustering at the unit circle.
- CauchyTransformFn: -(1/π) ∬ g(ξ) dm(ξ) / (ξ - z) for a cell-constant density on a disk union.
- SqrtBranchSumFn: sum s_n c_n sqrt((z - a_n)(z - b_n)) with the branch ~ z at infinity.
- Saw geometries: Cauchy decomposition over a circle and rhombs, Hölder tail bounds.
- EntireFn: polynomials, the obstacle-free case.

Every family can produce an ApproximantSeq, and uniform_convergence_check
measures sup-norm gaps of such a sequence on sample points.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import quad

from .errors import BranchCutError, DomainError, GeometryError, ParameterError
from .geometry import (
    CircArc,
    Contour,
    Disk,
    DiskUnion,
    Obstacle,
    ObstacleSet,
    Rhomb,
    Segment,
    as_point,
    contour_integral,
    radial_graph_decompose,
    rhombs_from_arcs,
)

logger = logging.getLogger(__name__)

OBSTRUCTED = "OBSTRUCTED"
NOT_OBSTRUCTED = "NOT_OBSTRUCTED"
INCONCLUSIVE = "INCONCLUSIVE"


def _as_array(z: ArrayLike) -> Tuple[NDArray, bool]:
    arr = np.asarray(z, dtype=complex)
    return np.atleast_1d(arr), arr.ndim == 0


def _out(values: NDArray, scalar: bool):
    return complex(values[0]) if scalar else values


# ============================================================
# APPROXIMANT SEQUENCES
# ============================================================


@dataclass(frozen=True)
class Approximant:
    """F_n together with the compact K_n it is not defined on."""

    func: Callable[[NDArray], NDArray]
    excluded: Tuple[Obstacle, ...] = ()


@dataclass(frozen=True)
class ApproximantSeq:
    """Stage n -> Approximant, with a uniform bound C on every stage.

    ``tail_bound(n)``, when given, is a certified bound on sup |F_n - limit|.
    """

    generator: Callable[[int], Approximant]
    stages: Tuple[int, ...]
    uniform_bound: float
    limit: Optional[Callable[[NDArray], NDArray]] = None
    tail_bound: Optional[Callable[[int], float]] = None
    label: str = ""


@dataclass(frozen=True)
class ConvergenceRow:
    stage: int
    gap: float
    sup: float
    bound: Optional[float] = None


@dataclass(frozen=True)
class ConvergenceTable:
    rows: Tuple[ConvergenceRow, ...]
    uniform_bound: float
    tolerance: float

    @property
    def final_gap(self) -> float:
        return self.rows[-1].gap if self.rows else 0.0

    @property
    def bounded(self) -> bool:
        return all(r.sup <= self.uniform_bound * (1.0 + 1e-12) for r in self.rows)

    @property
    def dominated(self) -> bool:
        return all(r.bound is None or r.gap <= r.bound * (1.0 + 1e-9) + 1e-15 for r in self.rows)

    @property
    def passed(self) -> bool:
        return self.final_gap <= self.tolerance and self.bounded and self.dominated


def uniform_convergence_check(
    seq: ApproximantSeq, V_samples: ArrayLike, stages: Optional[int] = None, tol: float = 2e-2
) -> ConvergenceTable:
    """Sup-norm gaps sup_V |F_n - F| over the first ``stages`` stages.

    F is the sequence's limit when it has one, else its last stage.

    Raises:
        DomainError: If a sample lies in some excluded compact K_n.
    """
    samples = np.asarray(V_samples, dtype=complex).ravel()
    chosen = seq.stages if stages is None else seq.stages[:stages]
    approximants = [(n, seq.generator(n)) for n in chosen]
    for n, approx in approximants:
        if approx.excluded and ObstacleSet(approx.excluded).inside(samples).any():
            raise DomainError(f"a sample point lies in the excluded compact of stage {n}")

    if seq.limit is not None:
        target = np.asarray(seq.limit(samples), dtype=complex)
    else:
        target = np.asarray(approximants[-1][1].func(samples), dtype=complex)
    rows = []
    for n, approx in approximants:
        vals = np.asarray(approx.func(samples), dtype=complex)
        gap = float(np.max(np.abs(vals - target))) if samples.size else 0.0
        sup = float(np.max(np.abs(vals))) if samples.size else 0.0
        bound = seq.tail_bound(n) if seq.tail_bound is not None else None
        rows.append(ConvergenceRow(n, gap, sup, bound))
    table = ConvergenceTable(tuple(rows), seq.uniform_bound, tol)
    logger.info(
        "%s: final gap %.3g (tol %.3g), passed=%s", seq.label or "approximants", table.final_gap, tol, table.passed
    )
    return table


# ============================================================
# BOREL SERIES
# ============================================================


@dataclass(frozen=True)
class BorelTerm:
    center: complex
    radius: float
    coeff: complex


@dataclass(frozen=True)
class BorelSeriesFn:
    """f(z) = sum_n c_n / (z - a_n) with |c_n| <= rho_n / n**2 (n counted from 1)."""

    terms: Tuple[BorelTerm, ...]

    def __post_init__(self):
        terms = tuple(
            t if isinstance(t, BorelTerm) else BorelTerm(as_point(t[0]), float(t[1]), complex(t[2]))
            for t in self.terms
        )
        object.__setattr__(self, "terms", terms)
        for n, t in enumerate(terms, start=1):
            if not t.radius > 0:
                raise ParameterError(f"term {n}: radius must be positive")
            if abs(t.center) - t.radius < 1.0:
                raise GeometryError(f"term {n}: disk D(a_n, rho_n) meets the closed unit disk")
            if abs(t.coeff) > t.radius / n**2 * (1.0 + 1e-12):
                raise ParameterError(f"term {n}: |c_n| exceeds rho_n / n^2")
        DiskUnion(tuple(Disk(t.center, t.radius) for t in terms), disjoint=True)

    @classmethod
    def from_union(cls, union: DiskUnion, scale: float = 1.0) -> "BorelSeriesFn":
        """Terms on the disks of a union with c_n = scale * rho_n / n**2."""
        if not 0 < scale <= 1:
            raise ParameterError("scale must lie in (0, 1]")
        return cls(tuple(BorelTerm(d.center, d.radius, scale * d.radius / n**2) for n, d in enumerate(union, 1)))

    def __len__(self) -> int:
        return len(self.terms)

    @cached_property
    def centers(self) -> NDArray:
        return np.array([t.center for t in self.terms], dtype=complex)

    @cached_property
    def radii(self) -> NDArray:
        return np.array([t.radius for t in self.terms], dtype=float)

    @cached_property
    def coeffs(self) -> NDArray:
        return np.array([t.coeff for t in self.terms], dtype=complex)

    @property
    def union(self) -> DiskUnion:
        return DiskUnion(tuple(Disk(t.center, t.radius) for t in self.terms), disjoint=True)

    def partial(self, N: int, z: ArrayLike):
        """Sum of the first N terms."""
        zs, scalar = _as_array(z)
        N = min(N, len(self.terms))
        if N == 0:
            return _out(np.zeros(zs.shape, dtype=complex), scalar)
        dist = np.abs(zs[:, None] - self.centers[None, :N])
        inside = dist < self.radii[None, :N]
        if inside.any():
            i, n = np.argwhere(inside)[0]
            raise DomainError(f"point {complex(zs[i])!r} lies in disk n={n + 1}")
        vals = (self.coeffs[None, :N] / (zs[:, None] - self.centers[None, :N])).sum(axis=1)
        return _out(vals, scalar)

    def __call__(self, z: ArrayLike):
        return self.partial(len(self.terms), z)

    @property
    def uniform_bound(self) -> float:
        return float(sum(1.0 / n**2 for n in range(1, len(self.terms) + 1)))

    def approximants(self, stages: Optional[Sequence[int]] = None) -> ApproximantSeq:
        disks = [Disk(t.center, t.radius) for t in self.terms]
        chosen = tuple(stages) if stages else tuple(range(1, len(self.terms) + 1))

        def generator(N: int) -> Approximant:
            return Approximant(lambda z, N=N: self.partial(N, z), tuple(disks[:N]))

        return ApproximantSeq(
            generator, chosen, self.uniform_bound, self.__call__, lambda N: borel_tail_bound(self, N), "borel"
        )


def eval_borel(f: BorelSeriesFn, z: ArrayLike):
    """Full sum; DomainError naming n when z lies in D(a_n, rho_n)."""
    return f(z)


def borel_tail_bound(f: BorelSeriesFn, N: int) -> float:
    """sum_{N < n <= len} 1/n**2, bounding |f - partial_N| off the disks."""
    return float(sum(1.0 / n**2 for n in range(max(N, 0) + 1, len(f.terms) + 1)))


# ============================================================
# CAUCHY TRANSFORMS
# ============================================================


@dataclass(frozen=True)
class CellGrid:
    """Cell centres, cell areas (fraction inside the support times h**2) and densities."""

    centers: NDArray
    weights: NDArray
    density: NDArray
    owner: NDArray
    spacing: NDArray

    @cached_property
    def kernel_radii(self) -> NDArray:
        # Radius of the disk with the cell's area.
        return np.sqrt(self.weights / math.pi)


def _disk_cells(disk: Disk, resolution: int, sub: int = 8) -> Tuple[NDArray, NDArray, float]:
    h = 2.0 * disk.radius / resolution
    offsets = (np.arange(resolution) + 0.5 - 0.5 * resolution) * h
    grid = (disk.center + offsets[None, :] + 1j * offsets[:, None]).ravel()
    dist = np.abs(grid - disk.center)
    diag = h / math.sqrt(2.0)
    inner = dist + diag <= disk.radius
    edge = ~inner & (dist - diag < disk.radius)
    frac = inner.astype(float)
    if edge.any():
        s = (np.arange(sub) + 0.5 - 0.5 * sub) * (h / sub)
        pattern = (s[None, :] + 1j * s[:, None]).ravel()
        pts = grid[edge][:, None] + pattern[None, :]
        frac[edge] = np.mean(np.abs(pts - disk.center) < disk.radius, axis=1)
    keep = frac > 0
    return grid[keep], frac[keep] * h * h, h


@dataclass(frozen=True)
class CauchyTransformFn:
    """Cauchy transform of a cell-constant density on a disk union.

    Each disk carries a square grid of ``resolution`` cells per diameter;
    boundary cells are weighted by the fraction of their area inside the disk.
    A cell acts as a uniform disk of equal area, whose transform is exact:
    R**2 / (z - ξ) outside and conj(z - ξ) inside.
    """

    support: DiskUnion
    density: Union[complex, Callable[[NDArray], ArrayLike]] = 1.0
    resolution: int = 128
    nonneg: bool = False
    stages: Tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)

    def __post_init__(self):
        if self.resolution < 4:
            raise ParameterError("resolution must be at least 4")
        if list(self.stages) != sorted(self.stages) or any(not 0 < s <= 1 for s in self.stages):
            raise ParameterError("stage fractions must increase within (0, 1]")
        if self.nonneg:
            g = self.cells.density
            if np.any(np.abs(g.imag) > 0) or np.any(g.real < 0):
                raise ParameterError("density flagged non-negative has negative or complex values")
            for k in range(len(self.support)):
                if not np.any(g[self.cells.owner == k].real > 0):
                    raise ParameterError(f"density vanishes on component {k}")

    @cached_property
    def cells(self) -> CellGrid:
        centers, weights, owner, spacing = [], [], [], []
        for k, disk in enumerate(self.support):
            c, w, h = _disk_cells(disk, self.resolution)
            centers.append(c)
            weights.append(w)
            owner.append(np.full(c.shape, k))
            spacing.append(np.full(c.shape, h))
        if centers:
            xi = np.concatenate(centers)
            grid = (xi, np.concatenate(weights), np.concatenate(owner), np.concatenate(spacing))
        else:
            grid = (np.empty(0, complex), np.empty(0), np.empty(0, int), np.empty(0))
        xi = grid[0]
        if callable(self.density):
            g = np.asarray(self.density(xi), dtype=complex) * np.ones(xi.shape)
        else:
            g = np.full(xi.shape, complex(self.density))
        return CellGrid(xi, grid[1], g, grid[2], grid[3])

    @property
    def sup_density(self) -> float:
        g = self.cells.density
        return float(np.max(np.abs(g))) if g.size else 0.0

    def _sum(self, z: NDArray, mask: Optional[NDArray] = None, chunk: int = 1 << 22) -> NDArray:
        cells = self.cells
        g = cells.density if mask is None else np.where(mask, cells.density, 0.0)
        xi, big_r = cells.centers, cells.kernel_radii
        out = np.zeros(z.shape, dtype=complex)
        if xi.size == 0:
            return out
        step = max(1, chunk // max(1, xi.size))
        for lo in range(0, z.size, step):
            d = z[lo : lo + step, None] - xi[None, :]
            near = np.abs(d) < big_r[None, :]
            with np.errstate(divide="ignore", invalid="ignore"):
                kern = np.where(near, np.conj(d), big_r[None, :] ** 2 / np.where(near, 1.0, d))
            out[lo : lo + step] = kern @ g
        return out

    def __call__(self, z: ArrayLike):
        zs, scalar = _as_array(z)
        return _out(self._sum(zs), scalar)

    @cached_property
    def refined(self) -> "CauchyTransformFn":
        """Same transform at twice the resolution."""
        return CauchyTransformFn(self.support, self.density, 2 * self.resolution, False, self.stages)

    def with_error(self, z: ArrayLike) -> Tuple[complex, float]:
        """Value and the resolution-doubling difference as its error estimate."""
        v = self(z)
        return v, float(np.max(np.abs(np.asarray(self.refined(z)) - np.asarray(v))))

    # stages -----------------------------------------------------

    def stage_mask(self, stage: int) -> NDArray:
        if not 0 <= stage <= len(self.stages):
            raise ParameterError(f"stage must lie in 0..{len(self.stages)}, got {stage}")
        cells = self.cells
        if stage == 0:
            return np.zeros(cells.centers.shape, dtype=bool)
        f = self.stages[stage - 1]
        if f >= 1.0:
            # Edge cells may have their centre just outside the disk.
            return np.ones(cells.centers.shape, dtype=bool)
        centers = np.array([d.center for d in self.support], dtype=complex)
        radii = np.array([d.radius for d in self.support])
        return np.abs(cells.centers - centers[cells.owner]) <= f * radii[cells.owner]

    def stage_compact(self, stage: int) -> Tuple[Disk, ...]:
        """Closed disks containing every cell used by a stage."""
        if not 0 <= stage <= len(self.stages):
            raise ParameterError(f"stage must lie in 0..{len(self.stages)}, got {stage}")
        if stage == 0:
            return ()
        f = self.stages[stage - 1]
        return tuple(Disk(d.center, f * d.radius + 2.0 * d.radius / self.resolution) for d in self.support)

    def approximants(self) -> ApproximantSeq:
        def generator(n: int) -> Approximant:
            return Approximant(lambda z, n=n: cauchy_partial(self, n, z), self.stage_compact(n))

        stages = tuple(range(1, len(self.stages) + 1))
        return ApproximantSeq(generator, stages, _cauchy_uniform_bound(self), self.__call__, None, "cauchy")


def _cauchy_uniform_bound(f: CauchyTransformFn) -> float:
    # |R^2/(z - ξ)| <= R and |conj(z - ξ)| <= R, so every partial sum is below sum |g| R.
    cells = f.cells
    return float(np.sum(np.abs(cells.density) * cells.kernel_radii))


def eval_cauchy_transform(f: CauchyTransformFn, z: ArrayLike):
    return f(z)


def cauchy_partial(f: CauchyTransformFn, stage: int, z: ArrayLike):
    """Transform restricted to the cells of a stage of the exhaustion.

    Raises:
        DomainError: If z lies in the stage's compact.
    """
    zs, scalar = _as_array(z)
    compact = f.stage_compact(stage)
    if compact and ObstacleSet(compact).inside(zs).any():
        raise DomainError(f"point lies in the compact of stage {stage}")
    return _out(f._sum(zs, f.stage_mask(stage)), scalar)


def cauchy_partial_bound(f: CauchyTransformFn, stage: int, z: ArrayLike) -> float:
    """sup|g| * (area left out) / (π * distance to the cells left out)."""
    zs, _ = _as_array(z)
    rest = ~f.stage_mask(stage)
    if not rest.any():
        return 0.0
    cells = f.cells
    xi = cells.centers[rest]
    dist = np.min(np.abs(zs[:, None] - xi[None, :]) - cells.kernel_radii[rest][None, :])
    if dist <= 0:
        return math.inf
    return float(np.max(np.abs(cells.density[rest])) * cells.weights[rest].sum() / (math.pi * dist))


@dataclass(frozen=True)
class NonextendibilityReport:
    contour_value: complex
    contour_error: float
    area_value: complex
    verdict: str


def nonextendibility_test(
    f: CauchyTransformFn, p: complex, rho: float, *, rel_tol: float = 0.05, floor: float = 1e-12
) -> NonextendibilityReport:
    """Compare the circle integral of f around p with 2i times the enclosed mass.

    Off the support f is analytic, so a non-zero circle integral rules out an
    analytic extension of f across the disk. OBSTRUCTED when both values agree
    within rel_tol and are bounded away from zero, NOT_OBSTRUCTED when both
    vanish, INCONCLUSIVE otherwise.

    Raises:
        GeometryError: If the circle meets the support.
    """
    p = as_point(p)
    if f.support.meets_circle(p, rho):
        raise GeometryError(f"circle |z - {p!r}| = {rho:.6g} meets the support")
    result = contour_integral(Contour.circle(p, rho), f._sum, rtol=1e-12)
    cells = f.cells
    enclosed = np.abs(cells.centers - p) < rho
    area = complex(2j * np.sum(cells.density[enclosed] * cells.weights[enclosed]))
    contour = complex(result.value)
    scale = max(abs(contour), abs(area))
    small = floor * max(1.0, f.sup_density * float(cells.weights.sum()))
    if scale <= small + result.error:
        verdict = NOT_OBSTRUCTED
    elif abs(contour - area) <= rel_tol * scale + result.error and min(abs(contour), abs(area)) > 10 * (
        small + result.error
    ):
        verdict = OBSTRUCTED
    else:
        verdict = INCONCLUSIVE
    logger.info("circle integral %.6g vs area %.6g: %s", abs(contour), abs(area), verdict)
    return NonextendibilityReport(contour, result.error, area, verdict)


# ============================================================
# SQUARE-ROOT BRANCHES
# ============================================================


def eval_sqrt_branch(a: complex, b: complex, z: ArrayLike):
    """Branch of sqrt((z - a)(z - b)) equal to z + O(1) at infinity, cut on [a, b].

    Computed as (z - m) sqrt(1 - 1/ζ**2) with m the midpoint and
    ζ = (z - m) / h, h = (b - a) / 2; the principal root is cut exactly on
    ζ in [-1, 1].

    Raises:
        BranchCutError: If z is within 1e-12 (relative) of the segment.
    """
    a, b = as_point(a), as_point(b)
    zs, scalar = _as_array(z)
    seg = Segment(a, b)
    on_cut = seg.distance(zs) <= 1e-12 * max(1.0, seg.length)
    if on_cut.any():
        raise BranchCutError(f"point {complex(zs[np.argmax(on_cut)])!r} lies on the cut [{a!r}, {b!r}]")
    m, h = 0.5 * (a + b), 0.5 * (b - a)
    zeta = (zs - m) / h
    w = (zs - m) * np.sqrt(1.0 - 1.0 / (zeta * zeta))
    return _out(w, scalar)


def continue_sqrt_branch(a: complex, b: complex, path: ArrayLike, w0: complex) -> NDArray:
    """Follow sqrt((z - a)(z - b)) along a path, starting from the value w0.

    At each step the root closest to the previous value is kept; the path
    must be fine compared with its distance to a and b.
    """
    path = np.asarray(path, dtype=complex)
    roots = np.sqrt((path - a) * (path - b))
    out = np.empty(path.shape, dtype=complex)
    prev = complex(w0)
    for k, r in enumerate(roots):
        prev = r if abs(r - prev) <= abs(r + prev) else -r
        out[k] = prev
    return out


def _segments_meet(s: Segment, t: Segment) -> bool:
    def orient(p, q, r):
        return ((q - p).conjugate() * (r - p)).imag

    o1, o2 = orient(s.a, s.b, t.a), orient(s.a, s.b, t.b)
    o3, o4 = orient(t.a, t.b, s.a), orient(t.a, t.b, s.b)
    if o1 * o2 < 0 and o3 * o4 < 0:
        return True
    ends = [s.distance(t.a), s.distance(t.b), t.distance(s.a), t.distance(s.b)]
    return min(float(e) for e in ends) == 0.0


@dataclass(frozen=True)
class SqrtBranchSumFn:
    """F(z) = sum s_n c_n sqrt((z - a_n)(z - b_n)) over segments off the closed unit disk."""

    segments: Tuple[Segment, ...]
    coeffs: Tuple[complex, ...]
    signs: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        segs = tuple(s if isinstance(s, Segment) else Segment(*s) for s in self.segments)
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs))
        signs = tuple(int(s) for s in self.signs) if self.signs is not None else (1,) * len(segs)
        object.__setattr__(self, "signs", signs)
        if len(self.coeffs) != len(segs) or len(signs) != len(segs):
            raise ParameterError("segments, coefficients and signs must have the same length")
        if any(s not in (1, -1) for s in signs):
            raise ParameterError("signs must be +1 or -1")
        for i, s in enumerate(segs):
            if float(s.distance(0j)) <= 1.0:
                raise GeometryError(f"segment {i} meets the closed unit disk")
        for i in range(len(segs)):
            for j in range(i + 1, len(segs)):
                if _segments_meet(segs[i], segs[j]):
                    raise GeometryError(f"segments {i} and {j} meet")

    def __len__(self) -> int:
        return len(self.segments)

    def term(self, n: int, z: ArrayLike):
        """c_n sqrt((z - a_n)(z - b_n)) on the base branch (sign ignored)."""
        s = self.segments[n]
        return self.coeffs[n] * eval_sqrt_branch(s.a, s.b, z)

    def partial(self, N: int, z: ArrayLike):
        zs, scalar = _as_array(z)
        total = np.zeros(zs.shape, dtype=complex)
        for n in range(min(N, len(self.segments))):
            total = total + self.signs[n] * np.asarray(self.term(n, zs))
        return _out(total, scalar)

    def __call__(self, z: ArrayLike):
        return self.partial(len(self.segments), z)

    def with_signs(self, signs: Sequence[int]) -> "SqrtBranchSumFn":
        return SqrtBranchSumFn(self.segments, self.coeffs, tuple(signs))

    def flipped(self, n: int) -> "SqrtBranchSumFn":
        signs = list(self.signs)
        signs[n] = -signs[n]
        return self.with_signs(signs)

    def sheet_residual(self, n: int, z: ArrayLike) -> NDArray:
        """Relative residual of (w - sum_{l != n} s_l c_l w_l)**2 = c_n**2 (z - a_n)(z - b_n),
        with w the value on the sheet with sign n flipped."""
        zs, _ = _as_array(z)
        w = np.asarray(self.flipped(n)(zs))
        rest = np.zeros(zs.shape, dtype=complex)
        for l in range(len(self.segments)):
            if l != n:
                rest = rest + self.signs[l] * np.asarray(self.term(l, zs))
        s = self.segments[n]
        rhs = self.coeffs[n] ** 2 * (zs - s.a) * (zs - s.b)
        return np.abs((w - rest) ** 2 - rhs) / np.maximum(np.abs(rhs), np.finfo(float).tiny)

    def bound_on(self, radius: float) -> float:
        """sum |c_n| sqrt((R + |a_n|)(R + |b_n|)) bounds |partial sums| on |z| <= R."""
        pairs = zip(self.coeffs, self.segments)
        return float(sum(abs(c) * math.sqrt((radius + abs(s.a)) * (radius + abs(s.b))) for c, s in pairs))

    def approximants(self, radius: float = 2.0) -> ApproximantSeq:
        def generator(N: int) -> Approximant:
            return Approximant(lambda z, N=N: self.partial(N, z), tuple(self.segments[:N]))

        stages = tuple(range(1, len(self.segments) + 1))
        return ApproximantSeq(generator, stages, self.bound_on(radius), self.__call__, None, "sqrt")


def eval_sqrt_sum(f: SqrtBranchSumFn, z: ArrayLike):
    return f(z)


# ============================================================
# ENTIRE FUNCTIONS
# ============================================================


@dataclass(frozen=True)
class EntireFn:
    """Polynomial sum c_k z**k."""

    coefficients: Tuple[complex, ...] = (0j, 1 + 0j)

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(complex(c) for c in self.coefficients) or (0j,))

    def __call__(self, z: ArrayLike):
        zs, scalar = _as_array(z)
        return _out(P.polyval(zs, np.array(self.coefficients)), scalar)

    def bound_on(self, radius: float) -> float:
        return float(sum(abs(c) * radius**k for k, c in enumerate(self.coefficients)))

    def approximants(self, radius: float = 2.0) -> ApproximantSeq:
        def generator(n: int) -> Approximant:
            return Approximant(self.__call__, ())

        return ApproximantSeq(generator, (1,), self.bound_on(radius), self.__call__, lambda n: 0.0, "entire")


# ============================================================
# SAW GEOMETRY
# ============================================================


@dataclass(frozen=True)
class SawGeometry:
    """Rhombs over arcs of the unit circle clustering at p, inside the disk D(p, r).

    Rhombs are expected in decreasing size; the saw domains are D(p, r) minus
    the closed rhombs, on either side of the unit circle.
    """

    rhombs: Tuple[Rhomb, ...]
    ring_radius: float
    center: complex = 1 + 0j
    cone_angle: float = math.pi / 2

    def __post_init__(self):
        object.__setattr__(self, "rhombs", tuple(self.rhombs))
        object.__setattr__(self, "center", as_point(self.center))
        if not self.ring_radius > 0:
            raise ParameterError("ring radius must be positive")
        if not 0 < self.cone_angle < math.pi:
            raise ParameterError("cone angle must lie in (0, π)")
        for i, rh in enumerate(self.rhombs):
            if max(abs(v - self.center) for v in rh.vertices) >= self.ring_radius:
                raise GeometryError(f"rhomb {i} is not inside D(p, r)")
        for i in range(len(self.rhombs)):
            for j in range(i + 1, len(self.rhombs)):
                a, b = self.rhombs[i], self.rhombs[j]
                if a.contains(np.array(b.vertices)).any() or b.contains(np.array(a.vertices)).any() or any(
                    _segments_meet(e, g) for e in a.polygon.edges for g in b.polygon.edges
                ):
                    raise GeometryError(f"rhombs {i} and {j} meet")

    @cached_property
    def decomposition(self):
        return radial_graph_decompose(self.rhombs)

    @property
    def circle(self) -> Contour:
        return Contour.circle(self.center, self.ring_radius)

    def contains(self, z: ArrayLike) -> NDArray:
        """Membership in D(p, r) minus the closed rhombs."""
        z = np.asarray(z, dtype=complex)
        inside = np.abs(z - self.center) < self.ring_radius
        for rh in self.rhombs:
            inside &= ~rh.contains(z, closed=True)
        return inside


def dyadic_saw(
    count: int = 8,
    center: complex = 1 + 0j,
    ring_radius: float = 0.5,
    aspect: float = 1.0,
    offset: float = 0.3,
    sweep: float = 0.075,
) -> SawGeometry:
    """Rhombs over arcs at angular offsets ±offset 2^-k from p with sweeps sweep 2^-k."""

    base = math.atan2(center.imag, center.real)
    arcs = []
    for k in range(count):
        side = 1.0 if k % 2 == 0 else -1.0
        mid = base + side * offset * 2.0**-k
        s = sweep * 2.0**-k
        arcs.append(CircArc(0j, 1.0, mid - 0.5 * s, s))
    return SawGeometry(tuple(rhombs_from_arcs(arcs, aspect)), ring_radius, center)


@dataclass(frozen=True)
class SawDecomposition:
    J: Union[complex, NDArray]
    J_l: Tuple[Union[complex, NDArray], ...]
    reconstruction: Union[complex, NDArray]
    error: float


def saw_cauchy_decomposition(
    geom: SawGeometry, f: Callable[[NDArray], ArrayLike], z: ArrayLike, rtol: float = 1e-13
) -> SawDecomposition:
    """f(z) = J(z) - sum_l J_l(z) with Cauchy integrals over the circle and the rhombs.

    Accepts a single point or an array of points.

    Raises:
        DomainError: If z is outside D(p, r) or inside a closed rhomb.
    """
    zs, scalar = _as_array(z)
    if np.any(np.abs(zs - geom.center) >= geom.ring_radius):
        raise DomainError("point is not inside D(p, r)")
    for i, rh in enumerate(geom.rhombs):
        if rh.contains(zs, closed=True).any():
            raise DomainError(f"point lies in rhomb {i}")

    def kernel(xi: NDArray) -> NDArray:
        fx = np.asarray(f(xi), dtype=complex)
        if fx.ndim == 0:
            fx = np.full(xi.shape, complex(fx))
        return fx[:, None] / (xi[:, None] - zs[None, :]) / (2j * math.pi)

    big = contour_integral(geom.circle, kernel, rtol=rtol)
    parts = [contour_integral(rh.contour(), kernel, rtol=rtol) for rh in geom.rhombs]
    J = np.asarray(big.value)
    J_l = [np.asarray(part.value) for part in parts]
    recon = J - (np.sum(J_l, axis=0) if J_l else 0.0)
    error = big.error + sum(part.error for part in parts)
    if scalar:
        return SawDecomposition(complex(J[0]), tuple(complex(v[0]) for v in J_l), complex(recon[0]), error)
    return SawDecomposition(J, tuple(J_l), recon, error)


def _projection_constants(geom: SawGeometry, points: NDArray) -> Tuple[NDArray, NDArray]:
    """Per rhomb: max |ξ - p| / |ξ' - p| and min |ξ - z| / |ξ' - p| (min over the points z)."""
    dec = geom.decomposition
    lam, kap = [], []
    for outer, inner in zip(dec.outer, dec.inner):
        xi = np.concatenate([outer.points, inner.points])
        proj = xi / np.abs(xi)
        base = np.abs(proj - geom.center)
        lam.append(float(np.max(np.abs(xi - geom.center) / base)))
        kap.append(float(np.min(np.abs(xi[:, None] - points[None, :]) / base[:, None])))
    return np.array(lam), np.array(kap)


def hoelder_tail_estimate(
    geom: SawGeometry, alpha: float, C_h: float, n: int, z: Optional[ArrayLike] = None
) -> float:
    """Bound on sum_{l >= n} |J_l(z)| for boundary values with |f(ξ)| <= C_h |ξ - p|**alpha.

    With ξ' the radial projection of ξ onto the circle,

        C' = C_h λ**alpha C_lip / (π κ),  λ = max |ξ - p| / |ξ' - p|,
        κ = min |ξ - z| / |ξ' - p|,  C_lip = Lipschitz constant of the chains,

    and the bound is C' times the integral of |e^{iφ} - 1|**(alpha - 1) over an
    arc of length L centred at p, L the total sweep of rhombs n, n+1, ...
    The integrand decreases away from p, so that arc dominates any other set
    of arcs with the same total length. Without z, the point
    p (1 - r / 2) on the radius through p is used.

    Raises:
        ParameterError: If alpha is not in (0, 1] or C_h <= 0.
    """
    if not 0 < alpha <= 1:
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha!r}")
    if not C_h > 0:
        raise ParameterError(f"Hölder constant must be positive, got {C_h!r}")
    if n >= len(geom.rhombs):
        return 0.0
    n = max(n, 0)
    pts = np.atleast_1d(
        np.asarray(z, dtype=complex) if z is not None else geom.center * (1.0 - 0.5 * geom.ring_radius)
    )
    lam, kap = _projection_constants(geom, pts)
    lipschitz = max(c for c, _ in geom.decomposition.per_rhomb[n:])
    length = sum(rh.arc.sweep if rh.arc is not None else _chord_sweep(rh) for rh in geom.rhombs[n:])
    c_prime = C_h * float(lam[n:].max()) ** alpha * lipschitz / (math.pi * float(kap[n:].min()))
    return c_prime * _arc_singular_integral(alpha, length)


def _chord_sweep(rh: Rhomb) -> float:
    return 2.0 * math.asin(min(1.0, 0.5 * abs(rh.corner_b - rh.corner_a)))


def _arc_singular_integral(alpha: float, length: float) -> float:
    """∫ |e^{iφ} - 1|^(alpha - 1) dφ over |φ| <= length / 2."""
    if alpha == 1:
        return length
    half = 0.5 * min(length, 2.0 * math.pi)
    # (2 sin(φ/2))^(alpha-1) = φ^(alpha-1) * sinc(φ / 2π)^(alpha-1)
    value, _ = quad(
        lambda phi: np.sinc(phi / (2.0 * math.pi)) ** (alpha - 1.0), 0.0, half, weight="alg", wvar=(alpha - 1.0, 0.0)
    )
    return 2.0 * value


@dataclass(frozen=True)
class SawFunction:
    """Function on the saw domains given by its values on the contours."""

    geometry: SawGeometry
    boundary: Callable[[NDArray], ArrayLike]

    def __call__(self, z: ArrayLike):
        return saw_cauchy_decomposition(self.geometry, self.boundary, z).reconstruction

    def approximants(self, bound: float, alpha: Optional[float] = None, C_h: float = 1.0) -> ApproximantSeq:
        """F_n = J - sum_{l < n} J_l, analytic off the first n rhombs."""
        geom = self.geometry

        def generator(n: int) -> Approximant:
            def F(z, n=n):
                dec = saw_cauchy_decomposition(geom, self.boundary, z)
                return np.asarray(dec.J) - sum((np.asarray(v) for v in dec.J_l[:n]), np.zeros_like(np.asarray(dec.J)))

            return Approximant(F, tuple(geom.rhombs[:n]))

        tail = (lambda n: hoelder_tail_estimate(geom, alpha, C_h, n)) if alpha is not None else None
        return ApproximantSeq(generator, tuple(range(len(geom.rhombs) + 1)), bound, self.__call__, tail, "saw")


FineFunction = Union[BorelSeriesFn, CauchyTransformFn, SqrtBranchSumFn, EntireFn, SawFunction]
