"""
Tests for exact and Monte Carlo harmonic measure, the fine-neighbourhood
bounds and the exterior decay.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import lil_matrix
from scipy.sparse.linalg import spsolve

from finelab.config import WoSConfig
from finelab.errors import (
    BoundConstructionError,
    DomainError,
    GeometryError,
    ParameterError,
    PreconditionError,
)
from finelab.geometry import CircArc, Disk, DiskUnion, Polygon, invert_disk
from finelab.harmonic import (
    MIN_ARC_SWEEP,
    QUARTER_DISK_LEVEL,
    Exhaustion,
    InvertedExterior,
    SlitDomain,
    arm_exhaustion,
    disk_arc_measure,
    exterior_hm_decay,
    fattened_arms,
    fine_quarter_bound,
    hm_disk_arc_exact,
    hm_lower_bound_check,
    hm_wos,
    propagation_bound,
    two_constant_bound,
)
from finelab.potential import LogPotentialCertificate
from finelab.walk import ArcTarget, OuterRemainder

UNIT = Disk(0, 1)
UPPER_HALF = CircArc(0, 1, 0.0, math.pi)


def wos(**overrides):
    values = {"seed": 2024, "samples": 20_000, "block_size": 2048}
    values.update(overrides)
    return WoSConfig(**values)


def inward_arc(p, rho, sweep=MIN_ARC_SWEEP):
    """Arc of |z - p| = rho facing the origin."""
    centre_angle = math.atan2(-p.imag, -p.real)
    return CircArc(p, rho, centre_angle - 0.5 * sweep, sweep)


def annulus_measure(outer: Disk, inner: Disk, w: complex) -> float:
    """Harmonic measure of the outer circle in outer minus inner (closed form)."""
    d = inner.center - outer.center
    u = d / abs(d) if abs(d) > 0 else 1.0
    dist = abs(d)
    S = (outer.radius**2 + dist**2 - inner.radius**2) / dist
    x_a, x_b = sorted(np.roots([1.0, -S, outer.radius**2]).real)

    def g(z):
        return abs((z - outer.center - x_a * u) / (z - outer.center - x_b * u))

    k1 = g(outer.center + outer.radius * u)
    k2 = g(inner.center + inner.radius * u)
    return math.log(g(w) / k2) / math.log(k1 / k2)


def finite_difference_measure(obstacle: Disk, z: complex, n: int = 80) -> float:
    """Five-point Dirichlet solve for the upper half circle in the unit disk minus one disk."""
    h = 2.0 / n
    axis = -1.0 + h * np.arange(n + 1)
    grid = axis[None, :] + 1j * axis[:, None]
    free = (np.abs(grid) < 1.0) & (np.abs(grid - obstacle.center) > obstacle.radius)
    index = -np.ones(grid.shape, dtype=int)
    index[free] = np.arange(int(free.sum()))
    A = lil_matrix((int(free.sum()), int(free.sum())))
    b = np.zeros(int(free.sum()))
    for i, j in zip(*np.nonzero(free)):
        k = index[i, j]
        A[k, k] = 4.0
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = i + di, j + dj
            if free[ni, nj]:
                A[k, index[ni, nj]] = -1.0
            elif abs(grid[ni, nj]) >= 1.0:
                b[k] += 1.0 if grid[ni, nj].imag > 0 else 0.0
    values = spsolve(A.tocsr(), b)
    i, j = int(round((z.imag + 1) / h)), int(round((z.real + 1) / h))
    return float(values[index[i, j]])


def random_disk_cases(n: int = 20, seed: int = 20261019):
    """Random disk, boundary arc and interior point triples from a fixed seed."""
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(n):
        disk = Disk(complex(*rng.uniform(-3.0, 3.0, 2)), float(rng.uniform(0.1, 5.0)))
        arc = CircArc(disk.center, disk.radius, float(rng.uniform(0.0, 2 * math.pi)), float(rng.uniform(0.3, 6.0)))
        z = disk.center + disk.radius * math.sqrt(rng.uniform(0.0, 0.81)) * np.exp(2j * math.pi * rng.uniform())
        cases.append((disk, arc, complex(z)))
    return cases


class TestExactMeasure:
    """Closed-form harmonic measure of boundary arcs."""

    def test_centre_five_twelfths(self):
        """Test an arc of length 5πρ/6 seen from the centre."""
        disk = Disk(0.3 + 0.1j, 0.2)
        arc = CircArc(disk.center, disk.radius, 1.0, MIN_ARC_SWEEP)
        assert hm_disk_arc_exact(disk, arc, disk.center) == pytest.approx(5.0 / 12.0, abs=1e-15)

    def test_full_circle(self):
        """Test the whole circle has measure 1."""
        arc = CircArc(0, 1, 0.0, 2 * math.pi)
        assert hm_disk_arc_exact(UNIT, arc, 0.4j) == 1.0

    def test_toward_midpoint(self):
        """Test half a circle seen from halfway toward its midpoint."""
        value = hm_disk_arc_exact(UNIT, UPPER_HALF, 0.5j)
        assert 0.5 < value < 1.0

    @given(st.floats(min_value=0.0, max_value=0.95), st.floats(min_value=0.0, max_value=2 * math.pi))
    @settings(max_examples=60, deadline=None)
    def test_complementary_arcs(self, r, angle):
        """Test an arc and its complement add up to 1."""
        z = r * complex(np.exp(1j * angle))
        lower = CircArc(0, 1, math.pi, math.pi)
        total = hm_disk_arc_exact(UNIT, UPPER_HALF, z) + hm_disk_arc_exact(UNIT, lower, z)
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_vectorized(self):
        """Test the array form agrees with the scalar form."""
        z = np.array([0.1, -0.2j, 0.5 + 0.5j])
        values = disk_arc_measure(UNIT, UPPER_HALF, z)
        assert values.tolist() == pytest.approx([hm_disk_arc_exact(UNIT, UPPER_HALF, w) for w in z])

    def test_point_outside(self):
        """Test points on or outside the circle."""
        with pytest.raises(DomainError):
            hm_disk_arc_exact(UNIT, UPPER_HALF, 1.0)

    def test_arc_off_circle(self):
        """Test an arc of a different circle."""
        with pytest.raises(GeometryError):
            hm_disk_arc_exact(UNIT, CircArc(0, 0.5, 0.0, 1.0), 0.0)


class TestSlitDomain:
    def test_obstacle_outside(self):
        """Test obstacles must lie inside the disk."""
        with pytest.raises(GeometryError):
            SlitDomain(UNIT, [Disk(0.9, 0.2)])

    def test_obstacles_meet(self):
        """Test obstacles must be pairwise disjoint."""
        with pytest.raises(GeometryError):
            SlitDomain(UNIT, [Disk(0.2, 0.2), Disk(-0.1, 0.15)])

    def test_disconnected(self):
        """Test a wall across the disk is caught by the flood fill."""
        wall = Polygon.fattened_segment(-0.99j, 0.99j, 0.2)
        with pytest.raises(GeometryError):
            SlitDomain(UNIT, [wall], check_connected=16)

    def test_contains(self):
        """Test membership excludes the closed obstacles."""
        domain = SlitDomain(UNIT, [Disk(0.5, 0.1)])
        assert domain.contains([0.0, 0.5, 0.6, 1.0]).tolist() == [True, False, False, False]


class TestWalkAgreement:
    """Walk-on-spheres against independent oracles."""

    def test_no_obstacles_matches_exact(self):
        """Test an arc of the disk against the closed form."""
        z = -0.4 + 0.3j
        est = hm_wos(SlitDomain(UNIT), ArcTarget(UPPER_HALF), z, wos())
        assert abs(est.value - hm_disk_arc_exact(UNIT, UPPER_HALF, z)) <= 4 * est.std_error

    @pytest.mark.slow
    @pytest.mark.parametrize("case", range(20))
    def test_random_disks_match_exact(self, case):
        """Test walks on random disks, arcs and points at 1e5 samples."""
        disk, arc, z = random_disk_cases()[case]
        est = hm_wos(SlitDomain(disk), ArcTarget(arc), z, wos(seed=1000 + case, samples=100_000))
        # 1e-3 absorbs the absorption-shell bias next to arc endpoints.
        assert abs(est.value - hm_disk_arc_exact(disk, arc, z)) <= 3 * est.std_error + 1e-3

    @pytest.mark.slow
    def test_finite_difference_cross_check(self):
        """Test a slit disk against a coarse Dirichlet solve."""
        obstacle = Disk(0.4, 0.15)
        z = -0.3 + 0j
        est = hm_wos(SlitDomain(UNIT, [obstacle]), ArcTarget(UPPER_HALF), z, wos(samples=40_000))
        assert abs(est.value - finite_difference_measure(obstacle, z)) <= 0.03 + 3 * est.std_error

    def test_disk_in_disk_after_inversion(self):
        """Test the inverted exterior of two disks against the annulus closed form."""
        K, obstacle, p = Disk(0, 0.5), Disk(2, 0.5), -1.5
        domain = InvertedExterior(K, [obstacle])
        inner = invert_disk(obstacle, 0)
        assert domain.outer.radius == pytest.approx(2.0)
        est = hm_wos(domain, OuterRemainder(), domain.to_w(p), wos())
        exact = annulus_measure(domain.outer, inner, complex(domain.to_w(p)))
        assert 0.0 < exact < 1.0
        assert abs(est.value - exact) <= 4 * est.std_error


class TestInvertedExterior:
    def test_centre_inside_K(self):
        """Test the inversion centre must be in K."""
        with pytest.raises(GeometryError):
            InvertedExterior(Disk(0, 0.5), z0=1.0)

    def test_obstacle_meets_K(self):
        """Test obstacles overlapping K."""
        with pytest.raises(DomainError):
            InvertedExterior(Disk(0, 0.5), [Disk(0.7, 0.3)])

    def test_polygon_distances_are_lower_bounds(self):
        """Test the conservative distance never exceeds the distance to the image boundary."""
        K = Polygon((-0.5 - 0.5j, 0.5 - 0.5j, 0.5 + 0.5j, -0.5 + 0.5j))
        arm = Polygon.fattened_segment(1.5, 3.0, 0.2)
        domain = InvertedExterior(K, [arm])
        boundary = np.concatenate(
            [domain.to_w(e.a + np.linspace(0, 1, 400) * (e.b - e.a)) for shape in (K, arm) for e in shape.edges]
        )
        rng = np.random.default_rng(0)
        z = 1.0 + rng.uniform(0.2, 3.0, 200) * np.exp(1j * rng.uniform(-2.5, 2.5, 200))
        z = z[~arm.contains(z) & ~K.contains(z)]
        w = domain.to_w(z)
        d, _ = domain.boundary_distances(w)
        true = np.min(np.abs(w[:, None] - boundary[None, :]), axis=1)
        assert np.all(d <= true + 1e-9)
        assert np.all(d > 0)


class TestExhaustion:
    def test_from_union(self):
        """Test concentric shrunken disks, one stage per fraction."""
        union = DiskUnion((Disk(0.5, 0.1), Disk(3, 0.1)))
        ex = Exhaustion.from_union(union, [0.5, 0.9], within=UNIT)
        assert len(ex) == 2
        assert [d.radius for d in ex[0]] == pytest.approx([0.05])
        assert [d.radius for d in ex[1]] == pytest.approx([0.09])

    def test_must_increase(self):
        """Test a later stage that does not cover the earlier one."""
        with pytest.raises(GeometryError):
            Exhaustion(((Disk(0, 0.5),), (Disk(0, 0.2),)))

    def test_arms_grow_toward_p(self):
        """Test arm stages are nested and reach closer each time."""
        ex = arm_exhaustion(0j, 4, 0.05, 1.0, 0.02, 3)
        assert len(ex) == 3
        tips = [min(float(np.min(np.abs(np.array(arm.vertices)))) for arm in stage) for stage in ex]
        assert tips == sorted(tips, reverse=True)
        assert len(fattened_arms(0j, 5, 0.1, 1.0, 0.02)) == 5


class TestLowerBoundCheck:
    """Margins of omega_slit - (omega_disk + U)."""

    def test_constant_shift_margin(self):
        """Test U = -0.01 without obstacles leaves a margin near 0.01."""
        report = hm_lower_bound_check(
            SlitDomain(UNIT), UPPER_HALF, LogPotentialCertificate.constant(-0.01), [0.0, 0.2j, -0.3], wos()
        )
        assert report.passed
        assert report.reliable
        assert np.mean(report.margins) == pytest.approx(0.01, abs=0.01)
        assert len(set(report.seeds)) == 3

    def test_small_far_obstacle(self):
        """Test a small obstacle away from the points and the arc."""
        domain = SlitDomain(UNIT, [Disk(-0.6j, 0.05)])
        cert = LogPotentialCertificate.constant(-0.05)
        report = hm_lower_bound_check(domain, UPPER_HALF, cert, [0.1j, 0.3 + 0.2j], wos())
        assert report.passed
        assert report.obstacles == domain.obstacles


class TestQuarterBound:
    """The quarter bound on V1."""

    P, RHO = 1.0 + 0j, 0.1

    def test_no_obstacles(self):
        """Test an empty exhaustion: only the exact minimum on the r1 circle."""
        J = inward_arc(self.P, self.RHO)
        result = fine_quarter_bound(
            self.P, self.RHO, DiskUnion(), LogPotentialCertificate.constant(-0.01), Exhaustion(), J, wos()
        )
        assert 0 < result.r1 < self.RHO
        assert result.minima == (result.disk_minimum,)
        assert result.disk_minimum >= QUARTER_DISK_LEVEL + 1e-6
        assert result.passed
        assert len(result.U1) == 0

    def test_small_obstacle_stage(self):
        """Test one stage with a tiny obstacle away from J."""
        J = inward_arc(self.P, self.RHO)
        stage = Exhaustion(((Disk(self.P + 0.07, 0.004),),))
        result = fine_quarter_bound(
            self.P,
            self.RHO,
            DiskUnion(),
            LogPotentialCertificate.constant(-0.01),
            stage,
            J,
            wos(samples=4000),
            v1_points=3,
        )
        assert len(result.stages) == 1
        assert result.passed
        assert min(result.minima) >= 0.25 - 3 * max(e.std_error for e in result.stages[0].estimates)

    def test_short_arc(self):
        """Test an arc of length πρ/6."""
        J = inward_arc(self.P, self.RHO, sweep=math.pi / 6)
        with pytest.raises(PreconditionError):
            fine_quarter_bound(
                self.P, self.RHO, DiskUnion(), LogPotentialCertificate.constant(-0.01), Exhaustion(), J, wos()
            )

    def test_arc_leaves_unit_disk(self):
        """Test an arc facing away from the origin."""
        J = CircArc(self.P, self.RHO, -0.5 * MIN_ARC_SWEEP, MIN_ARC_SWEEP)
        with pytest.raises(PreconditionError):
            fine_quarter_bound(
                self.P, self.RHO, DiskUnion(), LogPotentialCertificate.constant(-0.01), Exhaustion(), J, wos()
            )

    def test_arc_of_other_circle(self):
        """Test J must lie on |z - p| = rho."""
        J = inward_arc(self.P, 0.05)
        with pytest.raises(PreconditionError):
            fine_quarter_bound(
                self.P, self.RHO, DiskUnion(), LogPotentialCertificate.constant(-0.01), Exhaustion(), J, wos()
            )

    def test_no_radius_qualifies(self):
        """Test a schedule that never leaves the circle's neighbourhood."""
        J = inward_arc(self.P, self.RHO)
        with pytest.raises(BoundConstructionError) as info:
            fine_quarter_bound(
                self.P,
                self.RHO,
                DiskUnion(),
                LogPotentialCertificate.constant(-0.01),
                Exhaustion(),
                J,
                wos(),
                r1_schedule=[0.099],
            )
        assert info.value.step == "quarter-bound"


class TestClosedForms:
    """Two-constant and propagation bounds."""

    def test_two_constant(self):
        """Test eps = e^-8, C = e, omega = 1/4."""
        assert two_constant_bound(math.exp(-8), math.e, 0.25) == pytest.approx(-1.25, abs=1e-15)

    def test_two_constant_edges(self):
        """Test eps = 1 and omega = 1."""
        assert two_constant_bound(1.0, 4.0, 0.25) == pytest.approx(0.75 * math.log(4.0))
        assert two_constant_bound(0.5, 4.0, 1.0) == pytest.approx(math.log(0.5))

    def test_two_constant_ranges(self):
        """Test arguments outside their ranges."""
        with pytest.raises(ParameterError):
            two_constant_bound(0.0, 2.0, 0.25)
        with pytest.raises(ParameterError):
            two_constant_bound(0.5, 0.5, 0.25)
        with pytest.raises(ParameterError):
            two_constant_bound(0.5, 2.0, 0.0)

    @pytest.mark.parametrize("N, omega, expected", [(100, 0.25, -25.0), (0, 0.25, 0.0), (4, 0.3, -1.2)])
    def test_propagation(self, N, omega, expected):
        """Test -N omega."""
        assert propagation_bound(N, omega) == pytest.approx(expected, abs=1e-15)


class TestExteriorDecay:
    """Exterior harmonic measure of K over an exhaustion."""

    def test_without_stages(self):
        """Test an empty exhaustion gives h = 1."""
        report = exterior_hm_decay(Disk(-2, 0.5), Exhaustion(), 0j, wos(samples=2000))
        assert report.values == (1.0,)
        assert report.monotone

    def test_large_obstacle(self):
        """Test a big obstacle between p and K lowers h and keeps the sequence monotone."""
        stages = Exhaustion(((Disk(-1, 0.3),),))
        report = exterior_hm_decay(Disk(-2, 0.5), stages, 0j, wos(samples=5000), threshold=0.9)
        assert report.values[0] == 1.0
        assert report.values[1] < 1.0
        assert report.monotone
        assert report.decayed
        assert report.reliable

    def test_p_in_K(self):
        """Test p inside K."""
        with pytest.raises(DomainError):
            exterior_hm_decay(Disk(0, 0.5), Exhaustion(), 0.1, wos())

    def test_p_in_obstacle(self):
        """Test p inside an obstacle."""
        with pytest.raises(DomainError):
            exterior_hm_decay(Disk(-2, 0.5), Exhaustion(((Disk(0, 0.1),),)), 0j, wos(samples=1000))

    @pytest.mark.slow
    def test_arms_marching_to_p(self):
        """Test arms reaching p drive h below 0.1."""
        stages = arm_exhaustion(0j, 6, 0.05, 1.0, 0.02, 6)
        report = exterior_hm_decay(Disk(-2, 0.5), stages, 0j, wos(samples=100_000, seed=1234), threshold=0.1)
        assert report.monotone
        assert report.decayed
