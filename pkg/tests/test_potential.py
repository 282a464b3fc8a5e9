"""
Tests for logarithmic-potential certificates, thin unions and pushforwards.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finelab.errors import (
    CircleSelectionError,
    ConstructionError,
    DomainError,
    GeometryError,
    NormalizationError,
    ParameterError,
    PreconditionError,
)
from finelab.geometry import Disk, DiskUnion, disk_cloud, union_cloud
from finelab.potential import (
    INCONCLUSIVE,
    THIN_CERTIFIED,
    DiscreteMeasure,
    LogAtom,
    LogPotentialCertificate,
    ThinSetSpec,
    build_thin_union,
    estimate_lipschitz_constants,
    eval_log_potential,
    lipschitz_push,
    normalize_certificate,
    sublevel_set,
    thinness_report,
)

small = st.floats(min_value=-0.3, max_value=0.3, allow_nan=False)
near_origin = st.builds(complex, small, small)


def single_atom(point=1.0, weight=1.0, scale=0.5):
    return LogPotentialCertificate((LogAtom(point, weight, scale),))


def circle_spiral(count):
    """Points outside the unit disk accumulating on the whole circle."""
    return [(1.0 + 0.5 / n) * complex(np.exp(1j * n)) for n in range(1, count + 1)]


class TestCertificates:
    """Evaluation of logarithmic potentials."""

    def test_on_atom_circle(self):
        """Test |z - p0| = rho gives 0."""
        assert eval_log_potential(single_atom(), 1.5) == 0.0

    def test_at_atom(self):
        """Test the value is -inf at an atom."""
        assert eval_log_potential(single_atom(), 1.0) == -math.inf

    def test_symmetric_pair(self):
        """Test atoms at ±1 with unit scales vanish at 0."""
        cert = LogPotentialCertificate((LogAtom(1, 1, 1), LogAtom(-1, 1, 1)))
        assert cert(0) == pytest.approx(0.0, abs=1e-15)

    def test_vectorized(self):
        """Test array input keeps its shape."""
        values = single_atom()(np.array([[1.5, 2.0], [0.5, 1.0]]))
        assert values.shape == (2, 2)
        assert values[1, 1] == -math.inf
        assert values[0, 1] == pytest.approx(math.log(2.0))

    def test_affine_moves(self):
        """Test shifted and scaled certificates."""
        cert = single_atom()
        assert cert.shifted(-0.5)(2.0) == pytest.approx(math.log(2.0) - 0.5)
        assert cert.scaled(3.0)(2.0) == pytest.approx(3.0 * math.log(2.0))
        assert LogPotentialCertificate.constant(-0.25)(7.0) == -0.25

    def test_validation(self):
        """Test non-positive weights, scales and non-finite offsets."""
        with pytest.raises(ParameterError):
            LogAtom(1, 0.0, 1)
        with pytest.raises(ParameterError):
            LogAtom(1, 1, -1)
        with pytest.raises(ParameterError):
            LogPotentialCertificate((), scale=0.0)
        with pytest.raises(ParameterError):
            LogPotentialCertificate((), offset=math.inf)

    @given(st.permutations(range(5)), near_origin)
    @settings(max_examples=50, deadline=None)
    def test_reordering_invariance(self, order, z):
        """Test the sum does not depend on the atom order."""
        atoms = [LogAtom(2 * np.exp(1j * k), 0.1 * (k + 1), 0.5 + 0.1 * k) for k in range(5)]
        a = LogPotentialCertificate(tuple(atoms))
        b = LogPotentialCertificate(tuple(atoms[i] for i in order))
        assert a(z) == pytest.approx(b(z), abs=1e-12)

    @given(st.floats(min_value=0.01, max_value=100.0), near_origin)
    @settings(max_examples=50, deadline=None)
    def test_radius_scaling_shift(self, t, z):
        """Test scaling every rho by t shifts by -(sum a) log t * scale."""
        cert = LogPotentialCertificate((LogAtom(1.5, 0.3, 0.2), LogAtom(-2j, 0.7, 0.4)), offset=0.1, scale=1.7)
        moved = cert.with_radii_scaled(t)
        expected = cert(z) - cert.total_weight * math.log(t) * cert.scale
        assert moved(z) == pytest.approx(expected, abs=1e-12)

    def test_bounds_on_disks(self):
        """Test interval bounds enclose sampled values."""
        cert = LogPotentialCertificate((LogAtom(1, 1, 0.5), LogAtom(-1, 0.5, 1)))
        disk = Disk(0.2 + 0.3j, 0.1)
        lb, ub = cert.bounds_on_disks(np.array([disk.center]), np.array([disk.radius]))
        values = cert(disk_cloud(disk, 200))
        assert lb[0] <= values.min()
        assert values.max() <= ub[0]


class TestThinSetSpec:
    """Invariants of ThinSetSpec."""

    def test_target_in_union(self):
        """Test the target may not lie in U."""
        with pytest.raises(DomainError):
            ThinSetSpec(1, DiskUnion((Disk(1, 0.1),)), LogPotentialCertificate())

    def test_certificate_finite_at_target(self):
        """Test -inf at the target is rejected."""
        with pytest.raises(DomainError):
            ThinSetSpec(1, DiskUnion(), single_atom(point=1.0))

    def test_near_disks(self):
        """Test disks within twice the ambient radius."""
        union = DiskUnion((Disk(1.5, 0.1), Disk(3, 0.1)))
        spec = ThinSetSpec(1, union, LogPotentialCertificate(), ambient_radius=0.5)
        assert len(spec.near_disks) == 1


class TestBuildThinUnion:
    """The thin-union recipe."""

    def test_single_point(self):
        """Test p1 = 2: r1 = rho1 exp(-1/a1) and cert < -1 on D(2, r1)."""
        spec = build_thin_union([2.0], 1.0)
        (atom,) = spec.certificate.atoms
        assert atom.scale == pytest.approx(0.5)
        assert atom.weight == pytest.approx(0.5 / math.log(8.0 / 0.5))
        (disk,) = spec.union.disks
        assert disk.radius == pytest.approx(0.5 * math.exp(-1.0 / atom.weight))
        cloud = disk_cloud(disk, 500, seed=9)
        assert np.all(spec.certificate(cloud) < -1.0)
        assert spec.certificate(1.0) >= 0.0

    def test_empty(self):
        """Test no points gives an empty union, trivially thin."""
        spec = build_thin_union([], 1j)
        assert len(spec.union) == 0
        assert thinness_report(spec).verdict == THIN_CERTIFIED

    def test_nonnegative_outside_protective_disks(self):
        """Test cert >= 0 outside every D(p_n, rho_n)."""
        spec = build_thin_union(circle_spiral(8), 1.0)
        rho = np.array(spec.diagnostics["protective_radii"])
        pts = spec.certificate.points
        cloud = disk_cloud(Disk(0, 3), 4000, seed=2)
        outside = np.all(np.abs(cloud[:, None] - pts[None, :]) >= rho[None, :], axis=1)
        assert np.all(spec.certificate(cloud[outside]) >= -1e-12)

    def test_spiral_is_thin(self):
        """Test 40 points accumulating on the circle pass the thinness check."""
        spec = build_thin_union(circle_spiral(40), 1.0)
        report = thinness_report(spec)
        assert report.certified
        assert report.value_at_target > -1.0 / 12.0
        assert report.sup_on_union < -1.0

    def test_underflow_dropped(self):
        """Test radii below double precision are dropped but their atoms stay."""
        spec = build_thin_union(circle_spiral(40), 1.0)
        assert spec.diagnostics["dropped"]
        assert len(spec.certificate.atoms) == 40
        assert len(spec.union) == 40 - len(spec.diagnostics["dropped"])

    def test_depth(self):
        """Test depth truncates the point list."""
        spec = build_thin_union(circle_spiral(10), 1.0, depth=3)
        assert len(spec.certificate.atoms) == 3

    def test_point_inside_disk(self):
        """Test |p_n| <= 1 names the point."""
        with pytest.raises(DomainError) as info:
            build_thin_union([2.0, 0.5], 1.0)
        assert "point 1" in str(info.value)

    def test_coinciding_points(self):
        """Test duplicate accumulation points."""
        with pytest.raises(GeometryError):
            build_thin_union([2.0, 2.0], 1.0)

    def test_target_off_circle(self):
        """Test the target must lie on the unit circle."""
        with pytest.raises(DomainError):
            build_thin_union([2.0], 0.5)

    def test_budget_exhausted(self, monkeypatch):
        """Test a failing sampled check reports diagnostics after the budget."""
        monkeypatch.setattr("finelab.potential.NORMALIZED_ON_UNION", -1e300)
        with pytest.raises(ConstructionError) as info:
            build_thin_union([2.0], 1.0, budget=2)
        assert info.value.diagnostics["failing"] == [0]


class TestNormalization:
    """Affine normalization around p."""

    def test_already_normalized(self):
        """Test a certificate meeting every condition at rho = 0.1 is returned unchanged."""
        cert = LogPotentialCertificate.constant(-0.01)
        out, rho = normalize_certificate(cert, 1.0, DiskUnion(), schedule=[0.1, 0.05])
        assert out is cert
        assert rho == 0.1

    def test_empty_union_shift(self):
        """Test U = ∅ needs only a constant shift."""
        out, rho = normalize_certificate(LogPotentialCertificate.constant(0.5), 1.0, DiskUnion())
        assert out.scale == 1.0
        assert -1.0 / 12.0 < out(1.0) < 0.0

    def test_single_atom_closed_form(self):
        """Test the single-atom spec: scale 1, offset -(M + delta) with M = a log 2.2."""
        spec = build_thin_union([2.0], 1.0)
        (atom,) = spec.certificate.atoms
        out, rho = normalize_certificate(spec.certificate, 1.0, spec.union, schedule=[0.1])
        a = atom.weight
        M = a * math.log(1.1 / 0.5)
        u_p = a * math.log(1.0 / 0.5)
        delta = 0.01 * (M - u_p) + 1e-12
        assert rho == 0.1
        assert out.scale == 1.0
        assert out.offset == pytest.approx(-(M + delta), rel=1e-9)
        grid = disk_cloud(Disk(1.0, 0.1), 2000, seed=5)
        assert np.all(out(grid) < 0.0)
        assert out(1.0) > -1.0 / 12.0

    def test_normalized_spec_passes_thinness(self):
        """Test the restricted ThinSetSpec built from the output is still thin."""
        spec = build_thin_union([2.0], 1.0)
        out, rho = normalize_certificate(spec.certificate, 1.0, spec.union)
        assert thinness_report(spec.restricted(out, rho)).certified

    def test_circle_selection(self):
        """Test every circle in the schedule meeting U."""
        union = DiskUnion((Disk(1.1, 0.01), Disk(1.05, 0.01)))
        with pytest.raises(CircleSelectionError) as info:
            normalize_certificate(LogPotentialCertificate.constant(-0.5), 1.0, union, schedule=[0.1, 0.05])
        assert info.value.step == "circle-selection"

    def test_empty_scale_window(self):
        """Test a certificate that cannot separate U from p."""
        union = DiskUnion((Disk(1.05, 0.01),))
        with pytest.raises(NormalizationError):
            normalize_certificate(LogPotentialCertificate.constant(0.0), 1.0, union, schedule=[0.1])

    def test_infinite_at_p(self):
        """Test a certificate with an atom at p."""
        with pytest.raises(PreconditionError):
            normalize_certificate(single_atom(point=1.0), 1.0, DiskUnion())


class TestSublevelSets:
    """Disk covers of sublevel sets."""

    def test_single_atom_disk(self):
        """Test {log|z| < -1/12} is covered by about D(0, e^{-1/12})."""
        cert = LogPotentialCertificate((LogAtom(0, 1, 1),))
        cover = sublevel_set(cert, -1.0 / 12.0, Disk(0, 2), resolution=64)
        exact = math.exp(-1.0 / 12.0)
        inner = disk_cloud(Disk(0, exact), 500, seed=1, shrink=0.98)
        assert np.all(cover.contains(inner, closed=True))
        reach = np.abs(cover.centers) + cover.radii
        assert reach.max() <= exact + 2 * math.sqrt(2) * 2.0 / 64 + 1e-12

    def test_minus_infinity(self):
        """Test threshold -inf gives the empty union."""
        assert len(sublevel_set(single_atom(), -math.inf, Disk(0, 1))) == 0

    @pytest.mark.parametrize("threshold", [math.inf, math.nan])
    def test_non_finite_threshold(self, threshold):
        """Test +inf and nan thresholds."""
        with pytest.raises(ParameterError):
            sublevel_set(single_atom(), threshold, Disk(0, 1))

    def test_two_atoms_against_scan(self):
        """Test every scanned point below the threshold is covered."""
        cert = LogPotentialCertificate((LogAtom(0.3, 1, 0.5), LogAtom(-0.4j, 0.5, 0.3)))
        region = Disk(0, 1)
        cover = sublevel_set(cert, -0.5, region, resolution=32)
        axis = np.linspace(-1, 1, 128)
        grid = (axis[None, :] + 1j * axis[:, None]).ravel()
        grid = grid[region.contains(grid)]
        below = grid[cert(grid) < -0.5]
        assert below.size > 0
        assert np.all(cover.contains(below, closed=True))

    def test_monotone_in_threshold(self):
        """Test a lower threshold gives a cover inside the higher one."""
        cert = LogPotentialCertificate((LogAtom(0.3, 1, 0.5), LogAtom(-0.4j, 0.5, 0.3)))
        low = sublevel_set(cert, -1.0, Disk(0, 1), resolution=32)
        high = sublevel_set(cert, -0.2, Disk(0, 1), resolution=32)
        samples = union_cloud(low, 16, seed=4)
        assert samples.size > 0
        assert np.all(high.contains(samples, closed=True))


class TestPushforward:
    """Pushforward inequalities for discrete measures."""

    def test_doubling_is_tight(self):
        """Test T(z) = 2z with a unit atom at 1: both margins vanish."""
        mu = DiscreteMeasure(((1.0, 1.0),))
        report = lipschitz_push(mu, lambda z: 2 * z, 2.0, 2.0, [0.5j, -0.3, 2 + 1j])
        assert report.passed
        assert report.upper_margins == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)
        assert report.lower_margin == pytest.approx(0.0, abs=1e-12)
        assert report.pushed.locations.tolist() == [2.0]

    @given(st.lists(st.tuples(near_origin, st.floats(min_value=0.1, max_value=3.0)), min_size=1, max_size=5))
    @settings(max_examples=50, deadline=None)
    def test_identity_zero_margins(self, atoms):
        """Test the identity map gives zero margins for any measure."""
        mu = DiscreteMeasure(tuple(atoms))
        report = lipschitz_push(mu, lambda z: z, 1.0, 1.0, [0.9, 0.8j])
        assert report.passed
        assert np.all(np.abs(report.upper_margins) <= 1e-10)

    def test_measured_constants(self):
        """Test T(z) = z + 0.1 z^2 with constants measured on the points."""
        rng = np.random.default_rng(3)
        atoms = tuple((complex(*rng.uniform(-0.3, 0.3, 2)), float(rng.uniform(0.5, 2))) for _ in range(3))
        mu = DiscreteMeasure(atoms)
        tests = rng.uniform(-0.3, 0.3, 40) + 1j * rng.uniform(-0.3, 0.3, 40)

        def T(z):
            return z + 0.1 * z**2

        C, c = estimate_lipschitz_constants(T, np.concatenate([tests, mu.locations]))
        report = lipschitz_push(mu, T, C, c, tests)
        assert report.passed
        assert np.all(report.upper_margins >= -1e-10)
        assert report.lower_margin >= -1e-10

    def test_lipschitz_violation(self):
        """Test a constant that is too small is rejected with a witness pair."""
        mu = DiscreteMeasure(((1.0, 1.0),))
        with pytest.raises(PreconditionError) as info:
            lipschitz_push(mu, lambda z: 2 * z, 1.5, 1.0, [0.5])
        assert len(info.value.witness) == 2

    def test_expansion_violation(self):
        """Test c larger than the true expansion."""
        mu = DiscreteMeasure(((1.0, 1.0),))
        with pytest.raises(PreconditionError):
            lipschitz_push(mu, lambda z: 0.5 * z, 1.0, 1.0, [0.5])

    def test_origin_moved(self):
        """Test T must fix the origin."""
        mu = DiscreteMeasure(((1.0, 1.0),))
        with pytest.raises(PreconditionError):
            lipschitz_push(mu, lambda z: z + 1, 1.0, 1.0, [0.5])

    def test_bad_constants(self):
        """Test non-positive constants."""
        mu = DiscreteMeasure(((1.0, 1.0),))
        with pytest.raises(ParameterError):
            lipschitz_push(mu, lambda z: z, 0.0, 1.0, [0.5])

    def test_measure_validation(self):
        """Test empty measures and non-positive masses."""
        with pytest.raises(ParameterError):
            DiscreteMeasure(())
        with pytest.raises(ParameterError):
            DiscreteMeasure(((0, -1.0),))
        assert DiscreteMeasure(((0, 1.0), (1, 2.5))).total_mass == 3.5


class TestThinnessReport:
    """Verdicts of the thinness check."""

    def test_segment_is_inconclusive(self):
        """Test disks strung along a segment ending at p never pass."""
        disks = tuple(Disk(1 + 2.0**-k, 0.4 * 2.0**-k) for k in range(1, 14))
        union = DiskUnion(disks)
        for cert in (
            LogPotentialCertificate.constant(0.0),
            LogPotentialCertificate.constant(-2.0),
            LogPotentialCertificate((LogAtom(1.5, 1, 0.1),)),
        ):
            report = thinness_report(ThinSetSpec(1.0, union, cert))
            assert report.verdict == INCONCLUSIVE
            assert not report.certified

    def test_annulus_maxima_recorded(self):
        """Test one maximum per dyadic annulus."""
        spec = build_thin_union(circle_spiral(10), 1.0)
        report = thinness_report(spec, depth=5, per_annulus=64)
        assert len(report.annulus_maxima) == 5
