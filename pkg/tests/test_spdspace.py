"""Tests for the symmetric space geometry and orbit extrinsic geometry."""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from modules.cartan import compatible_metric, conjugate_presentation, random_conjugator
from modules.catalog import semisimple_entries
from modules.errors import (
    BaseMismatchError,
    DegeneratePlaneError,
    NotNormalError,
    NotPositiveDefiniteError,
    NotTracelessError,
)
from modules.numerics import matrix_exp, symmetrize
from modules.spdspace import (
    SpdPoint,
    TangentVector,
    act,
    covariant_derivative_killing,
    curvature,
    distance,
    geodesic,
    killing_field,
    log_map,
    mean_curvature,
    metric,
    norm,
    normal_frame,
    orbit_frame,
    orbit_report,
    push_forward,
    random_normal_geodesic,
    second_fundamental_form,
    sectional_curvature,
    variational_f,
)

U2 = np.diag([1.0, -1.0])
V2 = np.array([[0.0, 1.0], [1.0, 0.0]])


def _random_point(rng, n):
    a = rng.standard_normal((n, n))
    return SpdPoint.normalized(a @ a.T + np.eye(n))


def _random_tangent(rng, point):
    n = point.n
    w = symmetrize(rng.standard_normal((n, n)))
    w -= np.trace(w) / n * np.eye(n)
    return TangentVector.at(point, point.sqrt @ w @ point.sqrt)


class TestPointsAndVectors:

    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefiniteError):
            SpdPoint(np.diag([1.0, -1.0]))

    def test_normalized_has_unit_determinant(self, rng):
        assert _random_point(rng, 4).det == pytest.approx(1.0, rel=1e-12)

    def test_tangent_must_preserve_determinant(self):
        with pytest.raises(NotTracelessError):
            TangentVector.at(SpdPoint.identity(2), np.eye(2))

    def test_arithmetic(self):
        p = SpdPoint.identity(2)
        u = TangentVector.at(p, U2)
        v = TangentVector.at(p, V2)
        np.testing.assert_allclose((u + 2 * v - u).U, 2 * V2)
        np.testing.assert_allclose((-u).U, -U2)

    def test_base_mismatch(self):
        u = TangentVector.at(SpdPoint.identity(2), U2)
        v = TangentVector.at(SpdPoint(np.diag([2.0, 0.5])), V2)
        with pytest.raises(BaseMismatchError):
            u + v


class TestMetricAndAction:

    def test_metric_at_identity_is_trace_form(self):
        p = SpdPoint.identity(2)
        u = TangentVector.at(p, U2)
        assert metric(p, u, u) == pytest.approx(2.0)
        assert norm(u) == pytest.approx(np.sqrt(2.0))

    def test_metric_is_invariant(self, rng):
        p = _random_point(rng, 3)
        u, v = _random_tangent(rng, p), _random_tangent(rng, p)
        g = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        gu, gv = push_forward(g, u), push_forward(g, v)
        assert metric(gu.base, gu, gv) == pytest.approx(metric(p, u, v), rel=1e-9)

    def test_action_preserves_determinant(self, rng):
        p = _random_point(rng, 3)
        g = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        assert act(g, p).det == pytest.approx(1.0, rel=1e-10)

    def test_killing_field_of_rotation_vanishes_at_identity(self):
        x = np.array([[0.0, -1.0], [1.0, 0.0]])
        np.testing.assert_allclose(killing_field(x, SpdPoint.identity(2)).U, np.zeros((2, 2)))

    def test_killing_field_requires_traceless(self):
        with pytest.raises(NotTracelessError):
            killing_field(np.eye(2), SpdPoint.identity(2))

    def test_killing_field_matches_group_action(self, rng):
        p = _random_point(rng, 3)
        x = rng.standard_normal((3, 3))
        x -= np.trace(x) / 3 * np.eye(3)
        h = 1e-6
        fd = (act(matrix_exp(h * x), p).P - act(matrix_exp(-h * x), p).P) / (2 * h)
        assert np.linalg.norm(fd - killing_field(x, p).U) <= 1e-6 * np.linalg.norm(fd)


class TestGeodesics:

    def test_diagonal_distance(self):
        p = SpdPoint.identity(2)
        q = SpdPoint(np.diag([np.e, 1.0 / np.e]))
        assert distance(p, q) == pytest.approx(np.sqrt(2.0))

    def test_endpoint_and_log(self, rng):
        p = _random_point(rng, 3)
        v = _random_tangent(rng, p)
        end = geodesic(p, v).evaluate(1.0)
        assert end.det == pytest.approx(1.0, rel=1e-10)
        np.testing.assert_allclose(log_map(p, end).U, v.U, atol=1e-9)
        assert distance(p, end) == pytest.approx(norm(v), rel=1e-9)

    def test_semigroup(self, rng):
        p = _random_point(rng, 3)
        v = _random_tangent(rng, p)
        a = geodesic(p, v).evaluate(2.0)
        b = geodesic(p, 2 * v).evaluate(1.0)
        np.testing.assert_allclose(a.P, b.P, rtol=1e-10, atol=1e-12)

    def test_velocity_has_constant_speed(self, rng):
        p = _random_point(rng, 3)
        v = _random_tangent(rng, p)
        gamma = geodesic(p, v)
        for t in (0.0, 0.5, 1.5):
            assert norm(gamma.velocity(t)) == pytest.approx(gamma.speed(), rel=1e-9)

    def test_base_checked(self, rng):
        v = TangentVector.at(SpdPoint.identity(2), U2)
        with pytest.raises(BaseMismatchError):
            geodesic(SpdPoint(np.diag([2.0, 0.5])), v)

    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_determinant_stays_one(self, rng, n):
        p = _random_point(rng, n)
        v = _random_tangent(rng, p)
        gamma = geodesic(p, v * (1.0 / norm(v)))
        for t in np.linspace(-5.0, 5.0, 21):
            assert abs(gamma.evaluate(t).det - 1.0) <= 1e-9


class TestCurvature:

    def test_identity_example(self):
        p = SpdPoint.identity(2)
        u, v = TangentVector.at(p, U2), TangentVector.at(p, V2)
        r = curvature(u, v, v)
        assert metric(p, r, u) == pytest.approx(-2.0)
        assert sectional_curvature(u, v) == pytest.approx(-0.5)

    def test_nonpositive_on_random_planes(self, rng):
        for k in range(500):
            n = 2 + k % 5
            p = _random_point(rng, n)
            u, v = _random_tangent(rng, p), _random_tangent(rng, p)
            assert sectional_curvature(u, v) <= 1e-12

    def test_invariant_under_action(self, rng):
        p = _random_point(rng, 3)
        u, v = _random_tangent(rng, p), _random_tangent(rng, p)
        g = rng.standard_normal((3, 3)) + 3 * np.eye(3)
        moved = sectional_curvature(push_forward(g, u), push_forward(g, v))
        assert moved == pytest.approx(sectional_curvature(u, v), rel=1e-8)

    def test_degenerate_plane(self):
        p = SpdPoint.identity(2)
        u = TangentVector.at(p, U2)
        with pytest.raises(DegeneratePlaneError):
            sectional_curvature(u, 3 * u)

    def test_covariant_derivative_is_antisymmetric_operator(self, rng):
        """Killing fields: <nabla_U X., V> = -<nabla_V X., U>."""
        p = _random_point(rng, 3)
        u, v = _random_tangent(rng, p), _random_tangent(rng, p)
        x = rng.standard_normal((3, 3))
        x -= np.trace(x) / 3 * np.eye(3)
        lhs = metric(p, covariant_derivative_killing(x, u), v)
        rhs = -metric(p, covariant_derivative_killing(x, v), u)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


class TestOrbitGeometry:

    @pytest.mark.parametrize("name", semisimple_entries())
    def test_totally_geodesic_at_compatible_point(self, catalog_split, name, rng):
        split = catalog_split(name)
        point = compatible_metric(split, rng=rng).base_point
        report = orbit_report(split, point)
        assert report.mean_curvature_norm <= 1e-9
        assert report.max_sff_norm <= 1e-9

    def test_orbit_dimensions(self, catalog_split):
        p = SpdPoint.identity(3)
        assert orbit_frame(catalog_split("sl3").g.basis, p).dimension == 5
        assert orbit_frame(catalog_split("so21-in-sl3").g.basis, p).dimension == 2
        assert orbit_frame(catalog_split("so3-in-sl3").g.basis, p).dimension == 0

    def test_orbit_frame_is_orthonormal(self, catalog_split, rng):
        p = _random_point(rng, 3)
        frame = orbit_frame(catalog_split("so21-in-sl3").g.basis, p)
        gram = np.array([[metric(p, TangentVector(p, a), TangentVector(p, b)) for b in frame.frame]
                         for a in frame.frame])
        np.testing.assert_allclose(gram, np.eye(frame.dimension), atol=1e-10)

    def test_off_minimum_orbit_is_curved(self, catalog_split):
        a = 1.3
        split = catalog_split("so21-in-sl3")
        point = SpdPoint(np.diag([a, a, a ** -2]))
        assert norm(mean_curvature(split, point)) > 1e-3

    def test_second_fundamental_form_is_normal_and_symmetric(self, catalog_split, rng):
        split = catalog_split("so21-in-sl3")
        p = _random_point(rng, 3)
        frame = orbit_frame(split.g.basis, p)
        ii_12 = second_fundamental_form(split, p, 1, 2)
        ii_21 = second_fundamental_form(split, p, 2, 1)
        np.testing.assert_allclose(ii_12.U, ii_21.U, atol=1e-9)
        np.testing.assert_allclose(frame.tangent_part(ii_12.U), np.zeros((3, 3)), atol=1e-9)

    def test_normal_frame(self, catalog_split):
        split = catalog_split("sl2-block-in-sl3")
        p = SpdPoint.identity(3)
        normals = normal_frame(split, p)
        assert len(normals) == 3
        frame = orbit_frame(split.g.basis, p)
        for v in normals:
            assert norm(v) == pytest.approx(1.0)
            np.testing.assert_allclose(frame.tangent_part(v.U), np.zeros((3, 3)), atol=1e-10)

    def test_full_orbit_has_no_normal_geodesic(self, catalog_split, rng):
        assert random_normal_geodesic(catalog_split("sl3"), SpdPoint.identity(3), rng) is None


class TestVariationalFunction:

    @pytest.fixture
    def so21_geodesic(self, catalog_split, rng):
        split = catalog_split("so21-in-sl3")
        gamma = random_normal_geodesic(split, SpdPoint.identity(3), rng)
        return split, gamma

    def test_identity_and_sign(self, so21_geodesic):
        split, gamma = so21_geodesic
        assert gamma.speed() == pytest.approx(1.0)
        for x in split.g.basis:
            samples = variational_f(split, x, gamma, (0.0, 0.25, 0.5, 0.75, 1.0))
            assert abs(samples[0].f) <= 1e-9
            for s in samples:
                assert s.identity_residual <= 1e-5
                assert s.curvature_term >= -1e-12
                assert s.nabla_term >= 0.0
                assert s.f_dot_fd >= -1e-7
                assert s.normality_residual <= 1e-6

    def test_f_is_nondecreasing(self, so21_geodesic):
        split, gamma = so21_geodesic
        samples = variational_f(split, split.g.basis[1], gamma, (0.0, 0.5, 1.0, 1.5))
        values = [s.f for s in samples]
        assert all(b >= a - 1e-10 for a, b in zip(values, values[1:]))

    def test_tangent_direction_rejected(self, catalog_split):
        split = catalog_split("so21-in-sl3")
        p = SpdPoint.identity(3)
        y = split.p_basis[0]
        gamma = geodesic(p, TangentVector.at(p, 2 * y))
        with pytest.raises(NotNormalError):
            variational_f(split, y, gamma, (0.0,))

    def test_sample_serialization(self, so21_geodesic):
        split, gamma = so21_geodesic
        row = variational_f(split, split.g.basis[0], gamma, (0.5,))[0].to_dict()
        assert set(row) == {"t", "f", "f_dot_fd", "curvature_term", "nabla_term",
                            "identity_residual", "normality_residual"}


def _conjugated(catalog_split, name, seed):
    split = catalog_split(name)
    rng = np.random.default_rng(seed)
    return conjugate_presentation(random_conjugator(split.n, rng), split)


def _block_normal_geodesic():
    """Unit-speed geodesic from I along diag(1, 1, -2)."""
    p = SpdPoint.identity(3)
    return geodesic(p, TangentVector.at(p, np.diag([1.0, 1.0, -2.0]) / np.sqrt(6.0)))


class TestVanishingKillingFields:
    """Fields that vanish at P contribute no orbit or normal directions."""

    @pytest.mark.parametrize("seed", range(5))
    def test_compact_orbit_is_a_point(self, catalog_split, seed):
        split = catalog_split("so3-in-sl3")
        point = compatible_metric(split, rng=np.random.default_rng(seed)).base_point
        report = orbit_report(split, point)
        assert report.orbit_dimension == 0
        assert report.mean_curvature_norm == 0.0
        assert report.max_sff_norm == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_conjugated_compact_orbit_is_a_point(self, catalog_split, seed):
        split = _conjugated(catalog_split, "so3-in-sl3", seed)
        point = compatible_metric(split, rng=np.random.default_rng(seed)).base_point
        report = orbit_report(split, point)
        assert report.orbit_dimension == 0
        assert report.mean_curvature_norm <= 1e-12
        assert len(normal_frame(split, point)) == 5

    @pytest.mark.parametrize("seed", range(5))
    def test_conjugated_full_orbit_has_no_normals(self, catalog_split, seed):
        split = _conjugated(catalog_split, "sl3", seed)
        point = compatible_metric(split, rng=np.random.default_rng(seed)).base_point
        assert orbit_frame(split.g.basis, point).dimension == 5
        assert normal_frame(split, point) == []
        assert random_normal_geodesic(split, point, np.random.default_rng(seed)) is None

    def test_isotropy_directions_are_dropped(self, catalog_split):
        """so(2,1): the rotation generator fixes its compatible point, the two boosts do not."""
        split = _conjugated(catalog_split, "so21-in-sl3", 4)
        point = compatible_metric(split, rng=np.random.default_rng(4)).base_point
        assert orbit_frame(split.g.basis, point).dimension == 2
        assert len(normal_frame(split, point)) == 3


class TestNormalGeodesics:

    def test_normality_propagates(self, catalog_split):
        split = _conjugated(catalog_split, "so21-in-sl3", 2)
        foot = compatible_metric(split, rng=np.random.default_rng(2)).base_point
        gamma = random_normal_geodesic(split, foot, np.random.default_rng(9))
        basis = split.g.basis / np.linalg.norm(split.g.basis.reshape(split.g.d, -1), axis=1)[:, None, None]
        for t in np.linspace(-2.0, 2.0, 9):
            vel = gamma.velocity(t)
            for x in basis:
                assert abs(metric(vel.base, killing_field(x, vel.base), vel)) <= 1e-7

    def test_minimal_orbits_along_the_slice_are_totally_geodesic(self, catalog_split):
        split = catalog_split("sl2-block-in-sl3")
        gamma = _block_normal_geodesic()
        for t in (-1.0, 0.5, 1.0, 2.0):
            report = orbit_report(split, gamma.evaluate(t))
            assert report.mean_curvature_norm <= 1e-9
            assert report.max_sff_norm <= 1e-6

    def test_f_and_nabla_vanish_along_the_slice(self, catalog_split):
        split = catalog_split("sl2-block-in-sl3")
        gamma = _block_normal_geodesic()
        for x in split.g.basis:
            for s in variational_f(split, x, gamma, (0.0, 0.5, 1.0)):
                assert abs(s.f) <= 1e-8
                assert s.nabla_term <= 1e-8

    def test_not_normal_is_a_numerical_failure(self, catalog_split):
        split = catalog_split("so21-in-sl3")
        p = SpdPoint.identity(3)
        gamma = geodesic(p, TangentVector.at(p, split.p_basis[0]))
        with pytest.raises(NotNormalError) as exc_info:
            variational_f(split, split.p_basis[0], gamma, (0.0,))
        assert exc_info.value.exit_code == 2


class TestVariationalAcrossCatalog:
    """f(0) = 0, f' >= 0 and the derivative identity on 10 seeded normal geodesics."""

    @pytest.mark.parametrize("name", semisimple_entries())
    @pytest.mark.parametrize("seed", [None, 1, 2])
    def test_ten_geodesics(self, catalog_split, name, seed):
        split = catalog_split(name) if seed is None else _conjugated(catalog_split, name, seed)
        foot = compatible_metric(split, rng=np.random.default_rng(0)).base_point
        geodesic_rng = np.random.default_rng(17)
        for _ in range(10):
            gamma = random_normal_geodesic(split, foot, geodesic_rng)
            if gamma is None:
                assert name in {"sl2", "sl3"}
                assert normal_frame(split, foot) == []
                return
            for x in split.g.basis:
                samples = variational_f(split, x, gamma, (0.0, 0.25, 0.5, 0.75, 1.0))
                assert abs(samples[0].f) <= 1e-9
                for s in samples:
                    assert s.identity_residual <= 1e-5
                    assert s.f_dot_fd >= -1e-9
