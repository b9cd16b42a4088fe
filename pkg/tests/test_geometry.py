import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from reinhardt.errors import StarViolation
from reinhardt.extremals import octagon_density_closed_form
from reinhardt.geometry import (
    MIDPOINTS, density_bound, density_report, exclusion_test, hexagon_from_point,
    hexagon_vertices_two_ways, triangle_areas,
)
from reinhardt.sl2core import HalfPlanePoint, J_VEC, vec_to_matrix

from conftest import random_star_points, star_points

SQRT3 = math.sqrt(3.0)


def test_regular_hexagon_at_i():
    hexagon = hexagon_from_point(HalfPlanePoint(0.0, 1.0))
    expected = MIDPOINTS + (1 / SQRT3) * (vec_to_matrix(J_VEC) @ MIDPOINTS.T).T
    np.testing.assert_allclose(hexagon.vertices, expected, atol=1e-14)
    radii = np.linalg.norm(hexagon.vertices, axis=1)
    np.testing.assert_allclose(radii, 2 / SQRT3, atol=1e-14)


@given(star_points())
def test_hexagon_invariants(z):
    fwd, back = hexagon_vertices_two_ways(z)
    scale = max(1.0, np.abs(fwd).max())
    np.testing.assert_allclose(fwd, back, atol=1e-10 * scale)
    hexagon = hexagon_from_point(z)
    assert hexagon.area() == pytest.approx(math.sqrt(12.0), rel=1e-10)
    np.testing.assert_allclose(hexagon.vertices[3:], -hexagon.vertices[:3], atol=1e-10 * scale)
    mids = hexagon.midpoints()
    gaps = np.linalg.norm(mids[:, None, :] - MIDPOINTS[None, :, :], axis=2).min(axis=1)
    assert gaps.max() < 1e-10 * scale


def test_hexagon_requires_star_point():
    with pytest.raises(StarViolation):
        hexagon_from_point(HalfPlanePoint(0.5, 0.1))
    with pytest.raises(StarViolation):
        density_report(HalfPlanePoint(0.9, 1.0))


def test_density_at_cusp_height():
    delta = density_bound(HalfPlanePoint(0.0, 4.5))
    assert delta == pytest.approx(0.9059, abs=1e-3)
    assert delta > octagon_density_closed_form()


def test_center_has_no_bulge():
    report = density_report(HalfPlanePoint(0.0, 1.0))
    assert report.indicators == (False, False, False)
    assert report.delta == pytest.approx(0.75, abs=1e-15)
    np.testing.assert_allclose(report.T, SQRT3 / 12, atol=1e-15)
    np.testing.assert_allclose(report.Text, SQRT3 / 3, atol=1e-15)


@given(star_points())
def test_report_invariants(z):
    report = density_report(z)
    assert sum(report.T) == pytest.approx(SQRT3 / 4, abs=1e-10)
    assert min(report.T) >= 0 and min(report.Text) >= 0
    for a, t, te, flag in zip(report.area_i, report.T, report.Text, report.indicators):
        assert flag == (t >= te)
        if flag:
            assert a >= -1e-15


def test_never_all_three_indicators(rng):
    zs = random_star_points(rng, 100_000, y_max=50.0)
    for z in zs[:2000]:
        assert not all(density_report(HalfPlanePoint(z.real, z.imag)).indicators)
    # Vectorized form of the same check on the full sample.
    x, y = zs.real, zs.imag
    a, b, c = x / y, -(x * x + y * y) / y, 1 / y
    r0, r1, r2 = (c + SQRT3 * a) / SQRT3, (c - SQRT3 * a) / SQRT3, -(3 * b + c) / (2 * SQRT3)
    t = np.array([r0 * r2 / 4, r0 * r1 / 4, r1 * r2 / 4])
    te = np.array([r1 * r1, r2 * r2, r0 * r0])
    assert not np.any(np.all(t >= te, axis=0))


def area0(x, y):
    return density_report(HalfPlanePoint(x, y)).area_i[0]


@given(st.floats(1.0, 4.5), st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_area0_monotone_in_x(y, x1, x2):
    lo, hi = sorted((x1, x2))
    if hi >= 1 / SQRT3:
        return
    report_lo = density_report(HalfPlanePoint(lo, y))
    report_hi = density_report(HalfPlanePoint(hi, y))
    bump = lambda r: r.area_i[0] if r.indicators[0] else 0.0
    assert bump(report_hi) >= bump(report_lo) - 1e-12


@given(star_points())
def test_area_reflection_symmetry(z):
    here = density_report(z).area_i
    mirrored = density_report(HalfPlanePoint(-z.x, z.y)).area_i
    assert here[2] == pytest.approx(mirrored[0], rel=1e-9, abs=1e-12)


def test_exclusion_examples():
    delta_oct = octagon_density_closed_form()
    assert exclusion_test(HalfPlanePoint(0.0, 5.0), delta_oct)
    assert not exclusion_test(HalfPlanePoint(0.0, 1.0), delta_oct)
    x = 0.45
    y = 15 * (1 / SQRT3 - x) + 0.01
    assert 1 < y < 4.5
    assert exclusion_test(HalfPlanePoint(x, y), delta_oct)


def test_excluded_points_beat_octagon(rng):
    """Sampled form of the compactification guarantee on the fundamental domain."""
    delta_oct = octagon_density_closed_form()
    zs = random_star_points(rng, 20_000, y_max=30.0)
    checked = 0
    for z in zs:
        if 0 <= z.real and abs(z) >= 1:
            p = HalfPlanePoint(z.real, z.imag)
            if exclusion_test(p, delta_oct):
                checked += 1
                assert density_bound(p) > delta_oct
    assert checked > 100


def test_triangle_areas_shape():
    interior, exterior = triangle_areas(HalfPlanePoint(0.1, 1.3))
    assert len(interior) == len(exterior) == 3
