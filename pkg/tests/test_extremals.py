import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from reinhardt.dynamics import const_group_flow, costate_const_flow, spline
from reinhardt.extremals import (
    CIRCLE_DENSITY, SQRT12, costate_init, convexity_margin, hypotrochoid_multicurve,
    initial_costate, iwasawa_path, kuperberg_area, octagon_density_closed_form, octagon_y0,
    planar_det, polygon_boundary, polygon_cost_via_J, polygon_schedule, shoelace_area,
    solve_polygon, switching_certificate, switching_polynomial, switching_time,
    switching_values, winding_number,
)
from reinhardt.pontryagin import hamiltonian
from reinhardt.sl2core import (
    ROTATION, ROTATION_INV, ControlVector, HalfPlanePoint, SL2Element, adjoint_vec, form_vec,
)

SQRT3 = math.sqrt(3.0)
E3 = ControlVector.vertex(2)
LOWER_Y0 = 1 / SQRT3


def test_octagon_parameters():
    p = solve_polygon(1)
    assert p.y0 == pytest.approx(math.sqrt((math.sqrt(8) - 1) / 3), abs=1e-14)
    assert p.y0 == pytest.approx(0.781, abs=5e-4)
    assert p.t_sw == pytest.approx(math.log(2) / (2 * math.sqrt(math.sqrt(8) - 1)), abs=1e-14)
    assert p.t_sw == pytest.approx(0.256, abs=5e-4)
    assert p.t_f == pytest.approx(4 * p.t_sw)
    assert p.n_sides == 8 and p.extremal


def test_octagon_density_two_routes():
    expected = (8 - math.sqrt(32) - math.log(2)) / (math.sqrt(8) - 1)
    assert octagon_density_closed_form() == pytest.approx(expected, abs=1e-15)
    assert solve_polygon(1).density == pytest.approx(expected, abs=1e-12)
    assert solve_polygon(1).area == pytest.approx(3.126, abs=1e-3)


@pytest.mark.parametrize("k", [1, 2, 3, 7])
def test_polygon_invariants(k):
    p = solve_polygon(k)
    theta = math.pi * k / (3 * k + 1)
    assert 4 / (3 * p.y0**2 + 1) == pytest.approx(2 * math.cos(theta), abs=1e-12)
    assert p.t_sw == pytest.approx(math.log(4 / (3 * p.y0**2 + 1)) / (SQRT3 * p.y0), abs=1e-12)
    assert 0 < p.t_sw < math.log(2)
    assert LOWER_Y0 < p.y0 < 1
    # Eigenvalue condition on g at the first switch.
    g_sw = const_group_flow(SL2Element.identity(), HalfPlanePoint(0.0, p.y0), E3, p.t_sw).array
    assert np.trace(ROTATION_INV @ g_sw) == pytest.approx(2 * math.cos(theta), abs=1e-10)
    # Area via per-arc quadrature of the cost integrand (independent route).
    assert (3 * k + 1) * polygon_cost_via_J(p.y0, p.t_sw) == pytest.approx(p.area, abs=1e-10)


def test_density_increases_towards_circle():
    dens = [solve_polygon(k).density for k in range(1, 11)]
    assert all(b > a for a, b in zip(dens, dens[1:]))
    assert max(dens) < CIRCLE_DENSITY
    big = solve_polygon(100)
    y0s = [solve_polygon(k).y0 for k in (10, 30, 100, 1000)]
    assert all(b > a for a, b in zip(y0s, y0s[1:]))
    assert 0.99 < big.y0 < 1 and 1 - y0s[-1] < 1e-3
    assert big.area == pytest.approx(math.pi, abs=1e-3)


def test_minus_family_flags():
    p = solve_polygon(2, family="minus")
    assert not p.extremal and p.n_sides == 10
    assert p.area > math.pi
    degenerate = solve_polygon(1, family="minus")
    assert degenerate.degenerate and degenerate.area == pytest.approx(SQRT12)


def test_solve_polygon_rejects_bad_k():
    with pytest.raises(ValueError):
        solve_polygon(0)
    with pytest.raises(ValueError):
        solve_polygon(1, family="other")


def test_costate_init_domain():
    for y0 in (0.5, 1.0, 1.2):
        with pytest.raises(ValueError):
            costate_init(y0)


def test_costate_init_relations():
    y0s = np.linspace(LOWER_Y0, 1.0, 102)[1:-1]
    ds = [costate_init(y).d for y in y0s]
    assert all(0 < d < 9 / 4 for d in ds)
    assert all(b > a for a, b in zip(ds, ds[1:]))
    for y0 in y0s[::10]:
        init = costate_init(y0)
        lam1 = initial_costate(y0).Lambda1.vec
        assert -form_vec(lam1, lam1) / 2 == pytest.approx(init.d, abs=1e-10)


@pytest.mark.parametrize("k", [1, 2, 4])
def test_strong_transversality(k):
    p = solve_polygon(k)
    st0 = initial_costate(p.y0)
    st1 = costate_const_flow(st0, E3, p.t_sw)
    expected = adjoint_vec(ROTATION_INV, st0.LambdaR.vec)
    np.testing.assert_allclose(st1.LambdaR.vec, expected, atol=1e-8)
    np.testing.assert_allclose(st1.X.vec, adjoint_vec(ROTATION_INV, st0.X.vec), atol=1e-10)
    assert hamiltonian(st0, E3) == pytest.approx(0.0, abs=1e-10)


def test_switching_certificate_and_endpoint_zeros():
    y0 = octagon_y0()
    assert switching_certificate(y0)
    chi = switching_values(y0, [0.0, switching_time(y0)])
    assert abs(chi[0, 1]) < 1e-9
    assert abs(chi[1, 0]) < 1e-9


def test_switching_polynomial_on_triangle(rng):
    for y in np.linspace(2, 4, 21):
        assert switching_polynomial(y, y) == pytest.approx(0.0, abs=1e-12)
    samples = rng.uniform(2, 4, size=(10_000, 2))
    samples = samples[samples[:, 0] <= samples[:, 1]]
    values = np.array([switching_polynomial(y, r) for y, r in samples])
    assert values.min() >= -1e-12


@pytest.mark.parametrize("k", [1, 2, 3])
def test_polygon_boundary_is_closed_convex(k):
    pts = polygon_boundary(k, samples_per_arc=200)
    assert np.abs(pts[0] - pts[-1]).max() < 1e-8
    assert winding_number(pts) == 1
    assert convexity_margin(pts) >= -1e-9
    if k == 1:
        assert shoelace_area(pts) == pytest.approx(3.126, abs=1e-3)


def test_octagon_closure_is_rotation():
    p = solve_polygon(1)
    traj = spline(HalfPlanePoint(0.0, p.y0), polygon_schedule(1, p.t_sw))
    np.testing.assert_allclose(traj.g[-1].array, ROTATION, atol=1e-8)


def test_kuperberg_area():
    assert kuperberg_area([1j, 1j, 1j]) == pytest.approx(math.pi)
    p = solve_polygon(1)
    traj = spline(HalfPlanePoint(0.0, p.y0), polygon_schedule(1, p.t_sw), samples_per_segment=2000)
    path = iwasawa_path(traj)
    assert kuperberg_area(path) == pytest.approx(p.area, abs=1e-6)
    forward = kuperberg_area(path) - math.pi
    backward = kuperberg_area(path[::-1]) - math.pi
    assert backward == pytest.approx(-forward, abs=1e-12)


@given(st.floats(0.2, 2.0), st.floats(0.05, 0.15), st.sampled_from([1, 4, 7, -2]),
       st.floats(-20, 20))
def test_hypotrochoid_properties(r, r0, n, t):
    s = hypotrochoid_multicurve(r, r0, n, t)
    assert abs(sum(s)) < 1e-12
    base = planar_det(*hypotrochoid_multicurve(r, r0, n, 0.0)[:2])
    assert planar_det(s[0], s[1]) == pytest.approx(base, abs=1e-10)
    period = hypotrochoid_multicurve(r, r0, n, t + 2 * math.pi * n)
    np.testing.assert_allclose(period, s, atol=1e-9)


def test_hypotrochoid_rejects_bad_parameters():
    with pytest.raises(ValueError):
        hypotrochoid_multicurve(1.0, 1.0, 4, 0.0)
    with pytest.raises(ValueError):
        hypotrochoid_multicurve(1.0, 0.2, 3, 0.0)
