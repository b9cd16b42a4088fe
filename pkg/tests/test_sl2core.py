import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from reinhardt.errors import ConstraintError
from reinhardt.sl2core import (
    J_VEC, ROTATION, ControlVector, HalfPlanePoint, Mat2, SL2Element, Sl2Element,
    adjoint_vec, bracket, bracket_vec, cayley, control_matrix, det_vec, exp_matrix,
    exp_sl2, form_vec, mobius, phi, phi_inverse, rho, rho_vec, star_domain_test,
    trace_form, truncated_star_test,
)

from conftest import sl2_vectors, simplex_controls, star_points

SQRT3 = math.sqrt(3.0)
J = Sl2Element(0.0, -1.0, 1.0)


def test_trace_form_of_j_is_minus_two():
    assert trace_form(J, J) == pytest.approx(-2.0, abs=1e-15)


@given(sl2_vectors)
def test_trace_form_is_minus_twice_det(x):
    assert form_vec(x, x) == pytest.approx(-2 * det_vec(x), abs=1e-12)


@given(sl2_vectors, sl2_vectors, sl2_vectors)
def test_trace_form_is_ad_invariant(x, y, z):
    lhs = form_vec(bracket_vec(x, y), z)
    rhs = form_vec(x, bracket_vec(y, z))
    assert lhs == pytest.approx(rhs, abs=1e-10)


@given(sl2_vectors, sl2_vectors)
def test_bracket_matches_matrix_commutator(x, y):
    X, Y = Sl2Element.from_vec(x).matrix, Sl2Element.from_vec(y).matrix
    expected = X @ Y - Y @ X
    got = bracket(Sl2Element.from_vec(x), Sl2Element.from_vec(y)).matrix
    np.testing.assert_allclose(got, expected, atol=1e-12)


def test_exp_of_j_is_rotation():
    g = exp_sl2(J, math.pi / 3)
    c, s = math.cos(math.pi / 3), math.sin(math.pi / 3)
    np.testing.assert_allclose(g.array, [[c, -s], [s, c]], atol=1e-15)
    np.testing.assert_allclose(ROTATION, g.array, atol=1e-15)


def test_exp_at_zero_is_identity():
    np.testing.assert_allclose(exp_sl2(Sl2Element(0.3, 2.0, -1.0), 0.0).array, np.eye(2))


def test_exp_of_nilpotent_is_linear():
    x = Sl2Element(1.0, 1.0, -1.0)  # det = -a^2 - bc = 0
    assert x.det == pytest.approx(0.0)
    np.testing.assert_allclose(exp_sl2(x, 0.7).array, np.eye(2) + 0.7 * x.matrix, atol=1e-15)


@given(sl2_vectors, st.floats(-2, 2), st.floats(-2, 2))
def test_exp_is_a_one_parameter_group(x, s, t):
    lhs = exp_matrix(x, s) @ exp_matrix(x, t)
    rhs = exp_matrix(x, s + t)
    scale = max(1.0, np.abs(rhs).max())
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * scale)


@given(sl2_vectors, st.floats(-2, 2))
def test_exp_has_unit_determinant(x, t):
    g = exp_matrix(x, t)
    scale = max(1.0, np.abs(g).max() ** 2)
    assert np.linalg.det(g) == pytest.approx(1.0, abs=1e-12 * scale)


@given(sl2_vectors, st.floats(-1, 1))
def test_exp_matches_scipy_expm(x, t):
    from scipy.linalg import expm
    m = Sl2Element.from_vec(x).matrix
    np.testing.assert_allclose(exp_matrix(x, t), expm(t * m), rtol=1e-10, atol=1e-12)


def test_exp_near_zero_determinant_is_smooth():
    for d in (1e-6, 1e-9, 1e-12, 0.0, -1e-12, -1e-9, -1e-6):
        x = np.array([0.0, 1.0, -d])  # det = d
        g = exp_matrix(x, 1.0)
        # Taylor series of cos and sinc in d, truncated far below the tolerance.
        cos_part = 1 - d / 2 + d * d / 24
        sinc_part = 1 - d / 6 + d * d / 120
        np.testing.assert_allclose(g, [[cos_part, sinc_part], [-d * sinc_part, cos_part]],
                                   atol=1e-14)


def test_phi_at_i_is_j():
    np.testing.assert_allclose(phi(HalfPlanePoint(0.0, 1.0)).vec, J_VEC, atol=1e-15)


def test_phi_of_one_plus_two_i():
    np.testing.assert_allclose(phi(HalfPlanePoint(1.0, 2.0)).matrix,
                               [[0.5, -2.5], [0.5, -0.5]], atol=1e-15)


@given(star_points(), sl2_vectors)
def test_phi_is_equivariant(z, x):
    g = exp_matrix(x / 3, 1.0)
    lhs = phi_inverse_vec_equivariance(g, z)
    np.testing.assert_allclose(lhs[0], lhs[1], atol=1e-8 * max(1, np.abs(lhs[1]).max()))


def phi_inverse_vec_equivariance(g, z):
    gz = mobius(g, z.z)
    left = phi(HalfPlanePoint.from_complex(gz)).vec
    right = adjoint_vec(g, phi(z).vec)
    return left, right


@given(star_points())
def test_phi_round_trip(z):
    x = phi(z)
    assert x.det == pytest.approx(1.0, abs=1e-12)
    assert trace_form(J, x) < 0
    back = phi_inverse(x)
    assert back.x == pytest.approx(z.x, abs=1e-12)
    assert back.y == pytest.approx(z.y, rel=1e-12)


def test_rho_of_j():
    np.testing.assert_allclose(rho(J), [1 / SQRT3] * 3, atol=1e-15)


@given(sl2_vectors)
def test_rho_products_give_det(x):
    r0, r1, r2 = rho_vec(x)
    assert r0 * r1 + r1 * r2 + r2 * r0 == pytest.approx(det_vec(x), abs=1e-10)


@given(sl2_vectors)
def test_rho_is_rotation_covariant(x):
    rotated = rho_vec(adjoint_vec(ROTATION, x))
    original = rho_vec(x)
    for j in range(3):
        assert rotated[j] == pytest.approx(original[j - 1], abs=1e-10)


def test_control_matrix_at_center_and_vertex():
    np.testing.assert_allclose(control_matrix(ControlVector.center()).vec, J_VEC / 3, atol=1e-15)
    z = control_matrix(ControlVector(1.0, 0.0, 0.0))
    np.testing.assert_allclose(z.matrix, [[0, 1 / 3], [1, 0]], atol=1e-15)
    assert z.det == pytest.approx(-1 / 3)


@given(simplex_controls(), sl2_vectors)
def test_control_pairing_is_a_rho_combination(u, x):
    zu = control_matrix(ControlVector(*u)).vec
    r0, r1, r2 = rho_vec(x)
    expected = -(2 / SQRT3) * (r2 * u[0] + r1 * u[1] + r0 * u[2])
    assert form_vec(zu, x) == pytest.approx(expected, abs=1e-10)


def test_control_vector_validation():
    with pytest.raises(ConstraintError):
        ControlVector(0.5, 0.5, 0.5)
    with pytest.raises(ConstraintError):
        ControlVector(1.5, -0.5, 0.0)
    ControlVector(1.2, -0.1, -0.1, mode="disk", radius=2.0)
    with pytest.raises(ConstraintError):
        ControlVector(5.0, -2.0, -2.0, mode="disk", radius=1.0)


def test_group_and_half_plane_validation():
    with pytest.raises(ConstraintError):
        SL2Element(1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ConstraintError):
        HalfPlanePoint(0.0, -1.0)
    assert Mat2(1, 2, 3, 4).det == pytest.approx(-2.0)


def test_cayley_examples():
    np.testing.assert_allclose(cayley(J.matrix), np.diag([-1j, 1j]), atol=1e-15)
    np.testing.assert_allclose(cayley(np.eye(2)), np.eye(2), atol=1e-15)


@given(sl2_vectors)
def test_cayley_entry_pattern(v):
    a, b, c = v
    m = cayley(Sl2Element.from_vec(v).matrix)
    z = (b + c) / 2 + 1j * a
    t = (b - c) / 2
    assert m[0, 0] == pytest.approx(1j * t, abs=1e-12)
    assert m[1, 1] == pytest.approx(-1j * t, abs=1e-12)
    assert m[0, 1] == pytest.approx(z, abs=1e-12)
    assert m[1, 0] == pytest.approx(z.conjugate(), abs=1e-12)


def test_star_tests_examples():
    assert star_domain_test(HalfPlanePoint(0, 1)) and truncated_star_test(HalfPlanePoint(0, 1))
    assert not star_domain_test(HalfPlanePoint(0.5, 0.1))
    assert star_domain_test(HalfPlanePoint(0, 5)) and not truncated_star_test(HalfPlanePoint(0, 5))


@given(st.floats(-0.7, 0.7), st.floats(0.01, 6.0))
def test_star_test_agrees_with_rho_signs(x, y):
    z = HalfPlanePoint(x, y)
    assert star_domain_test(z) == all(r > 0 for r in rho(phi(z)))


@given(star_points())
def test_truncated_star_set_is_dihedrally_invariant(z):
    inside = truncated_star_test(z)
    w = mobius(ROTATION, z.z)
    if abs(abs(w.real) * SQRT3 - 1) > 1e-9:
        assert truncated_star_test(HalfPlanePoint.from_complex(w)) == inside
    assert truncated_star_test(HalfPlanePoint(-z.x, z.y)) == inside
