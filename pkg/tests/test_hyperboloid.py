import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from reinhardt.dynamics import CostateTriple
from reinhardt.errors import ConventionViolation, DegenerateControl
from reinhardt.hyperboloid import (
    HyperboloidParams, WBCState, abnormal_cubic_residual, abnormal_zero_energy_state,
    angular_momentum, b_from_neck, chaos_sweep, control_sl2, from_wbc, fuller_to_wbc,
    hamiltonian, hamiltonian_at, hyp_norm, integrate_wbc, lambda_r_norm, neck_active,
    neck_from_b, neck_lambda1, neck_rhs, optimal_control_root, quadratic_coefficients,
    to_wbc, truncated_rhs, truncation_error_probe, wbc_rhs, wbc_to_fuller,
)
from reinhardt.sl2core import J_VEC, det_vec, form_vec

small = st.floats(-0.8, 0.8)
complexes = st.builds(complex, small, small)
nonzero_c = complexes.filter(lambda c: abs(c) > 0.05)
rhos = st.floats(0.6, 1.0)


def params(rho=1.0, d1=1.5, eps=1, lambda_cost=-1.0):
    return HyperboloidParams(rho=rho, d1=d1, eps=eps, lambda_cost=lambda_cost)


def pontryagin_hamiltonian(ws, z):
    """H = <Lambda1 - (3/2) lam J, X> - <LambdaR, Z>/<X, Z> in sl2 coordinates."""
    st0 = from_wbc(ws)
    x, l1, lr = st0.vecs()
    zc = control_sl2(z, ws.params.rho)
    return form_vec(l1 - 1.5 * st0.lambda_cost * J_VEC, x) - form_vec(lr, zc) / form_vec(x, zc)


def test_singular_locus_maps_to_origin():
    st0 = CostateTriple.from_vecs(J_VEC, -1.5 * J_VEC, np.zeros(3), -1.0)
    ws = to_wbc(st0, params())
    assert abs(ws.w) < 1e-15 and abs(ws.b) < 1e-15 and abs(ws.c) < 1e-15


@given(complexes, complexes, complexes, rhos, st.sampled_from([-1, 0, 1]))
def test_wbc_round_trip_and_constraints(w, b, c, rho, eps):
    if eps == -1 and abs(b) < 1:
        b = b + (1.1 if b.real >= 0 else -1.1)
    if eps == 0 and abs(b) == 0:
        b = 0.3j
    p = params(rho=rho, eps=eps)
    ws = WBCState(w, b, c, p)
    st0 = from_wbc(ws)
    x, l1, lr = st0.vecs()
    assert det_vec(x) == pytest.approx(1.0, abs=1e-12)
    assert form_vec(x, lr) == pytest.approx(0.0, abs=1e-12)
    assert det_vec(l1) == pytest.approx(eps * p.d1**2, abs=1e-10)
    back = to_wbc(st0, p)
    assert abs(back.w - w) + abs(back.b - b) + abs(back.c - c) < 1e-10


def test_x_reconstruction_entry():
    w = 0.3 - 0.2j
    st0 = from_wbc(WBCState(w, 0.1j, 0.2, params()))
    from reinhardt.sl2core import cayley, vec_to_matrix
    m = cayley(vec_to_matrix(st0.X.vec))
    assert m[0, 0] == pytest.approx(-1j * hyp_norm(w), abs=1e-14)


def test_to_wbc_rejects_wrong_branch():
    st0 = CostateTriple.from_vecs(-J_VEC, -1.5 * J_VEC, np.zeros(3), -1.0)
    with pytest.raises(ConventionViolation):
        to_wbc(st0, params())
    st1 = CostateTriple.from_vecs(J_VEC, -1.0 * J_VEC, np.zeros(3), -1.0)
    with pytest.raises(ConventionViolation):
        to_wbc(st1, params())


@given(complexes, complexes, nonzero_c, rhos)
def test_control_root_properties(w, b, c, rho):
    ws = WBCState(w, b, c, params(rho=rho))
    root = optimal_control_root(ws)
    assert abs(abs(root.z_star) - 1) < 1e-12
    xi0, xi1, _ = quadratic_coefficients(c.conjugate() / abs(c) * w, rho)
    zt = root.z_tilde
    assert abs(xi0.conjugate() * zt * zt - xi1 * zt - xi0) < 1e-9
    grid = np.exp(2j * np.pi * np.arange(720) / 720)
    best = max(pontryagin_hamiltonian(ws, z) for z in grid)
    assert hamiltonian_at(ws, root.z_star) >= best - 1e-9


def test_quadratic_root_residual():
    """The selected root solves conj(xi0) z^2 - xi1 z - xi0 = 0 (from z = (xi1 + sqrt D)/(2 conj xi0))."""
    rng = np.random.default_rng(1)
    for _ in range(50):
        w, b, c = (complex(*rng.normal(scale=0.5, size=2)) for _ in range(3))
        ws = WBCState(w, b, c, params(rho=0.9))
        root = optimal_control_root(ws)
        xi0, xi1, _ = quadratic_coefficients(c.conjugate() / abs(c) * w, 0.9)
        zt = root.z_tilde
        assert abs(xi0.conjugate() * zt * zt - xi1 * zt - xi0) < 1e-9


def test_control_at_zero_w():
    c = 0.3 - 0.4j
    root = optimal_control_root(WBCState(0j, 0.2j, c, params()))
    assert root.z_star == pytest.approx(c / abs(c), abs=1e-15)
    with pytest.raises(DegenerateControl):
        optimal_control_root(WBCState(0.1, 0.1, 0j, params()))


@given(complexes, complexes, nonzero_c, rhos)
def test_hamiltonian_matches_pontryagin_form(w, b, c, rho):
    ws = WBCState(w, b, c, params(rho=rho))
    z = optimal_control_root(ws).z_star
    assert hamiltonian_at(ws, z) == pytest.approx(pontryagin_hamiltonian(ws, z), abs=1e-10)


@given(complexes, complexes, nonzero_c, rhos)
def test_first_integrals_have_zero_derivative(w, b, c, rho):
    ws = WBCState(w, b, c, params(rho=rho))
    dw, db, dc = wbc_rhs(ws)
    h = 1e-6
    fwd = WBCState(w + h * dw, b + h * db, c + h * dc, ws.params)
    bwd = WBCState(w - h * dw, b - h * db, c - h * dc, ws.params)
    d_a = (angular_momentum(fwd) - angular_momentum(bwd)) / (2 * h)
    d_h = (hamiltonian(fwd) - hamiltonian(bwd)) / (2 * h)
    scale = 1 + abs(dw) + abs(db) + abs(dc)
    assert abs(d_a) < 1e-6 * scale
    assert abs(d_h) < 1e-6 * scale


@given(complexes, complexes, nonzero_c, rhos)
def test_time_reversal_symmetry(w, b, c, rho):
    p = params(rho=rho)
    z = optimal_control_root(WBCState(w, b, c, p)).z_star
    fwd = wbc_rhs(WBCState(w, b, c, p), z)
    rev = wbc_rhs(WBCState(w.conjugate(), b.conjugate(), c.conjugate(), p), z.conjugate())
    for f, r in zip(fwd, rev):
        assert abs(r + f.conjugate()) < 1e-9


def random_params_and_state(rng):
    p = params(rho=rng.uniform(0.6, 1.0))
    w, b, c = (complex(*rng.normal(scale=s, size=2)) for s in (0.4, 0.4, 0.5))
    return WBCState(w, b, c, p)


@pytest.mark.parametrize("seed", range(4))
def test_conservation_along_integration(seed):
    ws = random_params_and_state(np.random.default_rng(seed))
    run = integrate_wbc(ws, 2.0, 41)
    a = np.array([angular_momentum(s) for s in run.states])
    h = np.array([hamiltonian(s) for s in run.states])
    assert np.abs(a - a[0]).max() < 1e-8 * 2.0
    assert np.abs(h - h[0]).max() < 1e-8 * 2.0


def test_truncation_probe_slopes():
    report = truncation_error_probe(0.5 + 0.2j, -0.3 + 0.4j, 0.6 - 0.1j)
    for key in "wbc":
        assert report.slopes[key] >= 0.9
    # Measured orders (the bound is O(r); the residuals are smaller than that).
    assert report.slopes["w"] == pytest.approx(2.0, abs=0.05)
    assert report.slopes["b"] == pytest.approx(2.0, abs=0.05)
    assert report.slopes["c"] == pytest.approx(4.0, abs=0.05)
    # Relative to b' itself, which is O(r), the b residual is first order.
    radii = np.asarray(report.radii)
    lead = np.array([abs(truncated_rhs(r * (0.5 + 0.2j), r * r * (-0.3 + 0.4j),
                                       r**3 * (0.6 - 0.1j), 1.0)[1]) for r in radii])
    rel = np.asarray(report.residuals["b"]) / lead
    assert np.polyfit(np.log(radii), np.log(rel), 1)[0] == pytest.approx(1.0, abs=0.05)


@given(complexes, complexes, nonzero_c, rhos)
def test_truncation_is_the_fuller_system(w, b, c, rho):
    dw, db, dc = truncated_rhs(w, b, c, rho)
    z1, z2, z3 = wbc_to_fuller(w, b, c, rho)
    dz1, dz2, dz3 = wbc_to_fuller(dw, db, dc, rho)
    assert abs(dz1 - (-1j * z3 / abs(z3))) < 1e-12
    assert abs(dz2 - z1) < 1e-12
    assert abs(dz3 - z2) < 1e-12
    back = fuller_to_wbc(z1, z2, z3, rho)
    assert abs(back[0] - w) + abs(back[1] - b) + abs(back[2] - c) < 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_abnormal_cubic_law(seed):
    rng = np.random.default_rng(40 + seed)
    w, b, c = (complex(*rng.normal(scale=0.4, size=2)) for _ in range(3))
    ws = abnormal_zero_energy_state(w, b, c)
    assert hamiltonian(ws) == pytest.approx(0.0, abs=1e-12)
    assert abnormal_cubic_residual(ws) < 1e-7
    with pytest.raises(ValueError):
        abnormal_cubic_residual(WBCState(w, b, c, params()))


def test_lambda_r_norm_matches_trace_form():
    ws = WBCState(0.2 + 0.1j, 0.3j, 0.4 - 0.2j, params())
    lr = from_wbc(ws).LambdaR.vec
    assert lambda_r_norm(ws) == pytest.approx(form_vec(lr, lr), abs=1e-14)


@given(st.floats(0.1, 2.0), st.floats(-3.0, 3.0), complexes)
def test_neck_chart_reproduces_b_equation(r, theta, w):
    b = b_from_neck(r, theta)
    assert neck_from_b(b) == pytest.approx((r, theta), abs=1e-12)
    dr, dtheta = neck_rhs(w, r, theta)
    db = 2j * (hyp_norm(b, -1) * w + b * hyp_norm(w))
    # Differentiate b = e^{i theta} sqrt(r^2 + 1) along (dr, dtheta).
    chain = cmath.exp(1j * theta) * (r * dr / math.sqrt(r * r + 1) + 1j * dtheta * math.sqrt(r * r + 1))
    assert abs(chain - db) < 1e-10
    lam1 = neck_lambda1(r, theta, 1.5)
    assert det_vec(lam1) == pytest.approx(-(1.5**2), abs=1e-10)


def test_neck_activation():
    assert neck_active(1.05, -1)
    assert not neck_active(1.05, 1)
    assert not neck_active(2.0, -1)


def test_chaos_sweep_calibrated_divergence():
    """Divergence of the two-trajectory experiments, frozen from the reference integrator."""
    quiet = chaos_sweep(2.5)
    loud = chaos_sweep(3.0)
    assert quiet.stop_reason == loud.stop_reason == "t_max"
    window = quiet.times <= 20.0
    assert quiet.divergence[window].max() == pytest.approx(0.0197889, rel=1e-4)
    assert loud.divergence[window].max() == pytest.approx(0.0120530, rel=1e-4)
