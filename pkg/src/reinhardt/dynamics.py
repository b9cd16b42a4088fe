"""Constant-control flows on the star domain and their bang-bang splices.

With a constant control u the normalized control matrix P = Z_u/<Z_u, X>
is constant, so the state moves by z(t) = exp(tP) . z0 and the group
element by g(t) = g0 exp(t(X0 + P)) exp(-tP).  Costates follow from the
same exponentials plus two vector quadratures.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import quad_vec

from .errors import ConstraintError, StarViolation
from .sl2core import (
    J_VEC,
    ROTATION,
    ControlVector,
    HalfPlanePoint,
    SL2Element,
    Sl2Element,
    adjoint_vec,
    bracket_vec,
    control_vec,
    det_vec,
    exp_matrix,
    form_vec,
    mobius,
    phi_vec,
    star_domain_test,
)

SERIES_CUTOFF = 1e-6
QUAD_ABS_TOL = 1e-11


@dataclass(frozen=True)
class CostateTriple:
    """Lifted state (X, Lambda1, LambdaR) together with the cost multiplier."""

    X: Sl2Element
    Lambda1: Sl2Element
    LambdaR: Sl2Element
    lambda_cost: float = -1.0

    def __post_init__(self):
        if self.lambda_cost > 0:
            raise ConstraintError("lambda_cost must be nonpositive")
        if (self.lambda_cost == 0 and not np.any(self.Lambda1.vec)
                and not np.any(self.LambdaR.vec)):
            raise ConstraintError("costate (lambda_cost, Lambda1, LambdaR) is zero")

    @classmethod
    def from_vecs(cls, x, lam1, lam_r, lambda_cost: float = -1.0) -> "CostateTriple":
        return cls(Sl2Element.from_vec(x), Sl2Element.from_vec(lam1),
                   Sl2Element.from_vec(lam_r), float(lambda_cost))

    def vecs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.X.vec, self.Lambda1.vec, self.LambdaR.vec

    def flat(self) -> np.ndarray:
        return np.concatenate(self.vecs())

    @classmethod
    def from_flat(cls, y: np.ndarray, lambda_cost: float) -> "CostateTriple":
        return cls.from_vecs(y[0:3], y[3:6], y[6:9], lambda_cost)

    def check(self, tol: float = 1e-9) -> None:
        x, _, lam_r = self.vecs()
        if abs(det_vec(x) - 1.0) > tol:
            raise ConstraintError(f"det X = {det_vec(x)!r}")
        if abs(form_vec(x, lam_r)) > tol:
            raise ConstraintError(f"<X, LambdaR> = {form_vec(x, lam_r)!r}")


@dataclass(frozen=True)
class ControlSchedule:
    """Bang-bang schedule: segment i uses control R^{k_i} . u0 for dt_i."""

    segments: tuple[tuple[int, float], ...]

    def __post_init__(self):
        if not self.segments:
            raise ConstraintError("schedule must contain at least one segment")
        if any(dt < 0 for _, dt in self.segments):
            raise ConstraintError("segment durations must be nonnegative")

    @classmethod
    def of(cls, pairs: Sequence[tuple[int, float]]) -> "ControlSchedule":
        return cls(tuple((int(k), float(dt)) for k, dt in pairs))

    @property
    def duration(self) -> float:
        return sum(dt for _, dt in self.segments)


@dataclass
class Trajectory:
    times: list[float]
    g: list[SL2Element]
    z: list[HalfPlanePoint]
    cost: float
    cost_to_date: list[float] = field(default_factory=list)
    switch_times: list[float] = field(default_factory=list)
    star_ok: bool = True

    def rows(self) -> list[list[float]]:
        out = []
        for t, g, z, c in zip(self.times, self.g, self.z, self.cost_to_date):
            out.append([t, z.x, z.y, g.a11, g.a12, g.a21, g.a22, c])
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "x", "y", "g11", "g12", "g21", "g22", "cost"])
            for row in self.rows():
                writer.writerow([repr(v) for v in row])

    def to_json(self) -> str:
        return json.dumps({
            "cost": self.cost,
            "switch_times": self.switch_times,
            "columns": ["t", "x", "y", "g11", "g12", "g21", "g22", "cost"],
            "rows": self.rows(),
        })


# ---------------------------------------------------------------------------
# adjoint-orbit helpers
# ---------------------------------------------------------------------------

def _cosh_sinh_terms(det_p: float, t: float) -> tuple[float, float, float, float]:
    """Coefficients for exp(t ad_P) and its time integral.

    ad_P satisfies ad_P^3 = w2 ad_P with w2 = -4 det P, so
    exp(t ad_P) = 1 + s1 ad_P + s2 ad_P^2 and its integral over [0, t] is
    t + i1 ad_P + i2 ad_P^2.  Returned as (s1, s2, i1, i2).
    """
    w2 = -4.0 * det_p
    q = w2 * t * t
    if abs(q) < SERIES_CUTOFF:
        s1 = t * (1 + q / 6 + q * q / 120)
        s2 = t * t * (0.5 + q / 24 + q * q / 720)
        i1 = t * t * (0.5 + q / 24 + q * q / 720)
        i2 = t**3 * (1 / 6 + q / 120 + q * q / 5040)
        return s1, s2, i1, i2
    if w2 > 0:
        w = math.sqrt(w2)
        ch, sh = math.cosh(w * t), math.sinh(w * t)
    else:
        w = math.sqrt(-w2)
        ch, sh = math.cos(w * t), math.sin(w * t)
    s1 = sh / w
    s2 = (ch - 1.0) / w2
    i1 = (ch - 1.0) / w2
    i2 = (sh / w - t) / w2
    return s1, s2, i1, i2


def _normalized_control(x0: np.ndarray, zu: np.ndarray, time: float | None = None) -> np.ndarray:
    ip = form_vec(zu, x0)
    if not ip < 0:
        raise StarViolation(f"star condition fails: <Z_u, X> = {ip:.3e}", time)
    return zu / ip


def _state_vec(z: HalfPlanePoint | complex) -> np.ndarray:
    return phi_vec(z.z if isinstance(z, HalfPlanePoint) else complex(z))


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def half_plane_field(z: HalfPlanePoint, u: ControlVector) -> tuple[float, float]:
    """Velocity (x', y') of the reduced state under the constant control u."""
    zu = control_vec(u.u0, u.u1, u.u2)
    a, b, c = zu
    x, y = z.x, z.y
    denom = 2 * a * x + b - c * x * x - c * y * y
    if not denom < 0:
        raise StarViolation(f"star condition fails at {z}: denominator {denom:.3e}")
    f1 = y * (2 * a * x + b - c * x * x + c * y * y) / denom
    f2 = 2 * y * y * (a - c * x) / denom
    return f1, f2


def const_flow(z0: HalfPlanePoint, u: ControlVector, t: float) -> HalfPlanePoint:
    x0 = _state_vec(z0)
    p0 = _normalized_control(x0, control_vec(u.u0, u.u1, u.u2))
    return HalfPlanePoint.from_complex(mobius(exp_matrix(p0, t), z0.z))


def const_group_flow(g0: SL2Element, z0: HalfPlanePoint, u: ControlVector,
                     t: float) -> SL2Element:
    x0 = _state_vec(z0)
    p0 = _normalized_control(x0, control_vec(u.u0, u.u1, u.u2))
    g = g0.array @ exp_matrix(x0 + p0, t) @ exp_matrix(p0, -t)
    return SL2Element.from_array(g)


def state_at(x0: np.ndarray, p0: np.ndarray, t: float) -> np.ndarray:
    """X(t) = Ad_{exp(tP0)} X0 via the cubic relation of ad_P."""
    s1, s2, _, _ = _cosh_sinh_terms(det_vec(p0), t)
    px = bracket_vec(p0, x0)
    return x0 + s1 * px + s2 * bracket_vec(p0, px)


def state_integral(x0: np.ndarray, p0: np.ndarray, t: float) -> np.ndarray:
    """Integral of X(s) over [0, t] in closed form."""
    _, _, i1, i2 = _cosh_sinh_terms(det_vec(p0), t)
    px = bracket_vec(p0, x0)
    return t * x0 + i1 * px + i2 * bracket_vec(p0, px)


def segment_cost(z0: HalfPlanePoint, u: ControlVector, t: float,
                 method: str = "closed") -> float:
    """(3/2) times the integral of (x^2 + y^2 + 1)/y along a constant-control arc.

    The integrand equals -<J, X>, so the closed form integrates the adjoint
    orbit exactly; ``method="quad"`` integrates the half-plane path
    numerically instead.
    """
    if t == 0:
        return 0.0
    x0 = _state_vec(z0)
    p0 = _normalized_control(x0, control_vec(u.u0, u.u1, u.u2))
    probe = np.linspace(0.0, t, 33)
    for s in probe:
        z = mobius(exp_matrix(p0, s), z0.z)
        if not star_domain_test(HalfPlanePoint.from_complex(z)):
            raise StarViolation("segment leaves the star domain", float(s))
    if method == "closed":
        return -1.5 * form_vec(J_VEC, state_integral(x0, p0, t))
    if method == "quad":
        def integrand(s):
            z = mobius(exp_matrix(p0, s), z0.z)
            return (z.real**2 + z.imag**2 + 1.0) / z.imag
        from scipy.integrate import quad
        val, _ = quad(integrand, 0.0, t, epsabs=1e-13, epsrel=1e-13, limit=200)
        return 1.5 * val
    raise ValueError(f"unknown method {method!r}")


def spline(z0: HalfPlanePoint, schedule: ControlSchedule,
           base_control: ControlVector | None = None,
           samples_per_segment: int = 16,
           g0: SL2Element | None = None,
           check_star: bool = True) -> Trajectory:
    """Assemble a bang-bang trajectory from a schedule of rotated controls.

    Segment i runs the base control for dt_i from the current base point and
    is conjugated by R^{k_i}; the base point for the next segment is
    R^{k_i - k_{i+1}} applied to the endpoint, which keeps X continuous.
    """
    u0 = base_control or ControlVector.vertex(2)
    zu = control_vec(u0.u0, u0.u1, u0.u2)
    g_start = (g0 or SL2Element.identity()).array
    zb = complex(z0.z)
    t_offset = 0.0
    total = 0.0
    times: list[float] = [0.0]
    gs = [SL2Element.from_array(g_start)]
    k_first = schedule.segments[0][0]
    zs = [HalfPlanePoint.from_complex(mobius(_rot(k_first), zb))]
    costs = [0.0]
    switches: list[float] = []
    prev_x_end = None
    segs = schedule.segments
    for idx, (k, dt) in enumerate(segs):
        rk = _rot(k)
        rk_inv = _rot(-k)
        x0 = phi_vec(zb)
        p0 = _normalized_control(x0, zu, t_offset)
        x_start_actual = adjoint_vec(rk, x0)
        if prev_x_end is not None and np.max(np.abs(x_start_actual - prev_x_end)) > 1e-9:
            raise ConstraintError(f"X discontinuous at switch t={t_offset}")
        base_total = x0 + p0
        n = max(2, samples_per_segment) if dt > 0 else 0
        for j in range(1, n + 1):
            tau = dt * j / n
            gb = exp_matrix(base_total, tau) @ exp_matrix(p0, -tau)
            g_act = g_start @ rk @ gb @ rk_inv
            z_act = mobius(rk, mobius(exp_matrix(p0, tau), zb))
            zp = HalfPlanePoint.from_complex(z_act)
            if check_star and not star_domain_test(zp):
                raise StarViolation("spline leaves the star domain", t_offset + tau)
            seg_cost = -1.5 * form_vec(J_VEC, state_integral(x0, p0, tau))
            times.append(t_offset + tau)
            gs.append(SL2Element.from_array(g_act))
            zs.append(zp)
            costs.append(total + seg_cost)
        gb_end = exp_matrix(base_total, dt) @ exp_matrix(p0, -dt)
        g_start = g_start @ rk @ gb_end @ rk_inv
        total += -1.5 * form_vec(J_VEC, state_integral(x0, p0, dt)) if dt > 0 else 0.0
        z_end_base = mobius(exp_matrix(p0, dt), zb)
        prev_x_end = adjoint_vec(rk, phi_vec(z_end_base))
        t_offset += dt
        if idx + 1 < len(segs):
            k_next = segs[idx + 1][0]
            zb = mobius(_rot(k - k_next), z_end_base)
            switches.append(t_offset)
    return Trajectory(times=times, g=gs, z=zs, cost=total, cost_to_date=costs,
                      switch_times=switches)


def _rot(k: int) -> np.ndarray:
    if k >= 0:
        return np.linalg.matrix_power(ROTATION, k % 6)
    return np.linalg.matrix_power(ROTATION.T, (-k) % 6)


def costate_const_flow(state: CostateTriple, u: ControlVector, t: float,
                       lambda_cost: float | None = None) -> CostateTriple:
    """Transport (X, Lambda1, LambdaR) along a constant-control arc.

    Lambda1 is conjugated by the segment's group element; LambdaR is
    assembled from the vector quadratures
        Psi(t) = int_0^t Ad_{exp(-s(X0+P0))} Lambda1(0) - (3/2) lam Ad_{exp(-s P0)} J ds
        psi(t) = t <P0, LambdaR(0)> - <P0, [int_0^t Psi, X0]>
    with the repeated integral of Psi taken as int_0^t (t - s) Psi'(s) ds.
    """
    lam = state.lambda_cost if lambda_cost is None else lambda_cost
    x0, l10, lr0 = state.vecs()
    zu = control_vec(u.u0, u.u1, u.u2)
    p0 = _normalized_control(x0, zu)
    if t == 0:
        return CostateTriple.from_vecs(x0, l10, lr0, lam)
    a_mat = x0 + p0
    g = exp_matrix(a_mat, t) @ exp_matrix(p0, -t)
    ginv = np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]])
    lam1_t = adjoint_vec(ginv, l10)

    def integrand(s: float) -> np.ndarray:
        return (adjoint_vec(exp_matrix(a_mat, -s), l10)
                - 1.5 * lam * adjoint_vec(exp_matrix(p0, -s), J_VEC))

    big_psi, _ = quad_vec(integrand, 0.0, t, epsabs=QUAD_ABS_TOL, epsrel=1e-13)
    repeated, _ = quad_vec(lambda s: (t - s) * integrand(s), 0.0, t,
                           epsabs=QUAD_ABS_TOL, epsrel=1e-13)
    small_psi = t * form_vec(p0, lr0) - form_vec(p0, bracket_vec(repeated, x0))
    tilde = lr0 - bracket_vec(big_psi + small_psi * p0, x0)
    lam_r_t = adjoint_vec(exp_matrix(p0, t), tilde)
    x_t = adjoint_vec(exp_matrix(p0, t), x0)
    return CostateTriple.from_vecs(x_t, lam1_t, lam_r_t, lam)


def costate_rhs(y: np.ndarray, zu: np.ndarray, lambda_cost: float) -> np.ndarray:
    """Right-hand side of the (X, Lambda1, LambdaR) system for a fixed control matrix."""
    x, l1, lr = y[0:3], y[3:6], y[6:9]
    p = zu / form_vec(zu, x)
    dx = bracket_vec(p, x)
    dl1 = bracket_vec(l1, x)
    dlr = (bracket_vec(p, lr) - form_vec(lr, p) * dx
           + bracket_vec(-l1 + 1.5 * lambda_cost * J_VEC, x))
    return np.concatenate([dx, dl1, dlr])
