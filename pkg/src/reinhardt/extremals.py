"""Smoothed 6k+2-gon extremals and supporting geometric cross-checks.

The smoothed polygon with parameter k is a bang-bang trajectory of 3k+1
equal-length arcs started at z0 = i*y0 with control e3.  Closing up the
group path (g(t_f) = R) forces trace(R^-1 g_sw) = 2 cos(pi k/(3k+1)),
and since that trace equals 4/(3 y0^2 + 1) the pair (y0, t_sw) is
explicit.  The 6k-2 family uses 3k-1 arcs, control e2, y0 > 1 and
trace(g_sw R) = 2 cos(pi k/(3k-1)); its cost multiplier has the wrong
sign, so it is reported but flagged as non-extremal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import ControlSchedule, CostateTriple, costate_const_flow, spline
from .sl2core import (
    J_VEC,
    SQRT3,
    VERTEX_VECS,
    ControlVector,
    HalfPlanePoint,
    form_vec,
    phi_vec,
)

SQRT12 = math.sqrt(12.0)
CIRCLE_DENSITY = math.pi / SQRT12


@dataclass(frozen=True)
class PolygonParams:
    k: int
    y0: float
    t_sw: float
    t_f: float
    area: float
    density: float
    family: str = "plus"
    n_sides: int = 8
    extremal: bool = True
    degenerate: bool = False


@dataclass(frozen=True)
class CostateInit:
    lambda1: float
    lambdaR: float
    d: float


def switching_time(y0: float) -> float:
    """Edge duration for the polygon started at i*y0 (negative when y0 > 1)."""
    return math.log(4.0 / (3.0 * y0 * y0 + 1.0)) / (SQRT3 * y0)


def octagon_density_closed_form() -> float:
    return (8.0 - math.sqrt(32.0) - math.log(2.0)) / (math.sqrt(8.0) - 1.0)


def polygon_schedule(k: int, t_sw: float, family: str = "plus") -> ControlSchedule:
    if family == "plus":
        return ControlSchedule.of([(-i, t_sw) for i in range(3 * k + 1)])
    return ControlSchedule.of([(i, t_sw) for i in range(1, 3 * k)])


def _base_control(family: str) -> ControlVector:
    return ControlVector.vertex(2 if family == "plus" else 1)


def solve_polygon(k: int, family: str = "plus") -> PolygonParams:
    """Parameters, area and density of the smoothed (6k+2)- or (6k-2)-gon."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    if family not in ("plus", "minus"):
        raise ValueError(f"unknown family {family!r}")
    n_arcs = 3 * k + 1 if family == "plus" else 3 * k - 1
    theta = math.pi * k / n_arcs
    n_sides = 6 * k + 2 if family == "plus" else 6 * k - 2
    if family == "minus" and k == 1:
        # the two-arc member collapses onto a rectangle of area sqrt(12)
        return PolygonParams(k, math.inf, 0.0, 0.0, SQRT12, 1.0, family,
                             n_sides, extremal=False, degenerate=True)
    y0 = math.sqrt((1.0 / math.cos(theta) - 0.5) * 2.0 / 3.0)
    t_sw = abs(switching_time(y0))
    u = _base_control(family)
    from .dynamics import segment_cost
    one_edge = segment_cost(HalfPlanePoint(0.0, y0), u, t_sw)
    area = float(n_arcs * one_edge)
    return PolygonParams(k, y0, t_sw, n_arcs * t_sw, area, area / SQRT12,
                         family, n_sides, extremal=(family == "plus"))


def octagon_y0() -> float:
    return math.sqrt((math.sqrt(8.0) - 1.0) / 3.0)


def _check_y0(y0: float) -> None:
    if not 1.0 / SQRT3 < y0 < 1.0:
        raise ValueError(f"y0 = {y0!r} outside (1/sqrt3, 1)")


def lambda10(y0: float) -> np.ndarray:
    """Generator of the centralizer of h = g(t_sw) R^-1, as a triple."""
    scale = 1.0 / (2.0 * y0**2 * (1.0 + 3.0 * y0**2))
    return scale * np.array([0.0, 4.0 * SQRT3 * y0**4,
                             -SQRT3 * (1.0 + y0**2) * (3.0 * y0**2 - 1.0)])


def costate_init(y0: float) -> CostateInit:
    _check_y0(y0)
    y2 = y0 * y0
    ell = math.log(4.0 / (3.0 * y2 + 1.0))
    lam1 = -((1 + 3 * y2) * (-3 - 6 * y2 + (1 + 3 * y2) * ell)) / (12 * SQRT3 * y2**2)
    lam_r = -(3 - 12 * y2 - 9 * y2**2 + 18 * y2**3
              + (-1 + 3 * y2 + 21 * y2**2 + 9 * y2**3) * ell) / (24 * y2**3)
    d = (-1 + 2 * y2 + 3 * y2**2) * (3 + 6 * y2 - (1 + 3 * y2) * ell) ** 2 / (144 * y2**4)
    return CostateInit(lam1, lam_r, d)


def initial_costate(y0: float) -> CostateTriple:
    """Lifted initial state of the polygon extremal with lambda_cost = -1."""
    ci = costate_init(y0)
    x0 = phi_vec(complex(0.0, y0))
    lam1 = ci.lambda1 * lambda10(y0)
    lam_r = ci.lambdaR * np.array([0.0, y0 * y0, 1.0])
    return CostateTriple.from_vecs(x0, lam1, lam_r, -1.0)


def switching_polynomial(y: float, r: float) -> float:
    """Positive multiple of chi_32 in the variables y = 1+3y0^2, r = y e^{sqrt3 y0 t}."""
    return (2 * r * (y - 1) * y * math.log(r)
            - (r - y) * (r * (y - 1) + y * (2 * y - 5) + y * y * math.log(4 / y))
            - 2 * r * (y - 1) * y * math.log(y))


def _chi(x: np.ndarray, lam_r: np.ndarray, i: int, j: int) -> float:
    zi, zj = VERTEX_VECS[i], VERTEX_VECS[j]
    return form_vec(lam_r, zj / form_vec(zj, x) - zi / form_vec(zi, x))


def switching_values(y0: float, times) -> np.ndarray:
    """(chi_31, chi_32) along the first arc of the polygon extremal."""
    st0 = initial_costate(y0)
    e3 = ControlVector.vertex(2)
    out = []
    for t in times:
        st = costate_const_flow(st0, e3, float(t))
        x, _, lam_r = st.vecs()
        out.append((_chi(x, lam_r, 2, 0), _chi(x, lam_r, 2, 1)))
    return np.array(out)


def switching_certificate(y0: float, grid: int = 64, tol: float = 1e-9) -> bool:
    """Sampled check that e3 maximizes the Hamiltonian on the first arc.

    Both switching functions must be nonnegative on [0, t_sw], vanishing
    only at chi_32(0) and chi_31(t_sw); the reduced form f(y, r) is sampled
    on the same arc as an independent route.
    """
    _check_y0(y0)
    t_sw = switching_time(y0)
    times = np.linspace(0.0, t_sw, grid)
    chi = switching_values(y0, times)
    if chi.min() < -tol:
        return False
    if abs(chi[0, 1]) > tol or abs(chi[-1, 0]) > tol:
        return False
    if chi[1:, 1].min() <= 0 or chi[:-1, 0].min() <= 0:
        return False
    y = 1 + 3 * y0 * y0
    rs = y * np.exp(SQRT3 * y0 * times[1:])
    f = np.array([switching_polynomial(y, r) for r in rs])
    return bool(f.min() > 0)


def polygon_boundary(k: int, samples_per_arc: int = 200,
                     family: str = "plus") -> np.ndarray:
    """Closed boundary curve built from the six arcs sigma_j(t) = g(t) s_j.

    Returns an (N, 2) array; arc j runs from s_j to s_{j+1} because
    g(t_f) = R.
    """
    params = solve_polygon(k, family)
    if params.degenerate:
        raise ValueError("degenerate member has no smooth boundary")
    sched = polygon_schedule(k, params.t_sw, family)
    traj = spline(HalfPlanePoint(0.0, params.y0), sched,
                  base_control=_base_control(family),
                  samples_per_segment=samples_per_arc)
    g = np.array([m.array for m in traj.g])
    pts = []
    for j in range(6):
        s = np.array([math.cos(math.pi * j / 3), math.sin(math.pi * j / 3)])
        arc = g @ s
        pts.append(arc if j == 0 else arc[1:])
    return np.vstack(pts)


def shoelace_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def convexity_margin(points: np.ndarray) -> float:
    """Smallest cross product of consecutive edge vectors (>= 0 for convex CCW)."""
    pts = points
    if np.allclose(pts[0], pts[-1]):
        pts = pts[:-1]
    d1 = np.roll(pts, -1, axis=0) - pts
    d2 = np.roll(d1, -1, axis=0)
    cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    return float(cross.min())


def winding_number(points: np.ndarray) -> int:
    ang = np.unwrap(np.arctan2(points[:, 1], points[:, 0]))
    return int(round((ang[-1] - ang[0]) / (2 * math.pi)))


def _dx_over_y_chord(p: complex, q: complex) -> float:
    dx, dy = q.real - p.real, q.imag - p.imag
    if abs(dy) < 1e-14 * max(1.0, abs(p.imag)):
        return dx / (0.5 * (p.imag + q.imag))
    return dx / dy * math.log(q.imag / p.imag)


def kuperberg_area(path) -> float:
    """pi - (3/2) times the loop integral of dx/y along a closed path in h.

    ``path`` is a sequence of complex points, integrated exactly along each
    chord; the loop is closed automatically.
    """
    pts = [complex(p) for p in path]
    if pts[0] != pts[-1]:
        pts.append(pts[0])
    total = sum(_dx_over_y_chord(p, q) for p, q in zip(pts[:-1], pts[1:]))
    return math.pi - 1.5 * total


def iwasawa_path(traj) -> list[complex]:
    """The path g(t) . i of a trajectory in the upper half-plane."""
    out = []
    for g in traj.g:
        out.append((g.a11 * 1j + g.a12) / (g.a21 * 1j + g.a22))
    return out


def hypotrochoid_multicurve(r: float, r0: float, n: int, t: float) -> tuple[complex, complex, complex]:
    """The three curves r e^{it} zeta^j + r0 e^{-it/n} zeta^{-j}, j = 0, 1, 2."""
    if abs(abs(r0) - abs(r)) < 1e-15:
        raise ValueError("|r0| must differ from |r|")
    if n % 3 != 1:
        raise ValueError("n must be congruent to 1 mod 3")
    zeta = complex(-0.5, SQRT3 / 2)
    return tuple(r * complex(math.cos(t), math.sin(t)) * zeta**j
                 + r0 * complex(math.cos(t / n), -math.sin(t / n)) * zeta ** (-j)
                 for j in range(3))


def planar_det(p: complex, q: complex) -> float:
    return p.real * q.imag - p.imag * q.real


def polygon_cost_via_J(y0: float, t_sw: float) -> float:
    """Cost of one arc as -(3/2) int <J, X>, integrated by quadrature (oracle)."""
    from scipy.integrate import quad
    from .dynamics import state_at, _normalized_control
    x0 = phi_vec(complex(0.0, y0))
    p0 = _normalized_control(x0, VERTEX_VECS[2])
    val, _ = quad(lambda s: form_vec(J_VEC, state_at(x0, p0, s)), 0.0, t_sw,
                  epsabs=1e-14, epsrel=1e-14)
    return -1.5 * val
