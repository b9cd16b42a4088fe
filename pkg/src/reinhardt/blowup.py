"""Blowup of the Reinhardt system at the singular locus.

Near the singular locus we write

    X = J + r Xt,   Lambda1 = -(3/2) J + r^2 L1t,   LambdaR = r^3 LRt,

with the normalization Xt_11 = 1, and run the constant-control equations
in rescaled time s = t / r0.  Written in (Xt, L1t, LRt) the equations
and the switching functions are analytic in r0, including r0 = 0, where
the local Poincare map reduces to the Fuller return map.  A chart point
is (r, xt21, lt11, lt21).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from . import fuller
from .dynamics import CostateTriple
from .errors import ConstraintError, NoSwitch, RankDeficiency, StarViolation
from .fuller import FullerState
from .hyperboloid import HyperboloidParams, to_wbc, wbc_to_fuller
from .sl2core import (
    J_VEC,
    ROTATION,
    ROTATION_INV,
    SQRT3,
    VERTEX_VECS,
    adjoint_vec,
    bracket_vec,
    form_vec,
    phi_inverse_vec,
    rho_vec,
)

HALF_D1 = 1.5
START_CONTROL = 1  # Z_010, the control matching zeta
NEXT_CONTROL = 0  # Z_100, the control matching 1
WALL_PARTNER = 2  # Z_001: the chart starts on the wall between Z_010 and Z_001
MAX_RESCALED_TIME = 20.0
# hyperboloid parameters of the truncation dictionary near the singular locus
SINGULAR_CHART_PARAMS = HyperboloidParams(rho=2.0, d1=HALF_D1, eps=1, lambda_cost=-1.0)
ODE_RTOL = 1e-12
ODE_ATOL = 1e-14


@dataclass(frozen=True)
class BlowupChart:
    """Chart point (r, xt21, lt11, lt21) with xt11 = 1."""
    r: float
    xt21: float
    lt11: float
    lt21: float

    def __post_init__(self):
        if self.r < 0:
            raise ConstraintError("the chart is used for r >= 0 only")
        if self.r > 0 and not self.xt21 > star_boundary(self.r):
            raise StarViolation(f"xt21 = {self.xt21} is not above the star boundary")
        if not self.lt21 * self.r ** 2 < 1.5:
            raise ConstraintError("lt21 r^2 must stay below 3/2")

    @property
    def xt(self) -> np.ndarray:
        return np.array([self.xt21, self.lt11, self.lt21])

    @property
    def array(self) -> np.ndarray:
        return np.array([self.r, self.xt21, self.lt11, self.lt21])

    @classmethod
    def from_array(cls, arr) -> BlowupChart:
        return cls(*(float(v) for v in arr))


def star_boundary(r: float) -> float:
    """Value of xt21 on the boundary of the star domain: sqrt(3) - 1/r."""
    return SQRT3 - 1.0 / r


# ---------------------------------------------------------------------------
# chart <-> scaled triples


def _scaled_x(r: float, xt21: float) -> np.ndarray:
    """Xt = (X - J)/r as an (a, b, c) triple; det X = 1 fixes b."""
    return np.array([1.0, (xt21 - r) / (1.0 + r * xt21), xt21])


def _scaled_lambda1(r: float, lt11: float, lt21: float) -> np.ndarray:
    """L1t = (Lambda1 + (3/2) J)/r^2; det Lambda1 = 9/4 fixes the (1,2) entry."""
    lt12 = (r * r * lt11 * lt11 + HALF_D1 * lt21) / (HALF_D1 - r * r * lt21)
    return np.array([lt11, lt12, lt21])


def _lambda1_defect(r: float, lt11: float, lt21: float) -> float:
    """<L1t, J>/r, the analytic continuation of the cost term of H."""
    return r * (lt11 * lt11 + lt21 * lt21) / (HALF_D1 - r * r * lt21)


def _x_full(r: float, xt: np.ndarray) -> np.ndarray:
    return J_VEC + r * xt


def _scaled_lambda_r(r: float, xt: np.ndarray, l1t: np.ndarray, defect: float) -> np.ndarray:
    """Solve <X, LRt> = 0, H(Z_010) = 0, chi_23 = 0 for LRt."""
    x = _x_full(r, xt)
    zs = [VERTEX_VECS[i] / form_vec(x, VERTEX_VECS[i]) for i in range(3)]
    rows = np.array([
        [2 * x[0], x[2], x[1]],
        [2 * zs[START_CONTROL][0], zs[START_CONTROL][2], zs[START_CONTROL][1]],
        [2 * (zs[WALL_PARTNER] - zs[START_CONTROL])[0],
         (zs[WALL_PARTNER] - zs[START_CONTROL])[2],
         (zs[WALL_PARTNER] - zs[START_CONTROL])[1]],
    ])
    rhs = np.array([0.0, defect + form_vec(l1t, xt), 0.0])
    if abs(np.linalg.det(rows)) < 1e-12:
        raise RankDeficiency("the linear system for LambdaR is singular")
    return np.linalg.solve(rows, rhs)


def scaled_triples(bc: BlowupChart) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Xt, L1t, LRt) of a chart point; analytic in r including r = 0."""
    xt = _scaled_x(bc.r, bc.xt21)
    l1t = _scaled_lambda1(bc.r, bc.lt11, bc.lt21)
    lrt = _scaled_lambda_r(bc.r, xt, l1t, _lambda1_defect(bc.r, bc.lt11, bc.lt21))
    return xt, l1t, lrt


def chart_to_state(bc: BlowupChart) -> CostateTriple:
    """Lifted state (X, Lambda1, LambdaR) of a chart point with r > 0."""
    if bc.r <= 0:
        raise ConstraintError("chart_to_state needs r > 0; use fuller_limit at r = 0")
    xt, l1t, lrt = scaled_triples(bc)
    r = bc.r
    return CostateTriple.from_vecs(J_VEC + r * xt, -HALF_D1 * J_VEC + r * r * l1t,
                                   r ** 3 * lrt)


def state_to_chart(st: CostateTriple) -> BlowupChart:
    x, l1, _ = st.vecs()
    r = float(x[0])
    if r <= 0:
        raise ConstraintError("X has nonpositive (1,1) entry")
    return BlowupChart(r, (x[2] - 1.0) / r, l1[0] / r ** 2, (l1[2] + HALF_D1) / r ** 2)


# ---------------------------------------------------------------------------
# Fuller limit


def fuller_limit(xt) -> FullerState:
    """Fuller state z(xt) on the exceptional divisor.

    z1 = (xt21 + i)/2 and z2 = (lt11 - i lt21)/6; z3 is real and fixed by
    H_F(z, zeta) = H_F(z, zeta^2) = 0.
    """
    xt21, lt11, lt21 = (float(v) for v in xt)
    z1 = complex(xt21, 1.0) / 2
    z2 = complex(lt11, -lt21) / 6
    return FullerState(z1, z2, complex(2 * fuller.real_pair(z1, 1j * z2), 0.0))


def chart_of_fuller(z: FullerState) -> np.ndarray:
    """Inverse of ``fuller_limit`` on wall states with first control zeta."""
    w = fuller.wall_normalize(z)
    y1 = w.z1.imag
    if y1 <= 0:
        raise ConstraintError("Im z1 must be positive in the chart")
    return np.array([w.z1.real / y1, 1.5 * w.z2.real / y1 ** 2, -1.5 * w.z2.imag / y1 ** 2])


def fuller_components(bc: BlowupChart) -> FullerState:
    """(z1/r, z2/r^2, z3/r^3) from the hyperboloid coordinates (w, b, c) of a chart point."""
    ws = to_wbc(chart_to_state(bc), SINGULAR_CHART_PARAMS)
    z1, z2, z3 = wbc_to_fuller(ws.w, ws.b, ws.c, SINGULAR_CHART_PARAMS.rho)
    r = bc.r
    return FullerState(z1 / r, z2 / r ** 2, z3 / r ** 3)


X_OUT = chart_of_fuller(fuller.q_out())


# ---------------------------------------------------------------------------
# rescaled equations


def _control_matrix(x: np.ndarray, i: int) -> np.ndarray:
    return VERTEX_VECS[i] / form_vec(x, VERTEX_VECS[i])


def scaled_rhs(_s, y, r0: float, control: int = START_CONTROL) -> np.ndarray:
    """d/ds of (Xt, L1t, LRt) for the constant control Z_control."""
    xt, l1t, lrt = y[0:3], y[3:6], y[6:9]
    x = _x_full(r0, xt)
    p = _control_matrix(x, control)
    dx = bracket_vec(p, x)
    dl1 = -HALF_D1 * bracket_vec(J_VEC, xt) + r0 * bracket_vec(l1t, x)
    dlr = r0 * (bracket_vec(p, lrt) - form_vec(lrt, p) * dx) - bracket_vec(l1t, x)
    return np.concatenate([dx, dl1, dlr])


def scaled_switching(y, r0: float, i: int, j: int) -> float:
    """chi_ij / r0^3 from the scaled triples."""
    x = _x_full(r0, y[0:3])
    return form_vec(y[6:9], _control_matrix(x, j) - _control_matrix(x, i))


def _switching_numerator(y, r0: float, i: int, j: int) -> float:
    """chi_ij / r0^3 times <X, Z_i><X, Z_j>; same zeros inside the star domain, no poles."""
    x = _x_full(r0, y[0:3])
    zi, zj = VERTEX_VECS[i], VERTEX_VECS[j]
    return (form_vec(y[6:9], zj) * form_vec(x, zi)
            - form_vec(y[6:9], zi) * form_vec(x, zj))


def scaled_hamiltonian(y, r0: float, control: int = START_CONTROL) -> float:
    """H / r0^3 from the scaled triples (normal case, cost multiplier -1)."""
    xt, l1t, lrt = y[0:3], y[3:6], y[6:9]
    x = _x_full(r0, xt)
    defect = form_vec(l1t, J_VEC) / r0 if r0 else 0.0
    return defect + form_vec(l1t, xt) - form_vec(lrt, _control_matrix(x, control))


@dataclass(frozen=True)
class LocalStep:
    image: np.ndarray  # (r, xt21, lt11, lt21)
    s_sw: float
    radial_factor: float
    # smallest value of chi_{2,3} (scaled, denominators cleared) after the
    # start; positive means Z_001 never competes and the order stays cyclic
    other_switch_min: float


def _star_margin(y, r0: float) -> float:
    return min(rho_vec(_x_full(r0, y[0:3])))


def _scaled_triples_array(arr) -> np.ndarray:
    r, xt21, lt11, lt21 = (float(v) for v in arr)
    xt = _scaled_x(r, xt21)
    l1t = _scaled_lambda1(r, lt11, lt21)
    return np.concatenate([xt, l1t, _scaled_lambda_r(r, xt, l1t, _lambda1_defect(r, lt11, lt21))])


@dataclass(frozen=True)
class Arc:
    """Constant-control arc in scaled variables, up to the first switch or star exit."""
    r0: float
    solution: object  # dense output of solve_ivp, a function of s
    s_switch: float | None
    s_exit: float | None

    @property
    def s_end(self) -> float:
        ends = [s for s in (self.s_switch, self.s_exit) if s is not None]
        return min(ends)

    @property
    def leaves_star(self) -> bool:
        return self.s_exit is not None and (self.s_switch is None or self.s_exit < self.s_switch)


def integrate_arc(point, s_max: float = MAX_RESCALED_TIME) -> Arc:
    """Run the control Z_010 from a chart point (r may be negative) in rescaled time."""
    arr = np.asarray(point, dtype=float)
    r0 = float(arr[0])
    y0 = _scaled_triples_array(arr)

    def switch(_s, y, r):
        return _switching_numerator(y, r, START_CONTROL, NEXT_CONTROL)

    def star(_s, y, r):
        return _star_margin(y, r)

    switch.terminal = True
    star.terminal = True
    star.direction = -1
    if abs(switch(0.0, y0, r0)) < 1e-12:
        raise NoSwitch("s = 0 is a root of the switching function")
    events = [switch, star] if r0 > 0 else [switch]
    sol = solve_ivp(scaled_rhs, (0.0, s_max), y0, method="DOP853", rtol=ODE_RTOL,
                    atol=ODE_ATOL, events=events, args=(r0,), dense_output=True)
    s_switch = float(sol.t_events[0][0]) if sol.t_events[0].size else None
    s_exit = float(sol.t_events[1][0]) if r0 > 0 and sol.t_events[1].size else None
    return Arc(r0, sol.sol, s_switch, s_exit)


def local_step(point, s_max: float = MAX_RESCALED_TIME) -> LocalStep:
    """One step of the analytically extended local Poincare map.

    ``point`` is (r, xt21, lt11, lt21); r may be negative here, which is
    only meaningful as a check of the analytic extension.  For r > 0 the
    trajectory is also required to stay in the star domain.
    """
    arc = integrate_arc(point, s_max)
    if arc.leaves_star:
        raise StarViolation(f"trajectory leaves the star domain at s = {arc.s_exit:.6f}")
    if arc.s_switch is None:
        raise NoSwitch(f"no switch for s in (0, {s_max}]")
    r0, s_sw = arc.r0, arc.s_switch
    y = arc.solution(s_sw)
    xt, l1t = (adjoint_vec(ROTATION_INV, y[k:k + 3]) for k in (0, 3))
    a = float(xt[0])
    if a <= 0:
        raise ConstraintError("the switching point has nonpositive radial factor")
    image = np.array([r0 * a, xt[2] / a, l1t[0] / a ** 2, l1t[2] / a ** 2])
    other = min(_switching_numerator(arc.solution(s), r0, START_CONTROL, WALL_PARTNER)
                for s in np.linspace(0.05 * s_sw, s_sw, 40))
    return LocalStep(image, s_sw, a, float(other))


def local_poincare(bc: BlowupChart) -> BlowupChart:
    """The local Reinhardt-Poincare map in chart coordinates.

    At r = 0 this is the Fuller return map written in the chart.
    """
    return BlowupChart.from_array(local_step(bc.array).image)


def local_jacobian(point=None, step: float = 1e-6) -> np.ndarray:
    """4x4 Jacobian of the extended map by central differences (r may go negative)."""
    base = np.concatenate([[0.0], X_OUT]) if point is None else np.asarray(point, float)
    jac = np.empty((4, 4))
    for i in range(4):
        d = np.zeros(4)
        d[i] = step
        jac[:, i] = (local_step(base + d).image - local_step(base - d).image) / (2 * step)
    return jac


def fuller_chart_map(xt) -> np.ndarray:
    """The Fuller return map written in chart coordinates, via the fuller module."""
    return chart_of_fuller(fuller.fuller_poincare(fuller_limit(xt)))


def unstable_direction() -> np.ndarray:
    """Eigenvector of the extended map at (0, xt_out) for the radial eigenvalue, r-component 1."""
    vals, vecs = np.linalg.eig(local_jacobian())
    k = int(np.argmax(np.abs(vals)))
    v = np.real(vecs[:, k])
    return v / v[0]


@dataclass(frozen=True)
class UnstableCurve:
    points: np.ndarray  # (N, 4) rows (r, xt21, lt11, lt21) on a grid in r
    raw: np.ndarray  # iterates of the seeds, sorted by r
    exit_onset: float  # smallest r whose forward step leaves the star domain
    boundary_hit: tuple[float, float]  # (r, xt21) where the curve meets the star boundary
    other_switch_min: float
    radii_increase: bool  # no iterate moves back towards the exceptional divisor

    def as_list(self) -> list[tuple[float, np.ndarray]]:
        return [(float(p[0]), p[1:].copy()) for p in self.points]


def unstable_curve(max_r: float = 0.25, step: float = 5e-4, seed_radius: float = 1e-4,
                   seeds: int = 200) -> UnstableCurve:
    """Trace the unstable curve of (0, xt_out) out to the star boundary.

    Seeds along the unstable direction fill one fundamental domain
    [seed_radius, r_scale * seed_radius); their forward iterates are
    pulled onto the curve by the strong contraction transverse to it.
    Iteration stops when a forward step leaves the star domain before
    switching.  The curve is then resampled on the grid r = step, 2 step, ...
    """
    direction = unstable_direction()
    factor = fuller.scale_factor()
    raw = []
    other = math.inf
    increasing = True
    for r in np.geomspace(seed_radius, seed_radius * factor, seeds, endpoint=False):
        point = np.concatenate([[r], X_OUT + r * direction[1:]])
        while point[0] < max_r:
            try:
                result = local_step(point)
            except StarViolation:
                break
            other = min(other, result.other_switch_min)
            increasing &= bool(result.image[0] > point[0])
            point = result.image
            raw.append(point)
    raw_arr = np.array(sorted(raw, key=lambda q: q[0]))
    curve = CubicSpline(raw_arr[:, 0], raw_arr[:, 1:])

    def leaves(r: float) -> bool:
        try:
            local_step(np.concatenate([[r], curve(r)]))
        except StarViolation:
            return True
        return False

    lo, hi = raw_arr[0, 0], raw_arr[-1, 0]
    if not leaves(hi):
        raise NoSwitch("the traced curve never leaves the star domain")
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if leaves(mid) else (mid, hi)
    hit = local_step(np.concatenate([[lo], curve(lo)])).image
    end = min(max_r, hit[0], raw_arr[-1, 0])
    grid = np.arange(step, end, step)
    grid = grid[grid >= raw_arr[0, 0]]
    points = np.column_stack([grid, curve(grid)])
    return UnstableCurve(points, raw_arr, float(lo), (float(hit[0]), float(hit[1])),
                         float(other), increasing)


def outward_spiral(seed_radius: float = 1e-3, samples_per_arc: int = 60,
                   rotation: int = 0, max_arcs: int = 50) -> np.ndarray:
    """Half-plane trajectory z(t) leaving the singular locus along the unstable curve.

    Each arc is drawn in the frame of the original system: after n
    switches the chart state has been rotated by R^(-n), which is undone
    here.  The trace ends where the trajectory meets the star boundary.
    ``rotation`` selects one of the three rotated copies.
    """
    point = np.concatenate([[seed_radius], X_OUT + seed_radius * unstable_direction()[1:]])
    path: list[complex] = []
    for n in range(max_arcs):
        arc = integrate_arc(point)
        frame = np.linalg.matrix_power(ROTATION, (n + rotation) % 6)
        for s in np.linspace(0.0, arc.s_end, samples_per_arc):
            x = adjoint_vec(frame, _x_full(arc.r0, arc.solution(s)[0:3]))
            path.append(phi_inverse_vec(x))
        if arc.leaves_star or arc.s_switch is None:
            break
        point = local_step(point).image
    return np.array(path)
