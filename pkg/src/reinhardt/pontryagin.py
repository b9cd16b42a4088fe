"""Lifted Hamiltonian system: control maximization, extremal integration,
the switching Poincare map and the edge control subsystem.

The state is q = (X, Lambda1, LambdaR) with a fixed cost multiplier
lambda_cost <= 0.  For a control u with matrix Z_u the Hamiltonian is

    H = <Lambda1 - (3/2) lambda_cost J, X> - <LambdaR, Z_u> / <X, Z_u>,

which is linear-fractional in u, so its maximum over the control simplex
is attained on a face spanned by vertices.  The vertex values differ by
the switching functions chi_ij = <LambdaR, Z_j/<Z_j,X> - Z_i/<Z_i,X>>,
so chi_ij > 0 means vertex i beats vertex j.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import null_space
from scipy.optimize import bisect

from .dynamics import CostateTriple, costate_rhs
from .errors import ConstraintError, SingularApproach, StarViolation
from .sl2core import (
    J_VEC,
    ROTATION,
    SQRT3,
    VERTEX_VECS,
    ControlVector,
    adjoint_vec,
    control_vec,
    det_vec,
    form_vec,
    phi_vec,
)

__all__ = [
    "CostateTriple",
    "MaximizerFace",
    "EdgeState",
    "ExtremalRun",
    "hamiltonian",
    "vertex_hamiltonians",
    "maximize_control",
    "rhs",
    "switching_value",
    "integrate_extremal",
    "rotate_state",
    "poincare_step",
    "poincare_return",
    "section_constraints",
    "section_tangent_basis",
    "return_map_jacobian",
    "edge_system_step",
    "edge_rhs",
    "abnormal_edge_costate",
    "abnormal_edge_residual",
]

TIE_TOL = 1e-11
SINGULAR_TOL = 1e-10
H_DRIFT_TOL = 1e-7
EVENT_TIME_TOL = 1e-12
MAX_CHATTER = 10


@dataclass(frozen=True)
class MaximizerFace:
    """Face of the control simplex maximizing the Hamiltonian.

    ``kind`` is "vertex", "edge" or "full"; ``indices`` lists the vertices
    spanning the face (0, 1, 2 for e1, e2, e3).
    """

    kind: str
    indices: tuple[int, ...]

    def __post_init__(self):
        expected = {"vertex": 1, "edge": 2, "full": 3}
        if self.kind not in expected or len(self.indices) != expected[self.kind]:
            raise ValueError(f"inconsistent face {self.kind} {self.indices}")


def _control_array(u) -> np.ndarray:
    if isinstance(u, ControlVector):
        return control_vec(u.u0, u.u1, u.u2)
    return np.asarray(u, dtype=float)


def _vertex(i: int) -> np.ndarray:
    return VERTEX_VECS[i % 3]


def _star_denominator(x: np.ndarray, zu: np.ndarray) -> float:
    ip = form_vec(x, zu)
    if not ip < 0:
        raise StarViolation(f"star condition fails: <X, Z_u> = {ip:.3e}")
    return ip


def hamiltonian(st: CostateTriple, u) -> float:
    x, l1, lr = st.vecs()
    zu = _control_array(u)
    ip = _star_denominator(x, zu)
    return form_vec(l1 - 1.5 * st.lambda_cost * J_VEC, x) - form_vec(lr, zu) / ip


def vertex_hamiltonians(st: CostateTriple) -> np.ndarray:
    return np.array([hamiltonian(st, _vertex(i)) for i in range(3)])


def switching_value(st: CostateTriple, i: int, j: int) -> float:
    x, _, lr = st.vecs()
    zi, zj = _vertex(i), _vertex(j)
    return form_vec(lr, zj / _star_denominator(x, zj) - zi / _star_denominator(x, zi))


def maximize_control(st: CostateTriple, tol: float = TIE_TOL) -> MaximizerFace:
    if np.max(np.abs(st.LambdaR.vec)) <= tol:
        return MaximizerFace("full", (0, 1, 2))
    values = vertex_hamiltonians(st)
    top = values.max()
    winners = tuple(int(i) for i in np.flatnonzero(values >= top - tol))
    kind = {1: "vertex", 2: "edge", 3: "full"}[len(winners)]
    return MaximizerFace(kind, winners)


def rhs(st: CostateTriple, u) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Time derivatives (X', Lambda1', LambdaR') under the control u."""
    zu = _control_array(u)
    x = st.X.vec
    _star_denominator(x, zu)
    d = costate_rhs(st.flat(), zu, st.lambda_cost)
    return d[0:3], d[3:6], d[6:9]


def rotate_state(st: CostateTriple, k: int = 1) -> CostateTriple:
    """Componentwise Ad(R^k)."""
    rk = np.linalg.matrix_power(ROTATION if k >= 0 else ROTATION.T, abs(k))
    return CostateTriple.from_vecs(*(adjoint_vec(rk, v) for v in st.vecs()),
                                   st.lambda_cost)


def _rotation_shift() -> int:
    """Index shift s with Ad(R) Z_{e_i} = Z_{e_{i+s}}."""
    moved = adjoint_vec(ROTATION, VERTEX_VECS[0])
    for s in range(3):
        if np.allclose(moved, VERTEX_VECS[s], atol=1e-12):
            return s
    raise RuntimeError("rotation does not permute the simplex vertices")


ROTATION_SHIFT = _rotation_shift()


# ---------------------------------------------------------------------------
# extremal integration
# ---------------------------------------------------------------------------

@dataclass
class ExtremalRun:
    times: np.ndarray
    states: np.ndarray  # (N, 9): X, Lambda1, LambdaR triples
    controls: np.ndarray  # active vertex index per sample
    hamiltonian: np.ndarray
    switch_times: list[float] = field(default_factory=list)
    switch_controls: list[int] = field(default_factory=list)
    lambda_cost: float = -1.0

    @property
    def final(self) -> CostateTriple:
        return CostateTriple.from_flat(self.states[-1], self.lambda_cost)

    def state(self, index: int) -> CostateTriple:
        return CostateTriple.from_flat(self.states[index], self.lambda_cost)

    def to_csv(self, path) -> None:
        names = ["t"] + [f"{grp}_{c}" for grp in ("X", "L1", "LR") for c in "abc"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(names + ["control", "H"])
            for t, s, u, h in zip(self.times, self.states, self.controls, self.hamiltonian):
                writer.writerow([repr(float(t))] + [repr(float(v)) for v in s]
                                + [int(u), repr(float(h))])


def _chi_derivative(st: CostateTriple, i: int, j: int) -> float:
    """d/dt chi_ij while vertex i is active."""
    x, _, lr = st.vecs()
    dx, _, dlr = rhs(st, _vertex(i))
    total = 0.0
    for z, sign in ((_vertex(j), 1.0), (_vertex(i), -1.0)):
        ip = form_vec(z, x)
        total += sign * (form_vec(dlr, z) / ip - form_vec(lr, z) * form_vec(z, dx) / ip**2)
    return total


def active_vertex(st: CostateTriple, tol: float = 1e-9) -> int:
    """Vertex control that maximizes H just after the current instant.

    Ties are broken by the sign of the switching-function derivative; an
    exact double tie falls back to the cyclic successor of the lowest index.
    """
    values = vertex_hamiltonians(st)
    top = values.max()
    tied = [int(i) for i in np.flatnonzero(values >= top - tol)]
    if len(tied) == 1:
        return tied[0]
    if len(tied) == 3:
        raise SingularApproach("all three vertex controls tie")
    a, b = tied
    rate = _chi_derivative(st, a, b)
    if rate > tol:
        return a
    if _chi_derivative(st, b, a) > tol:
        return b
    return b if (a + 1) % 3 == b else a


def integrate_extremal(st0: CostateTriple, t_max: float, active: int | None = None,
                       max_switches: int | None = None, rtol: float = 1e-12,
                       atol: float = 1e-13, h_tol: float = H_DRIFT_TOL,
                       check_hamiltonian: bool = True) -> ExtremalRun:
    """Integrate the lifted system with the maximizing vertex control.

    Switching events are zero crossings (from positive to negative) of the
    two inactive switching functions; each is bracketed on the dense output
    and refined by bisection.  Integration stops at ``t_max`` or after
    ``max_switches`` switches, whichever comes first.
    """
    lam = st0.lambda_cost
    if active is None:
        active = active_vertex(st0)
    y = st0.flat()
    t = 0.0
    times: list[np.ndarray] = []
    states: list[np.ndarray] = []
    ctrls: list[np.ndarray] = []
    switches: list[float] = []
    switch_ctrls: list[int] = []
    chatter = 0
    while t < t_max:
        zu = _vertex(active)
        others = [j for j in range(3) if j != active]

        def fun(_, yy, zu=zu):
            _star_denominator(yy[0:3], zu)
            return costate_rhs(yy, zu, lam)

        def make_event(j, i=active):
            def ev(_, yy):
                return switching_value(CostateTriple.from_flat(yy, lam), i, j)
            ev.terminal = True
            ev.direction = -1
            return ev

        events = [make_event(j) for j in others]
        sol = solve_ivp(fun, (t, t_max), y, method="DOP853", rtol=rtol, atol=atol,
                        dense_output=True, events=events)
        if sol.status == -1:
            raise StarViolation(f"integration failed: {sol.message}", t)
        hits = [(ev_t[0], others[k]) for k, ev_t in enumerate(sol.t_events) if len(ev_t)]
        seg_t = sol.t
        if hits:
            hits.sort()
            t_hit, nxt = hits[0]
            if len(hits) > 1 and abs(hits[1][0] - t_hit) < EVENT_TIME_TOL:
                nxt = (active + 1) % 3
            t_hit = _refine_event(sol.sol, lam, active, nxt, t, t_hit)
            seg_t = np.append(seg_t[seg_t < t_hit], t_hit)
        seg_y = sol.sol(seg_t).T
        seg_y[0] = y
        times.append(seg_t if not times else seg_t[1:])
        states.append(seg_y if not states else seg_y[1:])
        ctrls.append(np.full(len(times[-1]), active))
        lr_norm = np.max(np.abs(seg_y[:, 6:9]), axis=1)
        if np.any((lr_norm < SINGULAR_TOL) & (seg_t > 0)):
            raise SingularApproach("LambdaR vanished along the extremal")
        if not hits:
            t = float(seg_t[-1])
            y = seg_y[-1]
            break
        if seg_t[-1] - t < EVENT_TIME_TOL:
            chatter += 1
            if chatter > MAX_CHATTER:
                raise SingularApproach("persistent edge: switching does not advance")
        else:
            chatter = 0
        t = float(seg_t[-1])
        y = seg_y[-1]
        switches.append(t)
        switch_ctrls.append(nxt)
        active = nxt
        if max_switches is not None and len(switches) >= max_switches:
            break
    all_t = np.concatenate(times)
    all_y = np.vstack(states)
    all_u = np.concatenate(ctrls)
    ham = np.array([hamiltonian(CostateTriple.from_flat(s, lam), _vertex(u))
                    for s, u in zip(all_y, all_u)])
    if check_hamiltonian and np.max(np.abs(ham - ham[0])) > h_tol:
        raise ConstraintError(f"Hamiltonian drift {np.max(np.abs(ham - ham[0])):.3e}")
    return ExtremalRun(all_t, all_y, all_u, ham, switches, switch_ctrls, lam)


def _refine_event(dense, lam, i, j, t_lo, t_hit) -> float:
    def chi(tt):
        return switching_value(CostateTriple.from_flat(dense(tt), lam), i, j)

    width = max(1e-9, 1e-6 * max(1.0, t_hit - t_lo))
    lo, hi = max(t_lo, t_hit - width), t_hit + width
    try:
        hi = min(hi, dense.t_max)
    except AttributeError:
        pass
    if chi(lo) > 0 > chi(hi):
        return bisect(chi, lo, hi, xtol=EVENT_TIME_TOL * 0.1, maxiter=200)
    return t_hit


# ---------------------------------------------------------------------------
# Poincare map on a switching section
# ---------------------------------------------------------------------------

def poincare_step_with_time(q: CostateTriple, active: int = 2,
                            d: float | None = None) -> tuple[CostateTriple, float]:
    """Flow from the section to the next switch, then rotate the new control back.

    Returns the image point and the switching time.
    """
    if d is not None and abs(det_vec(q.Lambda1.vec) - d) > 1e-8:
        raise ConstraintError(f"det Lambda1 = {det_vec(q.Lambda1.vec)!r} is not {d!r}")
    run = integrate_extremal(q, 50.0, active=active, max_switches=1,
                             check_hamiltonian=False)
    if not run.switch_times:
        raise SingularApproach("no switch before the time limit")
    new = run.switch_controls[0]
    k = _shift_power(new, active)
    return rotate_state(run.final, k), run.switch_times[0]


def _shift_power(src: int, dst: int) -> int:
    """Power k in {-1, 0, 1} with Ad(R^k) moving vertex ``src`` onto ``dst``."""
    for k in (1, -1, 0):
        if (src + k * ROTATION_SHIFT) % 3 == dst:
            return k
    raise RuntimeError("unreachable")


def poincare_step(q: CostateTriple, d: float | None = None, active: int = 2) -> CostateTriple:
    return poincare_step_with_time(q, active, d)[0]


def poincare_return(q: CostateTriple, steps: int = 4, active: int = 2) -> CostateTriple:
    for _ in range(steps):
        q = poincare_step(q, active=active)
    return q


def section_constraints(y: np.ndarray, lambda_cost: float, active: int,
                        partner: int) -> np.ndarray:
    """det X - 1, <X, LambdaR>, det Lambda1, H, chi(active, partner)."""
    st = CostateTriple.from_flat(y, lambda_cost)
    x, l1, lr = st.vecs()
    return np.array([det_vec(x) - 1.0, form_vec(x, lr), det_vec(l1),
                     hamiltonian(st, _vertex(active)),
                     switching_value(st, active, partner)])


def section_tangent_basis(q: CostateTriple, active: int = 2, partner: int = 1,
                          step: float = 1e-7) -> np.ndarray:
    """Orthonormal basis (9 x 4) of the tangent space of the switching section."""
    y = q.flat()
    grads = np.empty((5, 9))
    for k in range(9):
        e = np.zeros(9)
        e[k] = step
        grads[:, k] = (section_constraints(y + e, q.lambda_cost, active, partner)
                       - section_constraints(y - e, q.lambda_cost, active, partner)) / (2 * step)
    return null_space(grads)


def return_map_jacobian(q: CostateTriple, steps: int = 4, active: int = 2,
                        partner: int = 1, step: float = 1e-6,
                        method: str = "chain") -> np.ndarray:
    """Jacobian of the ``steps``-fold Poincare map on the section at q.

    Columns are central differences along an orthonormal section basis.
    With ``method="chain"`` (valid at a fixed point of one step) the
    single-step Jacobian is raised to the power ``steps``; this avoids the
    loss of the contracting directions to cancellation that the direct
    difference of the composed map suffers.  ``method="direct"``
    differences the composed map itself.
    """
    basis = section_tangent_basis(q, active, partner)
    y = q.flat()
    n_diff = 1 if method == "chain" else steps
    if method == "chain":
        image = poincare_step(q, active=active)
        gap = float(np.max(np.abs(image.flat() - y)))
        if gap > 1e-8:
            raise ConstraintError(f"chain rule needs a fixed point, step moves q by {gap:.2e}")
    elif method != "direct":
        raise ValueError(f"unknown method {method!r}")
    cols = []
    for b in basis.T:
        plus = poincare_return(CostateTriple.from_flat(y + step * b, q.lambda_cost), n_diff, active)
        minus = poincare_return(CostateTriple.from_flat(y - step * b, q.lambda_cost), n_diff, active)
        cols.append(basis.T @ (plus.flat() - minus.flat()) / (2 * step))
    jac = np.array(cols).T
    return np.linalg.matrix_power(jac, steps) if method == "chain" else jac


# ---------------------------------------------------------------------------
# edge control subsystem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EdgeState:
    s: float
    x: float
    y: float
    l1: float
    l2: float
    l3: float
    u_edge: float = 0.5
    lambda_cost: float = -1.0

    def __post_init__(self):
        if not self.y > 0:
            raise StarViolation(f"edge state needs y > 0, got {self.y!r}")
        if not abs(self.x) < 1 / SQRT3:
            raise StarViolation(f"edge state needs |x| < 1/sqrt3, got {self.x!r}")
        if not abs(self.u_edge) <= 0.5:
            raise ValueError("u_edge must lie in [-1/2, 1/2]")

    @property
    def array(self) -> np.ndarray:
        return np.array([self.s, self.x, self.y, self.l1, self.l2, self.l3])


def edge_control(u_edge: float) -> ControlVector:
    return ControlVector(0.0, 0.5 + u_edge, 0.5 - u_edge)


def edge_rhs(v: np.ndarray, u_edge: float, lambda_cost: float) -> np.ndarray:
    _, x, y, l1, l2, l3 = v
    den = -1.0 + 2.0 * SQRT3 * x * u_edge
    f2 = 2.0 * SQRT3 * y * y * u_edge / den
    dl1 = l2 * 12.0 * y * y * u_edge**2 / den**2 - 2.0 * lambda_cost * x / y
    dl2 = (l3 / y**2 - l1 - l2 * 4.0 * SQRT3 * y * u_edge / den
           + lambda_cost * x * x / y**2)
    return np.array([1.0 / y, y, f2, dl1, dl2, 0.0])


def edge_hamiltonian(es: EdgeState) -> float:
    den = -1.0 + 2.0 * SQRT3 * es.x * es.u_edge
    f2 = 2.0 * SQRT3 * es.y**2 * es.u_edge / den
    return (es.l1 * es.y + es.l2 * f2 + es.l3 / es.y
            + es.lambda_cost * es.x**2 / es.y)


def _edge_choice(l2: float, current: float) -> float:
    if l2 > 0:
        return -0.5
    if l2 < 0:
        return 0.5
    return current


def edge_system_step(es: EdgeState, dt: float, rtol: float = 1e-12,
                     atol: float = 1e-13) -> EdgeState:
    """Advance the edge system by dt, switching u_edge where lambda2 changes sign."""
    v = es.array
    t, t_end = 0.0, float(dt)
    u = _edge_choice(es.l2, es.u_edge)
    lam = es.lambda_cost
    while t < t_end:
        def wall(_, vv):
            return min(1 / SQRT3 - abs(vv[1]), vv[2])
        wall.terminal = True

        def sign_change(_, vv):
            return vv[4]
        sign_change.terminal = True
        sign_change.direction = 1 if u > 0 else -1
        sol = solve_ivp(lambda _, vv: edge_rhs(vv, u, lam), (t, t_end), v,
                        method="DOP853", rtol=rtol, atol=atol,
                        events=[wall, sign_change])
        v = sol.y[:, -1]
        t = float(sol.t[-1])
        if len(sol.t_events[0]):
            raise StarViolation("edge trajectory left the range restrictions", t)
        if len(sol.t_events[1]):
            u = -u
            continue
        break
    return EdgeState(*(float(c) for c in v), u_edge=u, lambda_cost=lam)


def abnormal_edge_costate(x: float, y: float) -> CostateTriple:
    """The abnormal (lambda_cost = 0) costate along an edge trajectory."""
    lam_r = np.array([x, y * y - x * x, 1.0])
    lam1 = np.array([-x, x * x, -1.0])
    return CostateTriple.from_vecs(phi_vec(complex(x, y)), lam1, lam_r, 0.0)


def abnormal_edge_residual(x: float, y: float, u_edge: float) -> dict[str, float]:
    """Residuals of the full costate ODEs and of H for the abnormal edge costate."""
    st = abnormal_edge_costate(x, y)
    zu = _control_array(edge_control(u_edge))
    dx_dt = y
    dy_dt = 2.0 * SQRT3 * y * y * u_edge / (-1.0 + 2.0 * SQRT3 * x * u_edge)
    d_lam_r = np.array([dx_dt, 2 * y * dy_dt - 2 * x * dx_dt, 0.0])
    d_lam1 = np.array([-dx_dt, 2 * x * dx_dt, 0.0])
    dx, dl1, dlr = rhs(st, zu)
    return {
        "X": float(np.max(np.abs(dx - _phi_velocity(x, y, dx_dt, dy_dt)))),
        "Lambda1": float(np.max(np.abs(dl1 - d_lam1))),
        "LambdaR": float(np.max(np.abs(dlr - d_lam_r))),
        "H": abs(hamiltonian(st, zu)),
    }


def _phi_velocity(x: float, y: float, dx: float, dy: float) -> np.ndarray:
    """d/dt Phi(x + iy) for a path with velocity (dx, dy)."""
    return np.array([dx / y - x * dy / y**2,
                     -(2 * x * dx + 2 * y * dy) / y + (x * x + y * y) * dy / y**2,
                     -dy / y**2])
