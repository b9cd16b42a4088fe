"""Hyperboloid (w, b, c) coordinates for the circular-control system.

After the Cayley transform an element of sl2(R) becomes [[i t, z], [conj z, -i t]]
with z = (b + c)/2 + i a and t = (b - c)/2.  The state and costates are
written as

    X       : t = -<w>,                 z = w
    Lambda1 : t = d1 <b>_eps,            z = d1 b
    LambdaR : t = -Re(conj(c) w)/<w>,    z = c

where <z>_eps = sqrt(eps + |z|^2) and <z> = <z>_1, so det X = 1 and
<X, LambdaR> = 0 hold identically.  The circular control is the unit
complex number z* maximizing the Hamiltonian, found from a quadratic
whose roots lie on the unit circle.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import CostateTriple
from .errors import ConventionViolation, DegenerateControl, StarViolation

DEGENERATE_C = 1e-14
BRANCH_TOL = 1e-10


@dataclass(frozen=True)
class HyperboloidParams:
    rho: float = 1.0
    d1: float = 1.5
    eps: int = 1
    lambda_cost: float = -1.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.eps not in (-1, 0, 1):
            raise ValueError("eps must be -1, 0 or 1")
        if self.lambda_cost > 0:
            raise ValueError("lambda_cost must be nonpositive")


@dataclass(frozen=True)
class WBCState:
    w: complex
    b: complex
    c: complex
    params: HyperboloidParams = HyperboloidParams()

    def __post_init__(self):
        if abs(self.b) ** 2 < -self.params.eps - 1e-12:
            raise ValueError("|b|^2 must be at least -eps")

    @property
    def array(self) -> np.ndarray:
        return np.array([self.w.real, self.w.imag, self.b.real, self.b.imag,
                         self.c.real, self.c.imag])

    @classmethod
    def from_array(cls, v, params: HyperboloidParams) -> "WBCState":
        return cls(complex(v[0], v[1]), complex(v[2], v[3]), complex(v[4], v[5]), params)


@dataclass(frozen=True)
class ControlRoot:
    z_star: complex
    z_tilde: complex
    other: complex

    def __post_init__(self):
        if abs(abs(self.z_star) - 1.0) > 1e-10:
            raise ValueError("control root must lie on the unit circle")


def hyp_norm(z: complex, eps: int = 1) -> float:
    """<z>_eps = sqrt(eps + |z|^2)."""
    return math.sqrt(max(eps + abs(z) ** 2, 0.0))


def real_pair(z1: complex, z2: complex) -> float:
    """Re(conj(z1) z2)."""
    return (z1.conjugate() * z2).real


def _to_sl2(t: float, z: complex) -> np.ndarray:
    return np.array([z.imag, z.real + t, z.real - t])


def _from_sl2(v: np.ndarray) -> tuple[float, complex]:
    a, b, c = v
    return (b - c) / 2.0, complex((b + c) / 2.0, a)


def star_mu(w: complex, z: complex, rho: float) -> float:
    return hyp_norm(w) - rho * real_pair(w, z)


def control_sl2(z: complex, rho: float) -> np.ndarray:
    """Circular control matrix with alpha = 1, beta = rho, as an sl2 triple."""
    return _to_sl2(-1.0, rho * z)


def from_wbc(ws: WBCState) -> CostateTriple:
    p = ws.params
    nw = hyp_norm(ws.w)
    x = _to_sl2(-nw, ws.w)
    lam1 = _to_sl2(p.d1 * hyp_norm(ws.b, p.eps), p.d1 * ws.b)
    lam_r = _to_sl2(-real_pair(ws.c, ws.w) / nw, ws.c)
    return CostateTriple.from_vecs(x, lam1, lam_r, p.lambda_cost)


def to_wbc(st: CostateTriple, params: HyperboloidParams, tol: float = 1e-8) -> WBCState:
    t_x, w = _from_sl2(st.X.vec)
    if t_x >= 0 or abs(t_x + hyp_norm(w)) > tol:
        raise ConventionViolation("X is not on the lower branch t = -<w>")
    t_1, z_1 = _from_sl2(st.Lambda1.vec)
    det1 = t_1**2 - abs(z_1) ** 2
    if abs(det1 - params.eps * params.d1**2) > tol:
        raise ConventionViolation(f"det Lambda1 = {det1!r} differs from eps d1^2")
    if params.d1 == 0:
        b = 0j
    else:
        b = z_1 / params.d1
        if t_1 / params.d1 < -tol:
            raise ConventionViolation("Lambda1 lies on the branch <J, Lambda1> < 0")
    t_r, c = _from_sl2(st.LambdaR.vec)
    if abs(t_r + real_pair(c, w) / hyp_norm(w)) > tol:
        raise ConventionViolation("LambdaR is not orthogonal to X")
    return WBCState(w, b, c, params)


def angular_momentum(ws: WBCState) -> float:
    p = ws.params
    return 2 * p.d1 * hyp_norm(ws.b, p.eps) - 2 * real_pair(ws.w, ws.c) / hyp_norm(ws.w)


def hamiltonian_at(ws: WBCState, z: complex) -> float:
    p = ws.params
    nw = hyp_norm(ws.w)
    mu = star_mu(ws.w, z, p.rho)
    if not mu > 0:
        raise StarViolation(f"star condition fails: mu = {mu:.3e}")
    return (2 * p.d1 * real_pair(ws.w, ws.b)
            + (2 * p.d1 * hyp_norm(ws.b, p.eps) + 3 * p.lambda_cost) * nw
            - real_pair(ws.w - p.rho * nw * z, ws.c) / (mu * nw))


def quadratic_coefficients(w_tilde: complex, rho: float) -> tuple[complex, complex, complex]:
    xi0 = 2 + abs(w_tilde) ** 2 - w_tilde**2
    xi1 = 2 * rho * (w_tilde - w_tilde.conjugate()) * hyp_norm(w_tilde)
    return xi0, xi1, -xi0.conjugate()


def optimal_control_root(ws: WBCState, check_branch: bool = True) -> ControlRoot:
    if abs(ws.c) < DEGENERATE_C:
        raise DegenerateControl("c = 0: the control equation has no unique root")
    phase = ws.c / abs(ws.c)
    w_tilde = phase.conjugate() * ws.w
    xi0, xi1, _ = quadratic_coefficients(w_tilde, ws.params.rho)
    disc = (xi1 * xi1 + 4 * abs(xi0) ** 2).real
    root = cmath.sqrt(disc)
    z_plus = (xi1 + root) / (2 * xi0.conjugate())
    z_minus = (xi1 - root) / (2 * xi0.conjugate())
    z_plus /= abs(z_plus)
    z_minus /= abs(z_minus)
    out = ControlRoot(phase * z_plus, z_plus, phase * z_minus)
    if check_branch:
        h_plus = _safe_h(ws, out.z_star)
        h_minus = _safe_h(ws, out.other)
        if h_plus < h_minus - BRANCH_TOL:
            raise ConventionViolation(
                f"root branch mismatch: H(+) = {h_plus:.6g} < H(-) = {h_minus:.6g}")
    return out


def _safe_h(ws: WBCState, z: complex) -> float:
    try:
        return hamiltonian_at(ws, z)
    except StarViolation:
        return -math.inf


def hamiltonian(ws: WBCState) -> float:
    return hamiltonian_at(ws, optimal_control_root(ws).z_star)


def wbc_rhs(ws: WBCState, z: complex | None = None) -> tuple[complex, complex, complex]:
    """(w', b', c') with the maximizing control, or with a supplied control z."""
    p = ws.params
    w, b, c = ws.w, ws.b, ws.c
    if z is None:
        z = optimal_control_root(ws).z_star
    nw = hyp_norm(w)
    nb = hyp_norm(b, p.eps)
    mu = star_mu(w, z, p.rho)
    if not mu > 0:
        raise StarViolation(f"star condition fails: mu = {mu:.3e}")
    dw = 1j * (w - p.rho * nw * z) / mu
    db = 2j * (nb * w + b * nw)
    if abs(c) > 0:
        xi0 = 2 + abs(w) ** 2 - (w * c.conjugate() / abs(c)) ** 2
        lead = 1j * (1 - p.rho**2) * real_pair(c * xi0, z) / (2 * nw * mu**2) * z
    else:
        lead = 0j
    dc = lead - 1j * ((2 * p.d1 * nb + 3 * p.lambda_cost) * w + 2 * b * p.d1 * nw)
    return dw, db, dc


@dataclass
class WBCRun:
    times: np.ndarray
    states: list[WBCState]
    stop_reason: str = "t_max"

    @property
    def abs_w(self) -> np.ndarray:
        return np.array([abs(s.w) for s in self.states])


def integrate_wbc(ws: WBCState, t_max: float, n_samples: int = 401,
                  rtol: float = 1e-11, atol: float = 1e-12,
                  stop_on_degenerate: bool = False) -> WBCRun:
    """Integrate the hyperboloid ODE with the maximizing control."""
    params = ws.params

    def fun(_, v):
        st = WBCState.from_array(v, params)
        dw, db, dc = wbc_rhs(st)
        return [dw.real, dw.imag, db.real, db.imag, dc.real, dc.imag]

    def c_small(_, v):
        return math.hypot(v[4], v[5]) - 1e-9
    c_small.terminal = True

    grid = np.linspace(0.0, t_max, n_samples)
    reason = "t_max"
    try:
        sol = solve_ivp(fun, (0.0, t_max), ws.array, method="DOP853", rtol=rtol,
                        atol=atol, t_eval=grid, events=[c_small])
    except (StarViolation, ConventionViolation) as exc:
        raise type(exc)(f"{exc} during integration") from exc
    if sol.status == 1:
        reason = "c_vanished"
        if not stop_on_degenerate:
            raise DegenerateControl(f"c reached 0 at t = {sol.t_events[0][0]:.6g}")
    states = [WBCState.from_array(v, params) for v in sol.y.T]
    return WBCRun(sol.t, states, reason)


# ---------------------------------------------------------------------------
# neck chart for the split case
# ---------------------------------------------------------------------------

def neck_from_b(b: complex) -> tuple[float, float]:
    """(r, theta) with b = exp(i theta) sqrt(r^2 + 1), split case."""
    if abs(b) < 1:
        raise ValueError("split chart needs |b| >= 1")
    return math.sqrt(abs(b) ** 2 - 1), cmath.phase(b)


def b_from_neck(r: float, theta: float) -> complex:
    if r < 0:
        raise ValueError("b chart covers only r >= 0")
    return cmath.exp(1j * theta) * math.sqrt(r * r + 1)


def neck_lambda1(r: float, theta: float, d1: float) -> np.ndarray:
    return _to_sl2(d1 * r, d1 * cmath.exp(1j * theta) * math.sqrt(r * r + 1))


def neck_rhs(w: complex, r: float, theta: float) -> tuple[float, float]:
    u = cmath.exp(1j * theta)
    s = math.sqrt(1 + r * r)
    return 2 * s * real_pair(1j * w, u), 2 * hyp_norm(w) + 2 * r * real_pair(w, u) / s


def neck_active(b: complex, eps: int) -> bool:
    """The neck chart replaces b in the split case near |b| = 1."""
    return eps == -1 and abs(b) ** 2 - 1 < 0.25


# ---------------------------------------------------------------------------
# singular-locus truncation
# ---------------------------------------------------------------------------

SINGULAR_PARAMS = HyperboloidParams(rho=1.0, d1=1.5, eps=1, lambda_cost=-1.0)


def truncated_rhs(w: complex, b: complex, c: complex, rho: float) -> tuple[complex, complex, complex]:
    """Leading-order system near the singular locus."""
    return -1j * rho * c / abs(c), 2j * w, -3j * b


def wbc_to_fuller(w: complex, b: complex, c: complex, rho: float) -> tuple[complex, complex, complex]:
    """(z1, z2, z3) = (w/rho, -i b/(2 rho), c/(6 rho))."""
    return w / rho, -1j * b / (2 * rho), c / (6 * rho)


def fuller_to_wbc(z1: complex, z2: complex, z3: complex, rho: float) -> tuple[complex, complex, complex]:
    return rho * z1, 2j * rho * z2, 6 * rho * z3


@dataclass(frozen=True)
class TruncationReport:
    radii: tuple[float, ...]
    residuals: dict[str, tuple[float, ...]]
    slopes: dict[str, float]


def truncation_error_probe(w0: complex, b0: complex, c0: complex,
                           radii=(1e-1, 1e-2, 1e-3, 1e-4), rho: float = 1.0) -> TruncationReport:
    """Residual between full and truncated fields on (r w0, r^2 b0, r^3 c0)."""
    params = replace(SINGULAR_PARAMS, rho=rho)
    res = {"w": [], "b": [], "c": []}
    for r in radii:
        w, b, c = r * w0, r * r * b0, r**3 * c0
        full = wbc_rhs(WBCState(w, b, c, params))
        trunc = truncated_rhs(w, b, c, rho)
        for key, f, t in zip("wbc", full, trunc):
            res[key].append(abs(f - t))
    logs = np.log(np.asarray(radii))
    slopes = {k: float(np.polyfit(logs, np.log(np.asarray(v)), 1)[0]) for k, v in res.items()}
    return TruncationReport(tuple(radii), {k: tuple(v) for k, v in res.items()}, slopes)


# ---------------------------------------------------------------------------
# abnormal branch and chaos experiments
# ---------------------------------------------------------------------------

def lambda_r_norm(ws: WBCState) -> float:
    """<LambdaR, LambdaR> = 2 (|c|^2 - Re(conj(c) w)^2 / <w>^2)."""
    return 2 * (abs(ws.c) ** 2 - real_pair(ws.c, ws.w) ** 2 / hyp_norm(ws.w) ** 2)


def abnormal_zero_energy_state(w: complex, b: complex, c: complex, eps: int = 1) -> WBCState:
    """Abnormal state (rho = 1, lambda_cost = 0) with d1 chosen so that H = 0.

    H is affine in d1, namely d1 * 2 (Re(conj(w) b) + <b>_eps <w>) plus the
    d1-free control term, so the zero-energy level is reached by one division.
    """
    probe = HyperboloidParams(rho=1.0, d1=0.0, eps=eps, lambda_cost=0.0)
    slope = 2 * (real_pair(w, b) + hyp_norm(b, eps) * hyp_norm(w))
    if abs(slope) < 1e-12:
        raise ValueError("H does not depend on d1 at this point")
    offset = hamiltonian(WBCState(w, b, c, probe))
    return WBCState(w, b, c, replace(probe, d1=-offset / slope))


def abnormal_cubic_residual(ws: WBCState, t_max: float = 1.0, n: int = 201) -> float:
    """Max deviation of <LambdaR, LambdaR>(t) from its least-squares cubic.

    The cubic law holds on the zero level of the Hamiltonian; see
    ``abnormal_zero_energy_state``.
    """
    if ws.params.rho != 1.0 or ws.params.lambda_cost != 0.0:
        raise ValueError("abnormal branch needs rho = 1 and lambda_cost = 0")
    run = integrate_wbc(ws, t_max, n_samples=n, rtol=1e-13, atol=1e-14)
    vals = np.array([lambda_r_norm(s) for s in run.states])
    coeffs = np.polyfit(run.times, vals, 3)
    return float(np.max(np.abs(np.polyval(coeffs, run.times) - vals)))


def state_with_angular_momentum(w0: complex, c0: complex, a0: float,
                                params: HyperboloidParams, b_sign: int = 1) -> WBCState:
    """Choose a real b so that the angular momentum equals ``a0``."""
    nb = (a0 + 2 * real_pair(w0, c0) / hyp_norm(w0)) / (2 * params.d1)
    sq = nb * nb - params.eps
    if sq < 0 or nb < 0:
        raise ValueError(f"no real b gives angular momentum {a0}")
    return WBCState(w0, complex(b_sign * math.sqrt(sq), 0.0), c0, params)


@dataclass
class ChaosRun:
    a0: float
    times: np.ndarray
    abs_w: tuple[np.ndarray, np.ndarray]
    stop_reason: str

    @property
    def divergence(self) -> np.ndarray:
        n = min(len(self.abs_w[0]), len(self.abs_w[1]))
        return np.abs(self.abs_w[0][:n] - self.abs_w[1][:n])


def chaos_sweep(a0: float, w0s=(1.5, 1.495), c0: complex = 0.5, rho: float = 1.1,
                d1: float = 1.5, eps: int = 1, t_max: float = 40.0,
                n_samples: int = 2001) -> ChaosRun:
    """Two nearby trajectories with the same angular momentum; |w| over time."""
    params = HyperboloidParams(rho=rho, d1=d1, eps=eps, lambda_cost=-1.0)
    runs = []
    reason = "t_max"
    for w0 in w0s:
        st = state_with_angular_momentum(complex(w0), complex(c0), a0, params)
        try:
            run = integrate_wbc(st, t_max, n_samples, stop_on_degenerate=True)
        except (StarViolation, ConventionViolation) as exc:
            raise type(exc)(f"chaos run from w0 = {w0}: {exc}") from exc
        if run.stop_reason != "t_max":
            reason = run.stop_reason
        runs.append(run)
    n = min(len(r.times) for r in runs)
    return ChaosRun(a0, runs[0].times[:n], (runs[0].abs_w[:n], runs[1].abs_w[:n]), reason)
