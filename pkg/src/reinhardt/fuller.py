"""Fuller systems with circular and with triangular control.

Both systems share the chain z3' = z2, z2' = z1, z1' = z0.  With circular
control z0 = -i z3/|z3|; with triangular control z0 = -i u where u is one
of the cube roots of unity, chosen to maximize

    H_F(z, u) = Re(conj(z1) i z2) + Re(conj(u) z3).

The circular system is integrated numerically and projected to the base
space of moduli (|z2|/|z1|^2, |z3|/|z1|^3).  The triangular system is
solved in closed form on each constant-control segment, so switching
times are roots of explicit cubics; the first-return map to the walls
z3 in R<=0 * {1, zeta, zeta^2} is studied in cell coordinates
(r2, psi, theta2).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConstraintError, SingularApproach, WallHit

SQRT3 = math.sqrt(3.0)
ZETA = complex(-0.5, SQRT3 / 2)
CONTROLS = (1 + 0j, ZETA, ZETA * ZETA)
WALL_TOL = 1e-9
LEX_TOL = 1e-12
ZERO_COEFF_TOL = 1e-11
SEXTIC = (1.0, -5.0, -7.0, -5.0, -7.0, -5.0, 1.0)  # ascending powers


def real_pair(a: complex, b: complex) -> float:
    """The real inner product Re(conj(a) b) on C = R^2."""
    return (a.conjugate() * b).real


@dataclass(frozen=True)
class FullerState:
    z1: complex
    z2: complex
    z3: complex

    @property
    def array(self) -> np.ndarray:
        return np.array([self.z1, self.z2, self.z3], dtype=complex)

    @classmethod
    def from_array(cls, arr) -> FullerState:
        return cls(complex(arr[0]), complex(arr[1]), complex(arr[2]))

    def real_vector(self) -> np.ndarray:
        a = self.array
        return np.concatenate([a.real, a.imag])

    @classmethod
    def from_real_vector(cls, y) -> FullerState:
        return cls(complex(y[0], y[3]), complex(y[1], y[4]), complex(y[2], y[5]))

    def scaled(self, r: float) -> FullerState:
        """Virial rescaling z_j -> r^j z_j."""
        return FullerState(r * self.z1, r * r * self.z2, r ** 3 * self.z3)

    def rotated(self, w: complex) -> FullerState:
        return FullerState(w * self.z1, w * self.z2, w * self.z3)

    def tau(self) -> FullerState:
        """Time reversal (conj z1, -conj z2, conj z3)."""
        return FullerState(self.z1.conjugate(), -self.z2.conjugate(), self.z3.conjugate())

    def distance(self, other: FullerState) -> float:
        return float(np.max(np.abs(self.array - other.array)))


# ---------------------------------------------------------------------------
# circular control


def circular_hamiltonian(z: FullerState) -> float:
    return real_pair(z.z1, 1j * z.z2) + abs(z.z3)


def circular_angular_momentum(z: FullerState) -> float:
    return abs(z.z2) ** 2 - 2.0 * (z.z1 * z.z3.conjugate()).real


def _circular_rhs(_t, y, wall_tol):
    z1, z2, z3 = complex(y[0], y[3]), complex(y[1], y[4]), complex(y[2], y[5])
    m = abs(z3)
    if m < wall_tol:
        raise WallHit(f"|z3| = {m:.3e} reached the wall z3 = 0")
    z0 = -1j * z3 / m
    return [z0.real, z1.real, z2.real, z0.imag, z1.imag, z2.imag]


@dataclass(frozen=True)
class CircularRun:
    times: np.ndarray
    states: np.ndarray  # (N, 3) complex

    def state(self, i: int) -> FullerState:
        return FullerState.from_array(self.states[i])

    @property
    def final(self) -> FullerState:
        return self.state(-1)


def circular_trajectory(z0: FullerState, t_end: float, n_samples: int = 201,
                        t_start: float = 0.0, rtol: float = 1e-12,
                        atol: float = 1e-14, wall_tol: float = 1e-12) -> CircularRun:
    """Integrate the circular-control system from t_start to t_end."""
    times = np.linspace(t_start, t_end, n_samples)
    if t_end == t_start:
        return CircularRun(times, np.array([z0.array]))

    def wall(_t, y, tol):
        return math.hypot(y[2], y[5]) - 10 * tol
    wall.terminal = True

    sol = solve_ivp(_circular_rhs, (t_start, t_end), z0.real_vector(), method="DOP853",
                    t_eval=times, rtol=rtol, atol=atol, events=wall, args=(wall_tol,))
    if sol.status == 1:
        raise WallHit(f"z3 reached 0 at t = {sol.t_events[0][0]:.12g}")
    if not sol.success:
        raise WallHit(sol.message)
    states = (sol.y[:3] + 1j * sol.y[3:]).T
    return CircularRun(sol.t, states)


def fuller_flow_circular(z0: FullerState, t: float, t_start: float = 0.0,
                         rtol: float = 1e-12, atol: float = 1e-14) -> FullerState:
    """State at time t of the circular-control system started at z0 at t_start."""
    return circular_trajectory(z0, t, 2, t_start, rtol, atol).final


def log_spiral(t: float) -> FullerState:
    """The outward logarithmic spiral; H_F and A_F vanish on it."""
    if t <= 0:
        raise ValueError("the spiral is parameterized by t > 0")
    power = lambda a: cmath.exp(a * math.log(t))  # noqa: E731
    return FullerState((2 - 1j) * (3 - 1j) * power(1 - 1j) / 10,
                       (3 - 1j) * power(2 - 1j) / 10,
                       power(3 - 1j) / 10)


def virial_action(z: FullerState, angle: float, scale: float) -> FullerState:
    """(e^{i angle}, scale) acting on a state; time is rescaled by ``scale``.

    If z(t) solves the circular system then so does
    e^{i angle} (scale z1(t/scale), scale^2 z2(t/scale), scale^3 z3(t/scale)).
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    return z.scaled(scale).rotated(cmath.exp(1j * angle))


# ---------------------------------------------------------------------------
# base space of the circular system


@dataclass(frozen=True)
class BaseSpacePoint:
    x2: float
    x3: float
    eps2: int = 1
    eps3: int = 1

    def __post_init__(self):
        if self.eps2 not in (-1, 1) or self.eps3 not in (-1, 1):
            raise ConstraintError("signs must be +1 or -1")
        if not in_base_domain(self.x2, self.x3):
            raise ConstraintError(f"({self.x2}, {self.x3}) lies outside the base domain")


def in_base_domain(x2: float, x3: float, tol: float = 1e-12) -> bool:
    return x2 > 0 and x3 > 0 and x3 <= x2 * (1 + tol) and x2 * x2 / 2 <= x3 * (1 + tol)


def _base_trig(x2: float, x3: float) -> tuple[float, float, float, float]:
    sin2 = min(x3 / x2, 1.0)
    cos3 = min(x2 * x2 / (2 * x3), 1.0)
    return sin2, math.sqrt(1 - sin2 * sin2), cos3, math.sqrt(1 - cos3 * cos3)


def base_field(p: BaseSpacePoint) -> tuple[float, float]:
    """The vector field (v2, v3) on the base space, equal to |z1| d(pi)(f)."""
    sin2, cos2, cos3, sin3 = _base_trig(p.x2, p.x3)
    e2, e3 = p.eps2, p.eps3
    v2 = e2 * cos2 - 2 * p.x2 * e3 * sin3
    v3 = p.x2 * (e2 * cos2 * cos3 + e3 * sin2 * sin3) - 3 * p.x3 * e3 * sin3
    return v2, v3


def base_projection(z: FullerState) -> BaseSpacePoint:
    """Moduli (|z2|/|z1|^2, |z3|/|z1|^3) and the signs of Re(z2 conj z1), Im(z3 conj z1)."""
    m1 = abs(z.z1)
    e2 = 1 if (z.z2 * z.z1.conjugate()).real >= 0 else -1
    e3 = 1 if (z.z3 * z.z1.conjugate()).imag >= 0 else -1
    return BaseSpacePoint(abs(z.z2) / m1 ** 2, abs(z.z3) / m1 ** 3, e2, e3)


def base_moduli(z: FullerState) -> tuple[float, float]:
    m1 = abs(z.z1)
    return abs(z.z2) / m1 ** 2, abs(z.z3) / m1 ** 3


def fiber_section(p: BaseSpacePoint) -> FullerState:
    """The lift with z1 = 1 on the zero set of H_F and A_F."""
    sin2, cos2, cos3, sin3 = _base_trig(p.x2, p.x3)
    return FullerState(1.0 + 0j,
                       p.x2 * complex(p.eps2 * cos2, sin2),
                       p.x3 * complex(cos3, p.eps3 * sin3))


STABLE_EQUILIBRIUM = (2 / math.sqrt(10), math.sqrt(2) / 5)
CORNER_EQUILIBRIUM = (2.0, 2.0)


def base_jacobian(p: BaseSpacePoint, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of (v2, v3) with the signs held fixed."""
    jac = np.empty((2, 2))
    for col, (dx2, dx3) in enumerate(((step, 0.0), (0.0, step))):
        plus = base_field(BaseSpacePoint(p.x2 + dx2, p.x3 + dx3, p.eps2, p.eps3))
        minus = base_field(BaseSpacePoint(p.x2 - dx2, p.x3 - dx3, p.eps2, p.eps3))
        jac[:, col] = (np.array(plus) - np.array(minus)) / (2 * step)
    return jac


def base_jacobian_eigs(sign: int = 1, step: float = 1e-6) -> tuple[complex, complex]:
    """Eigenvalues at the interior equilibrium with eps2 = eps3 = sign."""
    p = BaseSpacePoint(*STABLE_EQUILIBRIUM, sign, sign)
    ev = np.linalg.eigvals(base_jacobian(p, step))
    ev = sorted(ev, key=lambda w: w.imag)
    return complex(ev[0]), complex(ev[1])


def base_streamline(p: BaseSpacePoint, dt: float = 0.01, steps: int = 2000) -> np.ndarray:
    """Streamline of (v2, v3) from p with the signs held fixed, until it leaves the domain.

    Classical fourth-order Runge-Kutta with a fixed step; used for pictures.
    """
    def field(x):
        return np.array(base_field(BaseSpacePoint(x[0], x[1], p.eps2, p.eps3)))

    x = np.array([p.x2, p.x3])
    out = [x.copy()]
    for _ in range(steps):
        try:
            k1 = field(x)
            k2 = field(x + dt / 2 * k1)
            k3 = field(x + dt / 2 * k2)
            k4 = field(x + dt * k3)
        except ConstraintError:
            break
        nxt = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not in_base_domain(*nxt):
            break
        x = nxt
        out.append(x.copy())
    return np.array(out)


def base_domain_outline(n: int = 200) -> np.ndarray:
    """Closed outline of x2^2/2 <= x3 <= x2, 0 < x2 <= 2."""
    x2 = np.linspace(0.0, 2.0, n)
    return np.vstack([np.column_stack([x2, x2 * x2 / 2]),
                      np.column_stack([x2[::-1], x2[::-1]])])


# ---------------------------------------------------------------------------
# the special circular trajectory through (1, 2i, 2)

SPECIAL_START = FullerState(1 + 0j, 2j, 2 + 0j)


def special_crossing_time(t_max: float = 3.0) -> float:
    """First positive time at which the image meets the edge x2 = x3.

    On the zero set of H_F the edge is where Re(z2 conj z1) changes sign.
    """
    def edge(_t, y, _tol):
        z1, z2 = complex(y[0], y[3]), complex(y[1], y[4])
        return (z2 * z1.conjugate()).real
    edge.terminal = True
    edge.direction = 0
    t0 = 1e-3
    y0 = fuller_flow_circular(SPECIAL_START, t0).real_vector()
    sol = solve_ivp(_circular_rhs, (t0, t_max), y0, method="DOP853", rtol=1e-12,
                    atol=1e-14, events=edge, args=(1e-12,))
    if not sol.t_events[0].size:
        raise ValueError("no crossing of x2 = x3 before t_max")
    return float(sol.t_events[0][0])


def special_trajectory(t_max: float = 40.0, n_samples: int = 801) -> tuple[np.ndarray, np.ndarray]:
    """Times and base-space moduli (x2, x3) of the special trajectory for t >= 0."""
    run = circular_trajectory(SPECIAL_START, t_max, n_samples)
    mod = np.array([base_moduli(run.state(i)) for i in range(len(run.times))])
    return run.times, mod


# ---------------------------------------------------------------------------
# triangular control: closed-form segments and switching cubics


def triangular_segment(z0: FullerState, u: complex, t: float) -> FullerState:
    """Exact solution after time t with constant control u."""
    z1, z2, z3 = z0.z1, z0.z2, z0.z3
    return FullerState(-1j * t * u + z1,
                       -1j * t * t * u / 2 + z1 * t + z2,
                       -1j * t ** 3 * u / 6 + z1 * t * t / 2 + z2 * t + z3)


def triangular_hamiltonian(z: FullerState, u: complex) -> float:
    return real_pair(z.z1, 1j * z.z2) + real_pair(u, z.z3)


def max_hamiltonian(z: FullerState) -> float:
    return max(triangular_hamiltonian(z, u) for u in CONTROLS)


def control_vector(z: FullerState, u: complex) -> tuple[float, float, float]:
    """(Re<z3, u>, Re<z2, u>, Re<z1, u>), compared lexicographically."""
    return real_pair(z.z3, u), real_pair(z.z2, u), real_pair(z.z1, u)


def _lex_greater(a, b, tol) -> int:
    """+1 if a > b, -1 if a < b, 0 if equal, entrywise to tolerance."""
    for x, y in zip(a, b):
        if x > y + tol:
            return 1
        if x < y - tol:
            return -1
    return 0


def first_control_index(z: FullerState, tol: float = LEX_TOL) -> int:
    """Index k of the first control zeta^k, by lexicographic maximization.

    A two-way tie {zeta^i, zeta^(i+1)} resolves to zeta^i.
    """
    scale = max(1.0, float(np.max(np.abs(z.array))))
    vecs = [control_vector(z, u) for u in CONTROLS]
    best = [0]
    for k in (1, 2):
        cmp = _lex_greater(vecs[k], vecs[best[0]], tol * scale)
        if cmp > 0:
            best = [k]
        elif cmp == 0:
            best.append(k)
    if len(best) == 3:
        raise ConstraintError("all three controls tie, so z is zero")
    if len(best) == 1:
        return best[0]
    i, j = sorted(best)
    return i if (j - i) % 3 == 1 else j


def first_control(z: FullerState, tol: float = LEX_TOL) -> complex:
    return CONTROLS[first_control_index(z, tol)]


def switching_cubic(z: FullerState, u: complex, v: complex) -> np.ndarray:
    """Ascending coefficients of Re(conj(u - v) z3(t)) / sqrt(3) under control u."""
    w = (u - v).conjugate() / SQRT3
    return np.array([(w * z.z3).real, (w * z.z2).real, (w * z.z1).real / 2,
                     (w * (-1j * u)).real / 6])


def _cubic_value(c, t):
    return ((c[3] * t + c[2]) * t + c[1]) * t + c[0]


def _polish(c, roots, steps: int = 2):
    deriv = np.array([c[1], 2 * c[2], 3 * c[3]])
    out = []
    for t in roots:
        for _ in range(steps):
            d = (deriv[2] * t + deriv[1]) * t + deriv[0]
            if d == 0:
                break
            t = t - _cubic_value(c, t) / d
        out.append(t)
    return out


def real_roots(coeffs) -> list[float]:
    """Real roots of a polynomial of degree <= 3 (ascending coefficients).

    Cubics use the discriminant split (trigonometric form for three real
    roots, Cardano otherwise) followed by two Newton steps.
    """
    c = [float(x) for x in coeffs]
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    deg = len(c) - 1
    if deg <= 0:
        return []
    if deg == 1:
        return [-c[0] / c[1]]
    if deg == 2:
        a, b, cc = c[2], c[1], c[0]
        disc = b * b - 4 * a * cc
        if disc < 0:
            return []
        s = math.sqrt(disc)
        q = -0.5 * (b + math.copysign(s, b))
        roots = [q / a] if q == 0 else [q / a, cc / q]
        return sorted(roots)
    a3, a2, a1, a0 = c[3], c[2], c[1], c[0]
    b, cc, d = a2 / a3, a1 / a3, a0 / a3
    p = cc - b * b / 3
    q = 2 * b ** 3 / 27 - b * cc / 3 + d
    shift = -b / 3
    disc = (q / 2) ** 2 + (p / 3) ** 3
    if disc > 0:
        s = math.sqrt(disc)
        u = math.copysign(abs(-q / 2 + s) ** (1 / 3), -q / 2 + s)
        v = math.copysign(abs(-q / 2 - s) ** (1 / 3), -q / 2 - s)
        roots = [u + v + shift]
    elif p == 0:
        roots = [shift] * 3
    else:
        m = 2 * math.sqrt(-p / 3)
        arg = max(-1.0, min(1.0, 3 * q / (p * m)))
        phi = math.acos(arg) / 3
        roots = [m * math.cos(phi - 2 * math.pi * k / 3) + shift for k in range(3)]
    ext = np.array([a0, a1, a2, a3])
    return sorted(_polish(ext, roots))


def cubic_discriminant(coeffs) -> float:
    """Discriminant of a0 + a1 t + a2 t^2 + a3 t^3 (or of the quadratic/linear truncation)."""
    c = list(coeffs)
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    if len(c) == 4:
        d, cc, b, a = c
        return (18 * a * b * cc * d - 4 * b ** 3 * d + b * b * cc * cc
                - 4 * a * cc ** 3 - 27 * a * a * d * d)
    if len(c) == 3:
        cc, b, a = c
        return b * b - 4 * a * cc
    return 1.0


def zero_multiplicity(coeffs, tol: float = ZERO_COEFF_TOL) -> int:
    """Multiplicity of t = 0 as a root, judged relative to the coefficient scale."""
    scale = max(abs(x) for x in coeffs)
    m = 0
    while m < len(coeffs) - 1 and abs(coeffs[m]) <= tol * scale:
        m += 1
    return m


def reduced_cubic(coeffs, tol: float = ZERO_COEFF_TOL) -> np.ndarray:
    """Divide out the root at t = 0: chi / t^m."""
    m = zero_multiplicity(coeffs, tol)
    return np.asarray(coeffs[m:], dtype=float)


def first_sign_change(coeffs, tol: float = ZERO_COEFF_TOL) -> float:
    """Least positive root at which the polynomial changes sign (inf if none).

    Double roots (tangencies) are skipped since the control does not switch
    there.
    """
    red = reduced_cubic(coeffs, tol)
    roots = [t for t in real_roots(red) if t > 0]
    if not roots:
        return math.inf
    scale = max(1.0, max(roots))
    i = 0
    while i < len(roots):
        j = i
        while j + 1 < len(roots) and abs(roots[j + 1] - roots[i]) < 1e-7 * scale:
            j += 1
        if (j - i + 1) % 2 == 1:
            return roots[i] if j == i else float(np.mean(roots[i:j + 1]))
        i = j + 1
    return math.inf


@dataclass(frozen=True)
class FullerSwitch:
    """One constant-control arc of the triangular system between walls.

    ``active`` is "A" when the arc ends by switching to the control off the
    starting wall and "B" when it switches to the other control of that wall.
    """
    t_sw: float
    control: int  # index k of zeta^k used on the arc
    next_control: int
    active: str
    start: FullerState
    end: FullerState


def on_wall(z: FullerState, tol: float = WALL_TOL) -> bool:
    scale = max(1.0, abs(z.z3))
    for u in CONTROLS:
        w = z.z3 * u.conjugate()
        if abs(w.imag) <= tol * scale and w.real <= tol * scale:
            return True
    return False


def wall_rotation(z: FullerState, tol: float = WALL_TOL) -> int:
    """The m with zeta^m z3 in R<=0.

    When z3 = 0 every rotation qualifies; the one whose first control is
    zeta is preferred, then zeta^2.
    """
    scale = max(1.0, float(np.max(np.abs(z.array))))
    if abs(z.z3) <= tol * scale:
        ks = [first_control_index(z.rotated(CONTROLS[m])) for m in range(3)]
        for want in (1, 2):
            if want in ks:
                return ks.index(want)
        return 0
    angles = [abs(cmath.phase(-z.z3 * CONTROLS[m])) for m in range(3)]
    return int(np.argmin(angles))


def wall_normalize(z: FullerState) -> FullerState:
    """Rotate by a cube root of unity so that z3 is real and nonpositive."""
    r = z.rotated(CONTROLS[wall_rotation(z)])
    if abs(r.z3.imag) <= WALL_TOL * max(1.0, abs(r.z3)):
        r = FullerState(r.z1, r.z2, complex(r.z3.real, 0.0))
    return r


def fuller_switch(z0: FullerState, check_wall: bool = True) -> FullerSwitch:
    """Follow the first control from z0 to the first positive switching time."""
    if check_wall and not on_wall(z0):
        raise ConstraintError("z3 does not lie on a wall")
    if float(np.max(np.abs(z0.array))) == 0.0:
        raise SingularApproach("the origin is the singular locus")
    k = first_control_index(z0)
    u = CONTROLS[k]
    best = (math.inf, None)
    for j in (k + 1, k + 2):
        j %= 3
        t = first_sign_change(switching_cubic(z0, u, CONTROLS[j]))
        if t < best[0]:
            best = (t, j)
    t_sw, j = best
    if j is None:
        raise SingularApproach("no switch found")
    bound = 10 * max(abs(z0.z1), abs(z0.z2) ** 0.5, abs(z0.z3) ** (1 / 3))
    if not t_sw < bound * (1 + 1e-12):
        raise ConstraintError(f"switching time {t_sw} exceeds the bound {bound}")
    end = triangular_segment(z0, u, t_sw)
    if float(np.max(np.abs(end.array))) == 0.0:
        raise SingularApproach("trajectory met the origin")
    label = "A" if (j + wall_rotation(z0)) % 3 == 0 else "B"
    return FullerSwitch(t_sw, k, j, label, z0, end)


def triangular_trajectory(z0: FullerState, switches: int, samples_per_arc: int = 40
                          ) -> tuple[np.ndarray, np.ndarray]:
    """Times and states (N, 3) of the bang-bang Fuller trajectory through ``switches`` arcs."""
    times, states = [], []
    t0, z = 0.0, z0
    for _ in range(switches):
        sw = fuller_switch(z)
        u = CONTROLS[sw.control]
        for t in np.linspace(0.0, sw.t_sw, samples_per_arc, endpoint=False):
            times.append(t0 + t)
            states.append(triangular_segment(z, u, t).array)
        t0 += sw.t_sw
        z = sw.end
    times.append(t0)
    states.append(z.array)
    return np.array(times), np.array(states)


def fuller_poincare(z0: FullerState) -> FullerState:
    """The state at the first positive switching time."""
    return fuller_switch(z0).end


# ---------------------------------------------------------------------------
# angular map and its fixed points


def weighted_norm(z: FullerState) -> float:
    """phi(z) = (|z1|^6 + |z2|^3 + |z3|^2)^(1/6), homogeneous of degree one."""
    return (abs(z.z1) ** 6 + abs(z.z2) ** 3 + abs(z.z3) ** 2) ** (1 / 6)


def angular_part(z: FullerState) -> FullerState:
    r = weighted_norm(z)
    if r == 0:
        raise SingularApproach("the origin has no angular part")
    return z.scaled(1 / r)


def canonical_angular(z: FullerState) -> FullerState:
    """Representative on the unit weighted sphere with z3 in R<=0."""
    return wall_normalize(angular_part(z))


def fuller_poincare_angular(q: FullerState) -> FullerState:
    """The first-return map on the angular section, modulo the cube roots of unity."""
    return canonical_angular(fuller_poincare(q))


def scale_factor(tol: float = 1e-14) -> float:
    """The root r > 1 of 1 - 5r - 7r^2 - 5r^3 - 7r^4 - 5r^5 + r^6.

    Newton steps safeguarded by bisection on the bracket [6, 7].
    """
    poly = np.polynomial.Polynomial(SEXTIC)
    dpoly = poly.deriv()
    lo, hi = 6.0, 7.0
    if not poly(lo) < 0 < poly(hi):
        raise ArithmeticError("bracket does not straddle the root")
    r = 6.3
    for _ in range(100):
        step = poly(r) / dpoly(r)
        nxt = r - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if poly(nxt) < 0:
            lo = nxt
        else:
            hi = nxt
        if abs(nxt - r) <= tol * nxt:
            return float(nxt)
        r = nxt
    return float(r)


def fixed_point_switch_time(r: float | None = None) -> float:
    r = scale_factor() if r is None else r
    return 2 * (1 + r + r * r) / (SQRT3 * (r + 1))


def q_out_exact(r: float | None = None) -> FullerState:
    """The outward fixed point, normalized so that Re z1 = -1 and z3 < 0."""
    r = scale_factor() if r is None else r
    z1 = complex(-1.0, (r - 1) / (SQRT3 * (1 + r)))
    z2 = complex(-(r ** 3 - 1) / (SQRT3 * (1 + r ** 3)),
                 (1 - 3 * r - 2 * r ** 2 - 3 * r ** 3 + r ** 4)
                 / (3 * (1 + r + r ** 3 + r ** 4)))
    num = -2 * (1 + r - 4 * r ** 3 - 7 * r ** 4 - 9 * r ** 5 - 7 * r ** 6
                - 4 * r ** 7 + r ** 9 + r ** 10)
    den = 9 * (1 + r) ** 2 * (1 - r + r * r) * (1 + r ** 3 + r ** 6)
    return FullerState(z1, z2, complex(num / den, 0.0))


def q_out() -> FullerState:
    return canonical_angular(q_out_exact())


def q_in() -> FullerState:
    return canonical_angular(q_out_exact().tau())


# ---------------------------------------------------------------------------
# cell coordinates on the zero set of H_F


@dataclass(frozen=True)
class CellCoordinates:
    """(r2, psi, theta2) with r1 + r2 = 1, psi = theta2 - theta1 and z3 = -2 r1 r2 sin psi.

    ``eps2`` is +1 on the first big cell (Im z2 > 0, first control zeta)
    and -1 on the second; ``eps3`` is the sign of cos(psi).
    """
    r2: float
    psi: float
    theta2: float
    eps2: int = 1
    eps3: int = 1

    @property
    def array(self) -> np.ndarray:
        return np.array([self.r2, self.psi, self.theta2])


def cell_to_state(cc: CellCoordinates) -> FullerState:
    r1 = 1.0 - cc.r2
    theta1 = cc.theta2 - cc.psi
    return FullerState(r1 * cmath.exp(1j * theta1), cc.r2 * cmath.exp(1j * cc.theta2),
                       complex(-2 * r1 * cc.r2 * math.sin(cc.psi), 0.0))


def cell_from_array(arr) -> CellCoordinates:
    r2, psi, th = (float(x) for x in arr)
    return CellCoordinates(r2, psi, th, 1 if th >= 0 else -1,
                           1 if math.cos(psi) >= 0 else -1)


def _wrap(angle: float) -> float:
    """Angle in (-pi, pi]."""
    a = math.remainder(angle, 2 * math.pi)
    return math.pi if a == -math.pi else a


def cell_coords(z: FullerState, tol: float = 1e-9) -> CellCoordinates:
    """Normalize a zero-energy wall state and read off (r2, psi, theta2)."""
    w = wall_normalize(z)
    r1, r2 = abs(w.z1), abs(w.z2)
    if r1 + r2 == 0:
        raise SingularApproach("z1 = z2 = 0 forces z = 0 on the zero set")
    s = 0.5 * (r1 + math.sqrt(r1 * r1 + 4 * r2))
    w = w.scaled(1 / s)
    r1, r2 = abs(w.z1), abs(w.z2)
    theta2 = cmath.phase(w.z2) if r2 > 0 else 0.0
    theta1 = cmath.phase(w.z1) if r1 > 0 else theta2
    psi = _wrap(theta2 - theta1)
    scale = max(1.0, abs(w.z3))
    if psi < 0 and abs(w.z3) <= tol * scale:
        # z3 = 0 allows psi in {0, pi} only up to rounding
        psi = abs(psi)
    if psi < -tol:
        raise ConstraintError("state is not on the zero set of H_F")
    psi = min(max(psi, 0.0), math.pi)
    return cell_from_array((r2, psi, theta2))


def cell_tau(cc: CellCoordinates) -> CellCoordinates:
    """Time reversal in cell coordinates."""
    th = (math.pi if cc.theta2 >= 0 else -math.pi) - cc.theta2
    return cell_from_array((cc.r2, math.pi - cc.psi, th))


def cell_map(cc: CellCoordinates) -> CellCoordinates:
    """The first-return map in cell coordinates."""
    return cell_coords(fuller_poincare(cell_to_state(cc)))


def cell_involution(cc: CellCoordinates) -> CellCoordinates:
    """tau composed with the first-return map; an involution."""
    return cell_tau(cell_map(cc))


def fixed_point_jacobian(step: float = 1e-6) -> np.ndarray:
    """Jacobian of the return map at q_out in the cell chart of the zero set."""
    base = cell_coords(q_out()).array
    jac = np.empty((3, 3))
    for i in range(3):
        d = np.zeros(3)
        d[i] = step
        plus = cell_map(cell_from_array(base + d)).array
        minus = cell_map(cell_from_array(base - d)).array
        jac[:, i] = (plus - minus) / (2 * step)
    return jac


# ---------------------------------------------------------------------------
# geometric partition of the two big cells

PSI_BREAKS = (0.0, math.pi / 3, 2 * math.pi / 3, math.pi)
THETA_BREAKS = (math.pi, math.pi - 1.1, 1.1, 0.0)
TABLE_PARTS = ("D_in", "D_out", "D4", "D2", "D0", "D3", "D1-D_in")
# allowed image parts for each row of the containment table
TABLE_ROWS = {
    "D_in": set(TABLE_PARTS),
    "D_out": {"D_out"},
    "D4": {"D2", "D3"},
    "D2": {"D3"},
    "D0": {"D1-D_in"},
    "D3": {"D1-D_in"},
    "D1-D_in": {"D1-D_in"},
}


@dataclass(frozen=True)
class SwitchingData:
    """Root structure of the two switching cubics at a wall state."""
    control: int
    mult_a: int
    mult_b: int
    disc_a: float
    disc_b: float
    positive_roots_a: tuple[float, ...]
    positive_roots_b: tuple[float, ...]
    active: str
    t_sw: float


def switching_data(z: FullerState) -> SwitchingData:
    w = wall_normalize(z)
    k = first_control_index(w)
    u = CONTROLS[k]
    chi_a = switching_cubic(w, u, CONTROLS[0]) if k else np.zeros(4)
    chi_b = switching_cubic(w, u, u.conjugate())
    sw = fuller_switch(w)
    red_a, red_b = reduced_cubic(chi_a) if k else chi_a, reduced_cubic(chi_b)
    pos = lambda c: tuple(t for t in real_roots(c) if t > 0)  # noqa: E731
    return SwitchingData(k, zero_multiplicity(chi_a) if k else 4, zero_multiplicity(chi_b),
                         cubic_discriminant(red_a), cubic_discriminant(red_b),
                         pos(red_a) if k else (), pos(red_b), sw.active, sw.t_sw)


def box_index(cc: CellCoordinates) -> tuple[int, int] | None:
    """(i, j) with psi in [a_i, a_{i+1}] and theta2 in [b_{j+1}, b_j] on the first cell."""
    if cc.theta2 < 0:
        return None
    i = min(int(cc.psi // (math.pi / 3)), 2)
    th = cc.theta2
    j = 0 if th >= THETA_BREAKS[1] else (1 if th >= THETA_BREAKS[2] else 2)
    return i, j


def _cubic_roots_vec(c0, c1, c2, c3) -> np.ndarray:
    """Real roots of many cubics at once, (N, 3) with nan for complex roots."""
    b, c, d = c2 / c3, c1 / c3, c0 / c3
    p = c - b * b / 3
    q = 2 * b ** 3 / 27 - b * c / 3 + d
    shift = -b / 3
    disc = (q / 2) ** 2 + (p / 3) ** 3
    out = np.full(np.shape(c0) + (3,), np.nan)
    one = disc > 0
    sq = np.sqrt(np.where(one, disc, 0.0))
    out[..., 0] = np.where(one, np.cbrt(-q / 2 + sq) + np.cbrt(-q / 2 - sq) + shift, np.nan)
    three = ~one
    m = 2 * np.sqrt(np.where(three, -p / 3, 0.0))
    safe = np.where(m * p != 0, p * m, 1.0)
    phi = np.arccos(np.clip(3 * q / safe, -1, 1)) / 3
    for k in range(3):
        val = m * np.cos(phi - 2 * math.pi * k / 3) + shift
        out[..., k] = np.where(three, val, out[..., k])
    for _ in range(2):
        f = ((c3[..., None] * out + c2[..., None]) * out + c1[..., None]) * out + c0[..., None]
        df = (3 * c3[..., None] * out + 2 * c2[..., None]) * out + c1[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(df != 0, f / df, 0.0)
        out = out - step
    return out


def _interior_switch(r2, psi, theta2):
    """Vectorized first switch for interior cell points (z3 < 0).

    The cubic towards 1 then has a nonzero constant term and the wall
    cubic loses exactly one factor of t.  Returns (u, is_a, t_sw, z1, z2, x3).
    """
    r2, psi, theta2 = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (r2, psi, theta2)))
    r1 = 1 - r2
    z1 = r1 * np.exp(1j * (theta2 - psi))
    z2 = r2 * np.exp(1j * theta2)
    x3 = -2 * r1 * r2 * np.sin(psi)
    lex = np.where(z2.imag != 0, z2.imag, np.where(z1.imag != 0, z1.imag, 1.0))
    u = np.where(lex > 0, ZETA, ZETA.conjugate())
    wa = np.conj(u - 1) / SQRT3
    a0 = (wa * x3).real
    a1 = (wa * z2).real
    a2 = (wa * z1).real / 2
    a3 = (wa * (-1j * u)).real / 6
    roots = _cubic_roots_vec(a0, a1, a2, a3)
    roots = np.where(roots > 0, roots, np.inf)
    roots.sort(axis=-1)
    # sign change at the first positive root unless it is a tangency
    t_a = roots[..., 0]
    with np.errstate(invalid="ignore"):
        gap = np.abs(roots[..., 1] - t_a)
    tangent = np.isfinite(roots[..., 1]) & (gap < 1e-7 * np.maximum(1, t_a))
    t_a = np.where(tangent, roots[..., 2], t_a)
    wb = np.conj(u - np.conj(u)) / SQRT3
    b1 = (wb * z2).real
    b2 = (wb * z1).real / 2
    b3 = (wb * (-1j * u)).real / 6
    disc = b2 * b2 - 4 * b3 * b1
    sq = np.sqrt(np.where(disc > 0, disc, 0.0))
    qq = -0.5 * (b2 + np.copysign(sq, b2))
    with np.errstate(divide="ignore", invalid="ignore"):
        rb = np.stack([qq / b3, np.where(qq != 0, b1 / qq, np.inf)], axis=-1)
    rb = np.where((disc > 0)[..., None] & (rb > 0), rb, np.inf)
    t_b = rb.min(axis=-1)
    is_a = t_a <= t_b
    return u, is_a, np.where(is_a, t_a, t_b), z1, z2, x3


def switch_signatures(r2, psi, theta2) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (switch is towards 1, t_sw) for interior cell points."""
    _, is_a, t_sw, *_ = _interior_switch(r2, psi, theta2)
    return is_a, t_sw


def cell_map_batch(points) -> np.ndarray:
    """The first-return map on an (N, 3) array of interior cell points."""
    pts = np.asarray(points, dtype=float)
    u, _, t, z1, z2, x3 = _interior_switch(pts[:, 0], pts[:, 1], pts[:, 2])
    e1 = -1j * t * u + z1
    e2 = -1j * t * t * u / 2 + z1 * t + z2
    e3 = -1j * t ** 3 * u / 6 + z1 * t * t / 2 + z2 * t + x3
    rots = np.stack([np.abs(np.angle(-e3 * w)) for w in CONTROLS], axis=-1)
    w = np.array(CONTROLS)[np.argmin(rots, axis=-1)]
    e1, e2 = e1 * w, e2 * w
    r1, r2 = np.abs(e1), np.abs(e2)
    scale = 0.5 * (r1 + np.sqrt(r1 * r1 + 4 * r2))
    theta2 = np.angle(e2)
    psi = np.clip(np.mod(theta2 - np.angle(e1) + math.pi, 2 * math.pi) - math.pi, 0.0, math.pi)
    return np.stack([r2 / scale ** 2, psi, theta2], axis=-1)


def _switch_signature(r2: float, psi: float, theta2: float) -> tuple[str, float]:
    is_a, t = switch_signatures(r2, psi, theta2)
    return ("A" if bool(is_a) else "B"), float(t)


def _is_jump(r2, psi, lo, hi, sig_lo, sig_hi, tol=1e-6, levels=6, grid=33) -> bool:
    """Zoom into the theta2 interval to decide whether t_sw jumps inside it.

    Each level samples the interval on a grid and keeps the sub-interval
    with the largest change of (label, t_sw).
    """
    for _ in range(levels):
        th = np.linspace(lo, hi, grid)
        is_a, t = switch_signatures(r2, psi, th)
        change = np.abs(np.diff(t)) + (is_a[1:] != is_a[:-1])
        k = int(np.argmax(change))
        lo, hi = th[k], th[k + 1]
        t_lo, t_hi = t[k], t[k + 1]
        if hi - lo < 1e-12:
            break
    return abs(t_hi - t_lo) > tol * max(1.0, t_hi)


def first_cell_part(cc: CellCoordinates, samples: int = 96) -> str:
    """D0, D1 or D4 for a point of the first big cell.

    D4 is where the switch stays on the starting wall.  D0 and D1 both
    switch towards the control 1 and differ only in which side of the jump
    locus they lie on, so the segment from the point up to the face
    theta2 = pi (which lies in D1) is scanned for events.  A jump between
    two switches towards 1 toggles D0 and D1.  Leaving D4 because the wall
    switch disappears enters D0; any other exit from D4 enters D1.
    """
    thetas = np.linspace(math.pi, cc.theta2, samples)
    is_a, times = switch_signatures(cc.r2, cc.psi, thetas)
    return _walk_part(cc.r2, cc.psi, thetas, is_a, times)


def _walk_events(is_a, times) -> np.ndarray:
    """Mask of consecutive sample pairs that may straddle an event."""
    label_change = is_a[..., 1:] != is_a[..., :-1]
    big = np.abs(np.diff(times, axis=-1)) >= 0.05 * np.maximum(1.0, times[..., 1:])
    return label_change | big


def _walk_part(r2, psi, thetas, is_a, times, part: str | None = None,
               depth: int = 0, max_depth: int = 4, grid: int = 17) -> str:
    """Apply the walk rules along sampled theta2 values.

    A sample pair that may straddle an event is resampled more finely, so a
    thin interval of wall switches between two coarse samples is not
    mistaken for a jump.  At the finest level a pair whose switching times
    still differ is a genuine jump.
    """
    if part is None:
        part = "D1" if is_a[0] else "D4"
    for k in np.nonzero(_walk_events(is_a, times))[0] + 1:
        if depth < max_depth:
            sub = np.linspace(thetas[k - 1], thetas[k], grid)
            sub_a, sub_t = switch_signatures(r2, psi, sub)
            part = _walk_part(r2, psi, sub, sub_a, sub_t, part, depth + 1, max_depth, grid)
            continue
        prev = ("A" if is_a[k - 1] else "B", float(times[k - 1]))
        cur = ("A" if is_a[k] else "B", float(times[k]))
        jump = _is_jump(r2, psi, thetas[k], thetas[k - 1], cur, prev)
        if cur[0] == "B":
            part = "D4"
        elif prev[0] == "B":
            # the wall switch disappearing (t_sw jumps up) crosses into D0;
            # an earlier switch towards 1 appearing (t_sw jumps down) or a
            # continuous hand-over enters D1
            part = "D0" if jump and cur[1] > prev[1] else "D1"
        elif jump:
            part = "D0" if part == "D1" else "D1"
    return part


def cell_classify(cc: CellCoordinates) -> str:
    """Part of the geometric partition containing a cell point.

    Second big cell: D2 where the first switch goes to the control 1, D3
    where it stays on the wall.  First big cell: D0, D1 or D4 as decided
    by ``first_cell_part``; D1 is refined into the boxes D_{1,ij}, with
    D_out = D_{1,00} and D_in = D_{1,22}.
    """
    data = switching_data(cell_to_state(cc))
    if data.control == 2:
        return "D2" if data.active == "A" else "D3"
    if data.active == "B":
        return "D4"
    return _label_first_cell(first_cell_part(cc), cc.array)


def _label_first_cell(part: str, pt) -> str:
    if part != "D1":
        return part
    i, j = box_index(cell_from_array(pt))
    if (i, j) == (0, 0):
        return "D_out"
    if (i, j) == (2, 2):
        return "D_in"
    return f"D_1,{i}{j}"


def classify_batch(points, samples: int = 96) -> list[str]:
    """``cell_classify`` for an (N, 3) array of interior cell points."""
    pts = np.asarray(points, dtype=float)
    u, is_a, _, *_ = _interior_switch(pts[:, 0], pts[:, 1], pts[:, 2])
    labels: list[str] = [""] * len(pts)
    first = np.isclose(u, ZETA)
    walk = np.nonzero(first & is_a)[0]
    for n in np.nonzero(~first)[0]:
        labels[n] = "D2" if is_a[n] else "D3"
    for n in np.nonzero(first & ~is_a)[0]:
        labels[n] = "D4"
    if walk.size:
        frac = np.linspace(0.0, 1.0, samples)
        thetas = math.pi + (pts[walk, 2:3] - math.pi) * frac
        wa, wt = switch_signatures(pts[walk, 0:1], pts[walk, 1:2], thetas)
        quiet = ~_walk_events(wa, wt).any(axis=-1)
        for row, n in enumerate(walk):
            if quiet[row]:
                part = "D1" if wa[row, 0] else "D4"
            else:
                part = _walk_part(pts[n, 0], pts[n, 1], thetas[row], wa[row], wt[row])
            labels[n] = _label_first_cell(part, pts[n])
    return labels


def table_part(label: str) -> str:
    """Coarsen a classification label to a column of the containment table."""
    if label.startswith("D_1,") or label == "D_out":
        return "D_out" if label == "D_out" else "D1-D_in"
    return label


def table_row_allows(row: str, image_label: str) -> bool:
    part = table_part(image_label)
    allowed = TABLE_ROWS[row]
    if part == "D_out" and "D1-D_in" in allowed:
        return True
    return part in allowed


# ---------------------------------------------------------------------------
# sampled basin check

FIRST_CELL = ((0.0, 1.0), (0.0, math.pi), (0.0, math.pi))
SECOND_CELL = ((0.0, 1.0), (0.0, math.pi), (-math.pi, 0.0))
# every D0 point found in dense scans lies well inside this box
D0_SEARCH_BOX = ((0.1, 0.3), (2.9, math.pi), (0.0, 0.7))
D_OUT_BOX = ((0.0, 1.0), (0.0, math.pi / 3), (math.pi - 1.1, math.pi))
D_IN_BOX = ((0.0, 1.0), (2 * math.pi / 3, math.pi), (0.0, 1.1))
PART_BOXES = {
    "D_in": D_IN_BOX,
    "D_out": D_OUT_BOX,
    "D4": FIRST_CELL,
    "D2": SECOND_CELL,
    "D0": D0_SEARCH_BOX,
    "D3": SECOND_CELL,
    "D1-D_in": FIRST_CELL,
}
FACE_INSET = 1e-7


def _uniform_box(rng: np.random.Generator, box, n: int) -> np.ndarray:
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    return lo + (hi - lo) * rng.random((n, 3))


def _row_of(label: str) -> str:
    if label.startswith("D_1,"):
        return "D1-D_in"
    return label


def sample_part(part: str, n: int, rng: np.random.Generator,
                batch: int = 2000, max_batches: int = 500) -> np.ndarray:
    """n cell points of a row of the containment table, by rejection sampling."""
    box = PART_BOXES[part]
    found: list[np.ndarray] = []
    count = 0
    for _ in range(max_batches):
        pts = _uniform_box(rng, box, batch)
        labels = classify_batch(pts)
        keep = np.array([_row_of(lab) == part for lab in labels])
        found.append(pts[keep])
        count += int(keep.sum())
        if count >= n:
            return np.concatenate(found)[:n]
    raise ValueError(f"could only sample {count} of {n} points of {part}")


def random_wall_states(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random zero-energy wall states in cell coordinates, both big cells."""
    box = ((0.0, 1.0), (0.0, math.pi), (-math.pi, math.pi))
    return _uniform_box(rng, box, n)


def d_out_boundary_mesh(n: int, rng: np.random.Generator, inset: float = FACE_INSET) -> np.ndarray:
    """n points spread over the six faces of the D_out box.

    Faces where the chart degenerates (r2 = 0, r2 = 1, psi = 0) are moved
    inwards by ``inset``; the remaining faces are used as they are.
    """
    box = np.array(D_OUT_BOX, dtype=float)
    box[0] += (inset, -inset)
    box[1, 0] += inset
    pts = _uniform_box(rng, box, n)
    face = rng.integers(0, 6, n)
    axis, side = face // 2, face % 2
    pts[np.arange(n), axis] = box[axis, side]
    return pts


@dataclass(frozen=True)
class BasinReport:
    boundary_samples: int
    boundary_escapes: int
    row_samples: dict[str, int]
    row_violations: dict[str, int]
    d3_twice_samples: int
    d3_twice_escapes: int
    converged: int
    started: int
    max_iterations: int

    @property
    def ok(self) -> bool:
        return (self.boundary_escapes == 0 and not any(self.row_violations.values())
                and self.d3_twice_escapes == 0 and self.converged == self.started)


def converge_to_q_out(points, tol: float = 1e-8, max_iter: int = 200) -> np.ndarray:
    """Iterations needed by each cell point to come within tol of q_out (-1 if never)."""
    target = cell_coords(q_out()).array
    pts = np.array(points, dtype=float)
    steps = np.full(len(pts), -1)
    active = np.ones(len(pts), dtype=bool)
    for k in range(max_iter + 1):
        close = active & (np.linalg.norm(pts - target, axis=1) < tol)
        steps[close] = k
        active &= ~close
        if not active.any():
            break
        pts[active] = cell_map_batch(pts[active])
    return steps


def basin_check(samples: int = 1000, seed: int = 0, boundary_samples: int | None = None,
                tol: float = 1e-8) -> BasinReport:
    """Sampled check that the return map drives zero-energy wall states to q_out.

    (a) the image of a mesh on the boundary of D_out stays in D_out;
    (b) each row of the containment table holds on ``samples`` points per
    part, and two steps take D3 into D_out; (c) ``samples`` random wall
    states all come within ``tol`` of q_out.
    """
    rng = np.random.default_rng(seed)
    n_bd = 10 * samples if boundary_samples is None else boundary_samples
    mesh = d_out_boundary_mesh(n_bd, rng)
    escapes = sum(lab != "D_out" for lab in classify_batch(cell_map_batch(mesh)))

    row_samples, row_violations = {}, {}
    d3 = None
    for part in TABLE_PARTS:
        pts = sample_part(part, samples, rng)
        images = classify_batch(cell_map_batch(pts))
        row_samples[part] = len(pts)
        row_violations[part] = sum(not table_row_allows(part, lab) for lab in images)
        if part == "D3":
            d3 = pts
    twice = classify_batch(cell_map_batch(cell_map_batch(d3)))
    d3_escapes = sum(lab != "D_out" for lab in twice)

    starts = random_wall_states(samples, rng)
    steps = converge_to_q_out(starts, tol)
    return BasinReport(n_bd, int(escapes), row_samples, row_violations, len(d3),
                       int(d3_escapes), int((steps >= 0).sum()), samples,
                       int(steps.max()))
