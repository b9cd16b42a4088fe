"""Exact 2x2 kernel for SL2(R) and sl2(R).

Traceless matrices [[a, b], [c, -a]] are stored as the triple (a, b, c).
Hot loops elsewhere in the package work directly on numpy triples via the
``*_vec`` helpers; the dataclasses are the public, validated face of the
same arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ConstraintError

SQRT3 = math.sqrt(3.0)
DET_TOL = 1e-10
SERIES_CUTOFF = 1e-8


# ---------------------------------------------------------------------------
# triple-level helpers (a, b, c) <-> [[a, b], [c, -a]]
# ---------------------------------------------------------------------------

def form_vec(x: np.ndarray, y: np.ndarray) -> float:
    """Trace form tr(XY) of two traceless matrices given as triples."""
    return 2.0 * x[0] * y[0] + x[1] * y[2] + x[2] * y[1]


def bracket_vec(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Commutator XY - YX of two traceless matrices given as triples."""
    return np.array([
        x[1] * y[2] - x[2] * y[1],
        2.0 * (x[0] * y[1] - x[1] * y[0]),
        2.0 * (x[2] * y[0] - x[0] * y[2]),
    ])


def det_vec(x: np.ndarray) -> float:
    return -x[0] * x[0] - x[1] * x[2]


def vec_to_matrix(x: np.ndarray) -> np.ndarray:
    return np.array([[x[0], x[1]], [x[2], -x[0]]], dtype=float)


def matrix_to_vec(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    return np.array([0.5 * (m[0, 0] - m[1, 1]), m[0, 1], m[1, 0]])


def adjoint_vec(g: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Ad_g X = g X g^-1 for g in SL2(R) (2x2 array) and a triple X."""
    ginv = np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]])
    return matrix_to_vec(g @ vec_to_matrix(x) @ ginv)


def exp_matrix(x: np.ndarray, t: float = 1.0) -> np.ndarray:
    """exp(tX) for a traceless triple, using X^2 = -det(X) I."""
    d = det_vec(x)
    s = d * t * t
    if abs(s) < SERIES_CUTOFF:
        cosine = 1.0 - s / 2.0 + s * s / 24.0
        sinc = t * (1.0 - s / 6.0 + s * s / 120.0)
    elif d > 0:
        w = math.sqrt(d)
        cosine = math.cos(w * t)
        sinc = math.sin(w * t) / w
    else:
        w = math.sqrt(-d)
        cosine = math.cosh(w * t)
        sinc = math.sinh(w * t) / w
    return np.array([
        [cosine + sinc * x[0], sinc * x[1]],
        [sinc * x[2], cosine - sinc * x[0]],
    ])


def mobius(g: np.ndarray, z: complex) -> complex:
    return (g[0, 0] * z + g[0, 1]) / (g[1, 0] * z + g[1, 1])


def phi_vec(z: complex) -> np.ndarray:
    x, y = z.real, z.imag
    return np.array([x / y, -(x * x + y * y) / y, 1.0 / y])


def phi_inverse_vec(x: np.ndarray) -> complex:
    """Recover z from X = Phi(z): y = 1/c and x = a*y."""
    y = 1.0 / x[2]
    return complex(x[0] * y, y)


def rho_vec(x: np.ndarray) -> tuple[float, float, float]:
    a, b, c = x
    return (
        (c + SQRT3 * a) / SQRT3,
        (c - SQRT3 * a) / SQRT3,
        -(3.0 * b + c) / (2.0 * SQRT3),
    )


def control_vec(u0: float, u1: float, u2: float) -> np.ndarray:
    return np.array([(u1 - u2) / SQRT3, (u0 - 2.0 * u1 - 2.0 * u2) / 3.0, u0])


J_VEC = np.array([0.0, -1.0, 1.0])
J_MATRIX = vec_to_matrix(J_VEC)
ROTATION = exp_matrix(J_VEC, math.pi / 3.0)
ROTATION_INV = exp_matrix(J_VEC, -math.pi / 3.0)
VERTEX_VECS = (control_vec(1, 0, 0), control_vec(0, 1, 0), control_vec(0, 0, 1))


# ---------------------------------------------------------------------------
# public value types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Mat2:
    a11: float
    a12: float
    a21: float
    a22: float

    @classmethod
    def from_array(cls, m) -> "Mat2":
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    @property
    def array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    def __matmul__(self, other: "Mat2") -> "Mat2":
        return Mat2.from_array(self.array @ other.array)


@dataclass(frozen=True)
class SL2Element(Mat2):
    """A 2x2 real matrix of determinant one (checked to 1e-10)."""

    def __post_init__(self):
        if abs(self.det - 1.0) > DET_TOL:
            raise ConstraintError(f"det = {self.det!r} is not 1")

    @classmethod
    def identity(cls) -> "SL2Element":
        return cls(1.0, 0.0, 0.0, 1.0)

    def inverse(self) -> "SL2Element":
        return SL2Element(self.a22, -self.a12, -self.a21, self.a11)

    def __matmul__(self, other: Mat2) -> Mat2:
        prod = self.array @ other.array
        if isinstance(other, SL2Element):
            return SL2Element.from_array(prod)
        return Mat2.from_array(prod)

    def act(self, z: "HalfPlanePoint") -> "HalfPlanePoint":
        return HalfPlanePoint.from_complex(mobius(self.array, z.z))

    def adjoint(self, x: "Sl2Element") -> "Sl2Element":
        return Sl2Element.from_vec(adjoint_vec(self.array, x.vec))


@dataclass(frozen=True)
class Sl2Element:
    """Traceless matrix [[a, b], [c, -a]]."""

    a: float
    b: float
    c: float

    @classmethod
    def from_vec(cls, v) -> "Sl2Element":
        return cls(float(v[0]), float(v[1]), float(v[2]))

    @classmethod
    def from_matrix(cls, m) -> "Sl2Element":
        return cls.from_vec(matrix_to_vec(np.asarray(m, dtype=float)))

    @property
    def vec(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])

    @property
    def matrix(self) -> np.ndarray:
        return vec_to_matrix(self.vec)

    @property
    def det(self) -> float:
        return det_vec(self.vec)

    def __add__(self, other: "Sl2Element") -> "Sl2Element":
        return Sl2Element(self.a + other.a, self.b + other.b, self.c + other.c)

    def __sub__(self, other: "Sl2Element") -> "Sl2Element":
        return Sl2Element(self.a - other.a, self.b - other.b, self.c - other.c)

    def __neg__(self) -> "Sl2Element":
        return Sl2Element(-self.a, -self.b, -self.c)

    def __mul__(self, s: float) -> "Sl2Element":
        return Sl2Element(s * self.a, s * self.b, s * self.c)

    __rmul__ = __mul__

    def __truediv__(self, s: float) -> "Sl2Element":
        return Sl2Element(self.a / s, self.b / s, self.c / s)


J = Sl2Element.from_vec(J_VEC)
R = SL2Element.from_array(ROTATION)


@dataclass(frozen=True)
class HalfPlanePoint:
    x: float
    y: float

    def __post_init__(self):
        if not self.y > 0:
            raise ConstraintError(f"y = {self.y!r} must be positive")

    @classmethod
    def from_complex(cls, z: complex) -> "HalfPlanePoint":
        return cls(float(z.real), float(z.imag))

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)


@dataclass(frozen=True)
class ControlVector:
    """A point of the triangular control simplex or of a disk U_r.

    ``mode`` is ``"simplex"`` for the triangle and ``"disk"`` for the set
    {sum u = 1, sum u^2 <= radius^2}.
    """

    u0: float
    u1: float
    u2: float
    mode: Literal["simplex", "disk"] = "simplex"
    radius: float = 1.0

    def __post_init__(self):
        if abs(self.u0 + self.u1 + self.u2 - 1.0) > 1e-12:
            raise ConstraintError("control coordinates must sum to 1")
        if self.mode == "simplex":
            if min(self.u0, self.u1, self.u2) < -1e-12:
                raise ConstraintError("simplex control must be nonnegative")
        elif self.mode == "disk":
            if self.u0**2 + self.u1**2 + self.u2**2 > self.radius**2 + 1e-12:
                raise ConstraintError("control lies outside the disk")
        else:
            raise ConstraintError(f"unknown control mode {self.mode!r}")

    @classmethod
    def vertex(cls, index: int) -> "ControlVector":
        u = [0.0, 0.0, 0.0]
        u[index % 3] = 1.0
        return cls(*u)

    @classmethod
    def center(cls) -> "ControlVector":
        return cls(1 / 3, 1 / 3, 1 / 3)

    @property
    def array(self) -> np.ndarray:
        return np.array([self.u0, self.u1, self.u2])


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def trace_form(x: Sl2Element, y: Sl2Element) -> float:
    return form_vec(x.vec, y.vec)


def bracket(x: Sl2Element, y: Sl2Element) -> Sl2Element:
    return Sl2Element.from_vec(bracket_vec(x.vec, y.vec))


def exp_sl2(x: Sl2Element, t: float) -> SL2Element:
    """exp(tX), branching on the sign of det X (elliptic, hyperbolic, nilpotent)."""
    return SL2Element.from_array(exp_matrix(x.vec, t))


def phi(z: HalfPlanePoint) -> Sl2Element:
    return Sl2Element.from_vec(phi_vec(z.z))


def phi_inverse(x: Sl2Element) -> HalfPlanePoint:
    return HalfPlanePoint.from_complex(phi_inverse_vec(x.vec))


def rho(x: Sl2Element) -> tuple[float, float, float]:
    return rho_vec(x.vec)


def control_matrix(u: ControlVector) -> Sl2Element:
    return Sl2Element.from_vec(control_vec(u.u0, u.u1, u.u2))


_CAYLEY = np.array([[1.0, 1.0j], [1.0j, 1.0]]) / math.sqrt(2.0)
_CAYLEY_INV = np.array([[1.0, -1.0j], [-1.0j, 1.0]]) / math.sqrt(2.0)


def cayley(m) -> np.ndarray:
    """A^-1 M A with A = [[1, i], [i, 1]]/sqrt2, mapping sl2(R) to su(1,1)."""
    if isinstance(m, Sl2Element):
        m = m.matrix
    elif isinstance(m, Mat2):
        m = m.array
    return _CAYLEY_INV @ np.asarray(m, dtype=complex) @ _CAYLEY


def cayley_inverse(m: np.ndarray) -> np.ndarray:
    out = _CAYLEY @ np.asarray(m, dtype=complex) @ _CAYLEY_INV
    return out.real


def star_domain_test(z: HalfPlanePoint) -> bool:
    return -1 / SQRT3 < z.x < 1 / SQRT3 and z.x * z.x + z.y * z.y > 1 / 3


HOROBALL_HEIGHT = 4.5
HALF_PLANE_SLOPE = 15.0


def _in_cusp_regions(z: complex) -> bool:
    if z.imag > HOROBALL_HEIGHT:
        return True
    return z.imag > HALF_PLANE_SLOPE * (1 / SQRT3 - z.real)


def truncated_star_test(z: HalfPlanePoint) -> bool:
    """Membership in the compact truncation of the star domain.

    The removed set is the orbit under rotation by pi/3 of the horoball
    y > 4.5 and of the half-plane y > 15(1/sqrt3 - x).
    """
    if not star_domain_test(z):
        return False
    w = z.z
    for _ in range(3):
        if _in_cusp_regions(w):
            return False
        w = mobius(ROTATION_INV, w)
    return True
