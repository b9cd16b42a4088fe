"""Critical hexagons, triangle-area functionals and the density lower bound.

A point z of the star domain determines X = Phi(z) and hence a centrally
symmetric hexagon whose edge midpoints are the sixth roots of unity.
From the three star functions rho_j we get the areas of the interior
triangles T_i (cut off at the hexagon vertices) and the exterior triangles
Text_i (between two non-adjacent edge lines).  When T_i >= Text_i a disk
with that critical hexagon must bulge past the hexagon, which gives a
density lower bound delta(z).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import StarViolation
from .sl2core import (
    SQRT3,
    HalfPlanePoint,
    det_vec,
    phi_vec,
    rho_vec,
    truncated_star_test,
    vec_to_matrix,
)

BASE_HEXAGON_AREA = 1.5 * SQRT3
MIDPOINTS = np.array([[math.cos(math.pi * j / 3), math.sin(math.pi * j / 3)]
                      for j in range(6)])


@dataclass(frozen=True)
class Hexagon:
    vertices: np.ndarray  # (6, 2), counterclockwise

    def area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def midpoints(self) -> np.ndarray:
        """Edge midpoints, row j being the midpoint of the edge ending at vertex j."""
        return 0.5 * (self.vertices + np.roll(self.vertices, 1, axis=0))


@dataclass(frozen=True)
class DensityReport:
    T: tuple[float, float, float]
    Text: tuple[float, float, float]
    area_i: tuple[float, float, float]
    indicators: tuple[bool, bool, bool]
    delta: float


def _star_rhos(z: HalfPlanePoint) -> tuple[np.ndarray, tuple[float, float, float]]:
    x = phi_vec(z.z)
    rhos = rho_vec(x)
    if min(rhos) <= 0:
        raise StarViolation(f"z = {z.z} is outside the star domain")
    return x, rhos


def hexagon_vertices_two_ways(z: HalfPlanePoint) -> tuple[np.ndarray, np.ndarray]:
    """Vertices from the line through s_j and from the line through s_{j+1}."""
    x, rhos = _star_rhos(z)
    xm = vec_to_matrix(x)
    det = det_vec(x)
    fwd = np.empty((6, 2))
    back = np.empty((6, 2))
    for j in range(6):
        s_j, s_next = MIDPOINTS[j], MIDPOINTS[(j + 1) % 6]
        fwd[j] = s_j + rhos[(j + 2) % 3] / det * (xm @ s_j)
        back[j] = s_next - rhos[j % 3] / det * (xm @ s_next)
    return fwd, back


def hexagon_from_point(z: HalfPlanePoint) -> Hexagon:
    fwd, _ = hexagon_vertices_two_ways(z)
    return Hexagon(fwd)


def triangle_areas(z: HalfPlanePoint) -> tuple[tuple[float, ...], tuple[float, ...]]:
    _, rhos = _star_rhos(z)
    r0, r1, r2 = (float(r) for r in rhos)
    interior = (SQRT3 / 4 * r0 * r2, SQRT3 / 4 * r0 * r1, SQRT3 / 4 * r1 * r2)
    exterior = (SQRT3 * r1 * r1, SQRT3 * r2 * r2, SQRT3 * r0 * r0)
    return interior, exterior


def density_report(z: HalfPlanePoint) -> DensityReport:
    interior, exterior = triangle_areas(z)
    areas = tuple(t - math.sqrt(te * t) for t, te in zip(interior, exterior))
    flags = tuple(t >= te for t, te in zip(interior, exterior))
    delta = 0.75 + sum(a for a, f in zip(areas, flags) if f) / SQRT3
    return DensityReport(interior, exterior, areas, flags, delta)


def density_bound(z: HalfPlanePoint) -> float:
    return density_report(z).delta


def exclusion_test(z: HalfPlanePoint, delta_oct: float | None = None) -> bool:
    """True when z lies in the discarded cusp regions of the star domain.

    For such z every disk with critical hexagon H(z) has density above
    ``delta_oct``; the argument is only carried by the cusp regions, so
    ``delta_oct`` is accepted for the caller's bookkeeping.
    """
    return not truncated_star_test(z)
