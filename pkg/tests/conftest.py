"""Shared hypothesis strategies and fixtures."""

import math

import numpy as np
import pytest
from hypothesis import settings, strategies as st

from reinhardt.sl2core import HalfPlanePoint, star_domain_test

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

SQRT3 = math.sqrt(3.0)

finite = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False, allow_infinity=False)
sl2_vectors = st.tuples(finite, finite, finite).map(np.array)


@st.composite
def star_points(draw, y_max=6.0):
    """Points of the star domain (the ideal triangle in the upper half-plane)."""
    x = draw(st.floats(min_value=-0.99 / SQRT3, max_value=0.99 / SQRT3))
    y_min = math.sqrt(max(1.0 / 3.0 - x * x, 0.0)) + 1e-3
    y = draw(st.floats(min_value=y_min, max_value=y_max))
    z = HalfPlanePoint(x, y)
    assert star_domain_test(z)
    return z


@st.composite
def simplex_controls(draw):
    """Barycentric coordinates (u0, u1, u2) on the closed triangle."""
    a = draw(st.floats(min_value=0.0, max_value=1.0))
    b = draw(st.floats(min_value=0.0, max_value=1.0))
    if a + b > 1.0:
        a, b = 1.0 - a, 1.0 - b
    return (a, b, 1.0 - a - b)


def random_star_points(rng: np.random.Generator, n: int, y_max: float = 6.0) -> np.ndarray:
    """Vectorized rejection sampling of star-domain points as complex numbers."""
    out = []
    while sum(len(o) for o in out) < n:
        x = rng.uniform(-1 / SQRT3, 1 / SQRT3, 4 * n)
        y = rng.uniform(1e-6, y_max, 4 * n)
        keep = x * x + y * y > 1.0 / 3.0
        out.append(x[keep] + 1j * y[keep])
    return np.concatenate(out)[:n]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per criterion at the end of the run

ACCEPTANCE: dict[int, list[tuple[str, bool]]] = {}


@pytest.fixture
def criterion():
    """Record the outcome of one acceptance check: criterion(number, label, ok)."""
    def record(number: int, label: str, ok: bool) -> bool:
        ok = bool(ok)
        ACCEPTANCE.setdefault(number, []).append((label, ok))
        print(f"criterion {number} [{label}]: {'PASS' if ok else 'FAIL'}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[number]
        verdict = "PASS" if all(ok for _, ok in checks) else "FAIL"
        detail = "; ".join(f"{label}: {'PASS' if ok else 'FAIL'}" for label, ok in checks)
        terminalreporter.write_line(f"criterion {number:2d}: {verdict}  ({detail})")
