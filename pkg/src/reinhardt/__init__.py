"""Numerical companion to the Reinhardt optimal-control problem.

Submodules: ``sl2core`` (2x2 algebra and the star domain), ``geometry``
(critical hexagons and density bounds), ``dynamics`` (constant-control
flows), ``extremals`` (smoothed polygons), ``pontryagin`` (the maximum
principle), ``hyperboloid`` (circular control in hyperboloid
coordinates), ``fuller`` (circular and triangular Fuller systems),
``blowup`` (the chart at the singular locus) and ``cli``.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree without install
    __version__ = "0.1.0"

__all__ = ["__version__"]
