"""Gaussian kernel smoothing of weight grids.

The smoothed value of a pixel is the kernel-weighted average of the whole
map, with weights ``exp(-d^2 / (2 h))`` where ``d`` is the Euclidean
distance between pixel centers in normalized map coordinates: pixel ``i``
sits at ``i / (m - 1)``, so the first and last pixel centers are exactly
one map edge apart. The constant Gaussian prefactor cancels in the
average and is omitted.

Kernel entries whose exponential factor falls below ``tail`` are dropped,
which turns the quadratic full-map sum into a banded window pass. Two
interchangeable backends implement that pass: a Cython extension
(``hotloc._smoothcore``) and a scipy correlation fallback, chosen at
import time. ``HOTLOC_SMOOTH_BACKEND=compiled|numpy`` forces one of them.
"""

from __future__ import annotations

import math
import os

import numpy as np

from hotloc import _smoothpy

try:
    from hotloc import _smoothcore
except ImportError:
    _smoothcore = None

DEFAULT_TAIL = 1e-12

_BACKENDS = {"numpy": _smoothpy}
if _smoothcore is not None:
    _BACKENDS["compiled"] = _smoothcore


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def default_backend() -> str:
    forced = os.environ.get("HOTLOC_SMOOTH_BACKEND")
    if forced:
        if forced not in _BACKENDS:
            raise ValueError(
                f"HOTLOC_SMOOTH_BACKEND={forced!r} not available; have {available_backends()}"
            )
        return forced
    return "compiled" if "compiled" in _BACKENDS else "numpy"


def truncated_kernel(m: int, h: float, tail: float = DEFAULT_TAIL) -> np.ndarray:
    """Build the truncated Gaussian kernel for an m x m grid.

    Returns a (2R+1, 2R+1) array of ``exp`` factors with entries below
    ``tail`` zeroed; R is the largest pixel offset whose factor survives,
    capped at m - 1 (a window that already spans the whole map).
    """
    if m < 2:
        raise ValueError("kernel needs m >= 2")
    if h <= 0:
        raise ValueError(f"bandwidth h must be positive, got {h}")
    if not 0 < tail < 1:
        raise ValueError(f"tail must be in (0, 1), got {tail}")
    delta = 1.0 / (m - 1)
    # exp(-(delta*r)^2 / (2h)) >= tail  <=>  r^2 <= -2h*ln(tail)/delta^2
    rmax = math.sqrt(-2.0 * h * math.log(tail)) / delta
    radius = min(int(rmax), m - 1)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    d2 = (offsets[:, None] ** 2 + offsets[None, :] ** 2) * delta**2
    kernel = np.exp(-d2 / (2.0 * h))
    kernel[kernel < tail] = 0.0
    return kernel


def smooth_grid(
    values: np.ndarray,
    h: float,
    tail: float = DEFAULT_TAIL,
    backend: str | None = None,
) -> np.ndarray:
    """Smooth a square grid with the truncated Gaussian kernel average."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValueError(f"expected a square grid, got shape {values.shape}")
    kernel = truncated_kernel(values.shape[0], h, tail)
    name = backend or default_backend()
    if name not in _BACKENDS:
        raise ValueError(f"unknown smoothing backend {name!r}; have {available_backends()}")
    return _BACKENDS[name].smooth_windowed(values, kernel)
