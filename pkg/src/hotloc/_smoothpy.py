"""Scipy-based fallback for the windowed kernel smoother.

Computes the same normalized windowed sum as the compiled core via two
correlations: one of the data with the truncated kernel and one of an
all-ones map, whose ratio yields the per-pixel kernel average with correct
edge handling.
"""

import numpy as np
from scipy import ndimage


def smooth_windowed(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    num = ndimage.correlate(values, kernel, mode="constant", cval=0.0)
    den = ndimage.correlate(np.ones_like(values), kernel, mode="constant", cval=0.0)
    return num / den
