# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled core for the windowed Gaussian kernel smoother.

For every pixel, accumulates the kernel-weighted sum of the input and the
sum of the kernel weights over the window that stays inside the map, and
returns their ratio. Kernel entries equal to zero (truncated tail) are
skipped.
"""

import numpy as np


def smooth_windowed(double[:, ::1] values, double[:, ::1] kernel):
    cdef Py_ssize_t m = values.shape[0]
    cdef Py_ssize_t radius = kernel.shape[0] // 2
    out_arr = np.empty((m, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, di, dj, ii, jj
    cdef double num, den, g

    for i in range(m):
        for j in range(m):
            num = 0.0
            den = 0.0
            for di in range(-radius, radius + 1):
                ii = i + di
                if ii < 0 or ii >= m:
                    continue
                for dj in range(-radius, radius + 1):
                    jj = j + dj
                    if jj < 0 or jj >= m:
                        continue
                    g = kernel[di + radius, dj + radius]
                    if g == 0.0:
                        continue
                    num += g * values[ii, jj]
                    den += g
            out[i, j] = num / den
    return out_arr
