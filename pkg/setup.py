"""Build script for the optional compiled smoothing kernel.

The package is fully functional without the extension: hotloc.smoothing
falls back to a scipy-based implementation when hotloc._smoothcore is not
importable. Install with ``pip install -e . --no-build-isolation``.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "hotloc._smoothcore",
        ["src/hotloc/_smoothcore.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(extensions, language_level=3) if cythonize else [],
)
