"""Build script for the optional compiled aggregation kernels.

The package works without the extension (a numpy fallback is selected at
import time); the extension only speeds up the edge-wise aggregation loops.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "ugpig._kernels._agg_cy",
                ["src/ugpig/_kernels/_agg_cy.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    extensions = []

setup(ext_modules=extensions)
