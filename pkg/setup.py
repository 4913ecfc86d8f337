"""Build script for the compiled sieve/convolution core.

The compiled extension is optional at runtime: apvar._core falls back to a
pure-Python implementation when the extension is missing or when
APVAR_FORCE_PURE=1 is set.
"""

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "apvar._core._kernels",
        ["src/apvar/_core/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
)
