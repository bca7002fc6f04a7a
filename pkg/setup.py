import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; molrelay.kernels falls back at import
    cythonize = None

npyrandom = os.path.join(os.path.dirname(np.__file__), "random", "lib")

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "molrelay._kernels",
                ["src/molrelay/_kernels.pyx"],
                include_dirs=[np.get_include()],
                library_dirs=[npyrandom],
                libraries=["npyrandom", "m"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
