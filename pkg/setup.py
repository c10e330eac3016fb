"""Builds the optional compiled decoder; the package falls back to pure Python without it."""

import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("MECSCHED_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [Extension("mecsched._decode", ["src/mecsched/_decode.pyx"],
                       include_dirs=[np.get_include()],
                       define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                       extra_compile_args=["-O3"])],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
