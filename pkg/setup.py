"""Build script: compiles the optional Cython channel kernel.

The package is fully functional without the extension (a vectorized numpy
fallback is selected at import time), so a failed build only costs speed.
"""
import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "thzgen._core.channel_kernels",
                ["src/thzgen/_core/channel_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"thzgen: skipping Cython extension build ({exc}); "
          "using pure-numpy kernels", file=sys.stderr)

setup(ext_modules=ext_modules)
