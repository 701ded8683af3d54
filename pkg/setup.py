import os

from setuptools import Extension, setup

# The compiled kernels are optional: qvlab._kernels falls back to the pure
# Python implementation when the extension is absent (QVLAB_NO_EXT=1 skips
# the build entirely).
ext_modules = []
if not os.environ.get("QVLAB_NO_EXT"):
    try:
        from Cython.Build import cythonize

        directives = {
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": "3",
        }
        ext_modules = cythonize(
            [Extension("qvlab._kernels._core", ["src/qvlab/_kernels/_core.pyx"])],
            compiler_directives=directives,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
