"""Build script for the optional compiled kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so any failure to compile is downgraded to a warning.
"""
import sys

from setuptools import Extension, setup


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"skelmesh: skipping compiled kernels ({exc})", file=sys.stderr)
        return []
    ext = Extension(
        "skelmesh._kernels._core",
        sources=["src/skelmesh/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(ext_modules=_extensions())
