"""Build script: compiles the optional accelerator extension.

The package is fully functional without the extension (a NumPy fallback is
selected at import time), so any compilation failure downgrades to a pure
Python install instead of aborting.
"""

import sys

from setuptools import setup


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "gcwaves._accel",
        sources=["src/gcwaves/_accel.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


try:
    setup(ext_modules=_extensions())
except SystemExit:
    raise
except Exception as exc:  # compiler missing, etc.
    print(f"gcwaves: extension build failed ({exc}); installing pure-Python", file=sys.stderr)
    setup(ext_modules=[])
