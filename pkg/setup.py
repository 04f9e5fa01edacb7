"""Optional compiled extension for the hot recurrence-walk kernel.

The package is fully functional on the pure-Python fallback; building the
extension is opt-in:

    python setup.py build_ext --inplace

qborel._kernels selects the compiled module at import time when present.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "qborel._kernels._walk",
                sources=["src/qborel/_kernels/_walk.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
