"""Build script: compiles the optional Cython integration kernel.

The package works without the extension (a pure-numpy fallback is selected
at import time), so a failed extension build only costs speed.
"""
from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "ionreg._kernel",
                ["src/ionreg/_kernel.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # -fcx-limited-range: complex multiplies inline instead of
                # calling __muldc3; the kernel never produces NaN/Inf operands.
                # -ffp-contract=off: no FMA contraction, so results stay
                # bit-identical to the numpy fallback kernel.
                extra_compile_args=["-O3", "-fcx-limited-range", "-ffp-contract=off"],
            )
        ],
        language_level="3",
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
