import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "acbm._kernel",
                ["src/acbm/_kernel.pyx"],
                extra_compile_args=["-O3"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    # The package still works without the compiled kernel: sampler falls
    # back to the pure-Python twin at import time.
    ext_modules = []

setup(ext_modules=ext_modules)
