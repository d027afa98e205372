import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "torusdyn._kernels",
                ["src/torusdyn/_kernels.pyx"],
                extra_compile_args=["-O3", "-fno-math-errno"],
                include_dirs=[numpy.get_include()],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": True,
        },
    )
except ImportError:
    # No Cython: the package still works through the pure-numpy backend.
    ext_modules = []

setup(ext_modules=ext_modules)
