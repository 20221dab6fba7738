import numpy as np
from setuptools import setup

# The compiled kernel core is optional: if Cython or a C compiler is
# missing the package falls back to the numpy implementation at import.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/somspike/_kernels/_core.pyx",
        language_level=3,
        compiler_directives={"boundscheck": False, "wraparound": False, "cdivision": True},
    )
except ImportError:
    ext_modules = []

setup(
    ext_modules=ext_modules,
    include_dirs=[np.get_include()],
)
