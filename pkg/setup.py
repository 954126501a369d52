import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "percap._corekern",
                ["src/percap/_corekern.pyx"],
                extra_compile_args=["-O3"],
                include_dirs=[np.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    # no Cython: the pure numpy backend in percap._kernels_py is used instead
    ext_modules = []

setup(ext_modules=ext_modules)
