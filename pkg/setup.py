# Builds the compiled likelihood kernels. A plain `pip install .` without
# Cython or a C compiler still yields a working package: pmclogit._kernels
# falls back to the numpy implementation at import time.
from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "pmclogit._kernels._likelihood",
                ["src/pmclogit/_kernels/_likelihood.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
