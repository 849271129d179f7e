import numpy
from setuptools import Extension, setup

# The compiled trig-sum core is optional: the package falls back to a pure
# numpy implementation (toruscrit._kernels_py) when the extension is absent.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "toruscrit._kernels",
                ["src/toruscrit/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
