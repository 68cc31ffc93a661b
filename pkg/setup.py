"""Build script for the optional Cython kernels.

The package works without the extension; ``availbound.kernels`` falls back to
pure Python when ``availbound._ckernels`` cannot be imported.
"""
from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:  # no toolchain: pure-Python install
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "availbound._ckernels",
                ["src/availbound/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O2", "-ffp-contract=off"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
