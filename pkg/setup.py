"""Build script. The compiled correlator kernels are optional: if Cython or a
C compiler is unavailable the package installs anyway and falls back to the
pure-numpy kernels at import time."""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "spsim._kernels._ext",
                ["src/spsim/_kernels/_ext.pyx"],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
