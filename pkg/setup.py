"""Build script: compiles the optional similarity-kernel extension.

The package works without the extension (a numpy fallback is selected at
import time); building it just makes fragment retrieval and eviction scans
faster. Any failure here should therefore degrade to a pure-Python install
rather than abort.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "agentnet._kernels",
                ["src/agentnet/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
