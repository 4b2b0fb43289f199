"""Build script for the optional compiled kernel core.

The package works without the extension (a pure-numpy fallback is selected
at import time); the extension only accelerates the recurrent/convolution
inner loops.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "gaitpred._kernels._core",
                ["src/gaitpred/_kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
