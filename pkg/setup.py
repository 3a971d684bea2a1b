"""Builds the optional compiled kernels; the package falls back to numpy without them."""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("NRHLC_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("nrhlc._kernels._lstm", ["src/nrhlc/_kernels/_lstm.pyx"],
                       include_dirs=[np.get_include()],
                       extra_compile_args=["-O3", "-march=native", "-ffast-math"],
                       libraries=["mvec", "m"])],
            compiler_directives={"language_level": 3},
        )

setup(ext_modules=ext_modules)
