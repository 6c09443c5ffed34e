"""Build the optional Cython kernels; the package falls back to numpy if this fails."""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("DELAYWAVE_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        extensions = [
            Extension(
                "delaywave._kernels",
                ["src/delaywave/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # no -ffast-math: the bit-level null-solution and delay-onset checks need IEEE semantics
                extra_compile_args=["-O3"],
            )
        ]
        ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})

setup(ext_modules=ext_modules)
