"""Build script: compiles the optional native kernel extension.

The package works without the extension (a pure-NumPy fallback is selected
at import time), so the extension is marked optional and a failed compile
does not abort installation.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "eit._kernels._native",
                ["src/eit/_kernels/_native.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
