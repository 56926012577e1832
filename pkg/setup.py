"""Build script: compiles the optional integration kernel extension.

The extension is marked optional; if no C toolchain is available the
package installs anyway and gstamp falls back to the pure-numpy kernels.
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
                "gstamp._speedups",
                sources=["src/gstamp/_speedups.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        language_level="3",
    )

setup(ext_modules=ext_modules)
