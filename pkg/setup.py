"""Build script for the optional compiled kernel extension.

The package works without the extension (pure-Python kernels are selected at
import time); building it just makes the big-integer and pixel loops fast.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if we can, fall back to pure Python if not."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler / libgmp
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            "warning: could not build parksense._kernels (%s); "
            "falling back to pure-Python kernels" % exc,
            file=sys.stderr,
        )


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    exts = [
        Extension(
            "parksense._kernels",
            ["src/parksense/_kernels.pyx"],
            libraries=["gmp"],
        )
    ]
    return cythonize(exts, compiler_directives={"language_level": "3"})


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
