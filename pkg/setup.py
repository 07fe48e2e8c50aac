"""Build script for the optional compiled Monte Carlo kernel.

The package is pure Python plus one Cython extension for the hot
per-round simulation loop.  If Cython or a C compiler is unavailable
the build silently skips the extension and the package falls back to
the vectorized NumPy kernel at import time.
"""
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """build_ext that degrades to the pure-Python fallback on failure."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"WARNING: building the compiled kernel failed ({exc}); "
            "pmqkd will use the NumPy fallback.",
            file=sys.stderr,
        )


ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "pmqkd._mckernel",
                ["src/pmqkd/_mckernel.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    print("WARNING: Cython not found; skipping compiled kernel.", file=sys.stderr)

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
