"""Build script: compiles the optional C extension for the hot kernels.

The package is fully functional without the extension (a NumPy fallback is
selected at import time), so any compilation failure downgrades to a warning
instead of aborting the install.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """build_ext that tolerates a missing compiler / failed compile."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any build failure is non-fatal
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"WARNING: building the mblast._core extension failed ({exc}); "
            "falling back to the pure-NumPy kernels.",
            file=sys.stderr,
        )


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        print(
            "WARNING: Cython not available; skipping the mblast._core "
            "extension (pure-NumPy kernels will be used).",
            file=sys.stderr,
        )
        return []
    ext = Extension(
        "mblast._core",
        ["src/mblast/_core.pyx"],
        extra_compile_args=["-O3", "-march=native"],
    )
    return cythonize([ext], language_level=3)


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
