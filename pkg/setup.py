"""Build script for the optional compiled conv kernels.

The extension is a pure speed optimization; if Cython, a C compiler, or the
numpy headers are unavailable the build degrades to the numpy fallback in
opgan._kernels_np and the package stays fully functional.
"""

import logging

from setuptools import setup
from setuptools.command.build_ext import build_ext

log = logging.getLogger("setup")


class OptionalBuildExt(build_ext):
    """build_ext that downgrades compiler failures to a warning."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - depends on toolchain
            log.warning("skipping compiled kernels (%s); using numpy fallback", exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - depends on toolchain
            log.warning("failed to build %s (%s); using numpy fallback", ext.name, exc)


def make_extensions():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:  # pragma: no cover - depends on environment
        log.warning("Cython/numpy unavailable (%s); skipping compiled kernels", exc)
        return []
    ext = Extension(
        "opgan._kernels",
        ["src/opgan/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


setup(
    ext_modules=make_extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
