import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the C core if possible; fall back to pure Python otherwise.

    The package is fully functional without the extension (selection
    happens at import time in attnbench.backend), so a missing compiler
    must not break installation.
    """

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: C core build failed ({exc}); "
                  "installing with the pure-Python backend only")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: building {ext.name} failed ({exc}); "
                  "the pure-Python backend will be used")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("warning: Cython not available; skipping the C core")
        return []
    compile_args = ["-O3", "-funroll-loops", "-fopenmp"]
    if os.environ.get("ATTNBENCH_PORTABLE") != "1":
        compile_args.append("-march=native")
    ext = Extension(
        "attnbench._core",
        sources=["src/attnbench/_core.pyx", "src/attnbench/csrc/kernels.c"],
        include_dirs=["src/attnbench/csrc"],
        extra_compile_args=compile_args,
        extra_link_args=["-fopenmp"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
