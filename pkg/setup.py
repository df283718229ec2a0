"""Build the optional compiled kernels; installs pure Python if compilation fails."""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # no compiler, no Cython, ...
            print(f"warning: compiled kernels not built ({exc}); using numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: could not build {ext.name} ({exc}); using numpy fallback")


def extensions():
    if os.environ.get("COMMLAB_NO_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    flags = ["-O3", "-ffast-math"]
    if not os.environ.get("COMMLAB_PORTABLE"):
        flags += ["-march=native", "-fopenmp-simd"]
    ext = Extension("commlab.autograd._ckernels", ["src/commlab/autograd/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()], extra_compile_args=flags,
                    libraries=["m"] + ([] if os.environ.get("COMMLAB_PORTABLE") else ["mvec"]),
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")])
    return cythonize([ext], quiet=True)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
