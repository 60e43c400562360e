import os
import platform
import sys

from setuptools import setup

ext_modules = []
if os.environ.get("TENNET_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        # no fp contraction or reassociation: GCC versions some loops on
        # runtime alias checks, and the versions must round identically
        compile_args = ["-O3", "-fno-math-errno", "-ffp-contract=off"]
        link_args = []
        macros = []
        if sys.platform.startswith("linux"):
            compile_args.append("-march=native")
            link_args = ["-lm"]
            libc = os.confstr("CS_GNU_LIBC_VERSION") or ""
            if platform.machine() == "x86_64" and libc.startswith("glibc "):
                major, minor = (int(v) for v in libc.split()[1].split(".")[:2])
                if (major, minor) >= (2, 35):
                    # glibc's AVX-512 vector tanh (libmvec) is used when the CPU has it
                    macros.append(("TENNET_MVEC_TANH", "1"))
                    link_args = ["-lmvec", "-lm"]
        ext_modules = cythonize(
            [
                Extension(
                    "tennet._kernels",
                    ["src/tennet/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=compile_args,
                    extra_link_args=link_args,
                    define_macros=macros,
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        # the pure-python kernels are picked up at import time
        ext_modules = []

setup(ext_modules=ext_modules)
