import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# The kernels must stay bit-identical to the pure Python fallback:
#   -ffp-contract=off              no FMA contraction
#   -fno-builtin-sin/cos/sincos    stop gcc fusing sin+cos into glibc sincos,
#                                  which rounds differently than separate calls
extensions = [
    Extension(
        "dorval._kernels._speedups",
        ["src/dorval/_kernels/_speedups.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=[
            "-O2",
            "-ffp-contract=off",
            "-fno-builtin-sin",
            "-fno-builtin-cos",
            "-fno-builtin-sincos",
        ],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}),
)
