"""Build the compiled engine backend.

The numerical core lives in ``src/firefront/_engine.py`` (Cython
pure-Python mode).  It is copied to ``_engine_compiled.py`` and compiled,
so the same source provides both the fast extension and the pure-Python
fallback.  If Cython is unavailable the package installs with the pure
backend only.
"""

import shutil
from pathlib import Path

from setuptools import Extension, setup

HERE = Path(__file__).parent
SRC = HERE / "src" / "firefront" / "_engine.py"
DST = HERE / "src" / "firefront" / "_engine_compiled.py"

ext_modules = []
try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    if not DST.exists() or DST.read_bytes() != SRC.read_bytes():
        shutil.copyfile(SRC, DST)
    ext_modules = cythonize(
        [
            Extension(
                "firefront._engine_compiled",
                ["src/firefront/_engine_compiled.py"],
                # -ffp-contract=off keeps the compiled backend numerically
                # in lockstep with the pure-Python one (no FMA contraction).
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
