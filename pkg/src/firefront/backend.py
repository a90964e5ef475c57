"""Engine backend selection: compiled extension if present, else pure Python.

``FIREFRONT_BACKEND=pure`` or ``=compiled`` in the environment forces a
choice (the benchmark uses this to time both).
"""

import os

_forced = os.environ.get("FIREFRONT_BACKEND", "").strip().lower()

if _forced == "pure":
    from firefront import _engine as engine

    BACKEND = "pure"
elif _forced == "compiled":
    from firefront import _engine_compiled as engine  # type: ignore[no-redef]

    if not engine.COMPILED:
        raise RuntimeError(
            "FIREFRONT_BACKEND=compiled but the extension was not built; "
            "run `pip install -e . --no-build-isolation` or `python setup.py build_ext --inplace`"
        )
    BACKEND = "compiled"
else:
    try:
        from firefront import _engine_compiled as engine  # type: ignore[no-redef]

        BACKEND = "compiled" if engine.COMPILED else "pure"
        if not engine.COMPILED:
            from firefront import _engine as engine  # type: ignore[no-redef]
    except ImportError:
        from firefront import _engine as engine  # type: ignore[no-redef]

        BACKEND = "pure"


def load_backend(name: str):
    """Import a specific backend module by name ('pure' or 'compiled')."""
    if name == "pure":
        from firefront import _engine

        return _engine
    if name == "compiled":
        from firefront import _engine_compiled

        if not _engine_compiled.COMPILED:
            raise ImportError("compiled engine not built")
        return _engine_compiled
    raise ValueError(f"unknown backend {name!r}")
