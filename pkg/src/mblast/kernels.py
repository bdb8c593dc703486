"""Kernel backend selection.

The iterative-detector loop and the Viterbi trellis search dominate the
simulation runtime, so both exist twice: a Cython extension
(:mod:`mblast._core`) and a pure-NumPy fallback (:mod:`mblast._core_py`).
The compiled version is preferred when importable; set the environment
variable ``MBLAST_PURE_PYTHON=1`` to force the fallback (used by the
benchmark and the backend-parity tests).
"""

import os

if os.environ.get("MBLAST_PURE_PYTHON", "0") not in ("", "0"):
    from . import _core_py as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        from . import _core_py as _impl

        BACKEND = "numpy"

run_iterations = _impl.run_iterations
viterbi_path = _impl.viterbi_path

__all__ = ["BACKEND", "run_iterations", "viterbi_path"]
