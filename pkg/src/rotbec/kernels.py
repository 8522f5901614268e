"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``ROTBEC_PURE_PYTHON=1``
to force the NumPy fallback.  ``BACKEND`` names the active choice.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("ROTBEC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

magnetic_laplacian = _impl.magnetic_laplacian
magnetic_kinetic_energy = _impl.magnetic_kinetic_energy
vortex_phase = _impl.vortex_phase

__all__ = ["BACKEND", "magnetic_laplacian", "magnetic_kinetic_energy", "vortex_phase"]
