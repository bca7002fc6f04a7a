"""Backend selection for the molecule-tracking kernel.

The compiled extension is used when it imports; setting the environment
variable ``MOLRELAY_PURE_PYTHON=1`` forces the pure-Python twin.  Both
produce identical counts for the same generator state.
"""

from __future__ import annotations

import logging
import os

from . import _fallback

log = logging.getLogger(__name__)

_compiled = None
if not os.environ.get("MOLRELAY_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        log.debug("compiled kernel unavailable, using the pure-Python backend")

BACKEND = "compiled" if _compiled is not None else "python"
radial_counts = _compiled.radial_counts if _compiled is not None else _fallback.radial_counts

BACKENDS = {"python": _fallback.radial_counts}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled.radial_counts
