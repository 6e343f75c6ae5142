"""Backend selection for the aggregation kernels.

Prefers the compiled extension; falls back to the numpy implementation when
the extension is unavailable or ``UGPIG_PURE_PYTHON`` is set. Both backends
produce bit-identical results.
"""

import os

if os.environ.get("UGPIG_PURE_PYTHON"):
    from ._agg_np import agg_backward, agg_forward

    BACKEND = "numpy"
else:
    try:
        from ._agg_cy import agg_backward, agg_forward

        BACKEND = "compiled"
    except ImportError:
        from ._agg_np import agg_backward, agg_forward

        BACKEND = "numpy"

__all__ = ["agg_forward", "agg_backward", "BACKEND"]
