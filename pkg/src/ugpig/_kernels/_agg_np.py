"""Pure-numpy aggregation kernels (fallback backend).

Both backends must accumulate in identical order so that results are
bit-identical: ``np.add.at`` applies unbuffered adds in pair order, matching
the sequential loops in the compiled kernel.
"""

from __future__ import annotations

import numpy as np


def agg_forward(dst, rel, src, inv_deg, rel_emb, s_prev):
    """One aggregation hop: out[x] = inv_deg[x] * sum_{(r,v) at x} rel_emb[r] * s_prev[v]."""
    out = np.zeros_like(s_prev)
    np.add.at(out, dst, rel_emb[rel] * s_prev[src])
    out *= inv_deg[:, None]
    return out


def agg_backward(dst, rel, src, inv_deg, rel_emb, s_prev, g_out):
    """Adjoint of :func:`agg_forward`.

    Returns (g_prev, g_rel): gradients w.r.t. the previous layer state and the
    relation embedding table.
    """
    g_prev = np.zeros_like(s_prev)
    g_rel = np.zeros_like(rel_emb)
    scaled = g_out[dst] * inv_deg[dst][:, None]
    np.add.at(g_rel, rel, scaled * s_prev[src])
    np.add.at(g_prev, src, scaled * rel_emb[rel])
    return g_prev, g_rel
