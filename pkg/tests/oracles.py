"""Brute-force references shared by unit and acceptance tests."""

import numpy as np

from regret_shape import fem, geometry
from regret_shape.geometry import Label


def toy_sigma_trace(values, n=16, radius=2.0) -> fem.BoundaryTrace:
    """Trace on an n-node polygonal circle, no mesh needed."""
    pts = geometry.circle(radius, n).sample()
    s = np.concatenate([[0.0], np.cumsum(geometry.polyline_lengths(pts))[:-1]])
    w = geometry.trapezoid_weights(pts)
    return fem.BoundaryTrace(Label.SIGMA, np.arange(n), s, np.asarray(values, float), w)


def grid_fenchel(y: fem.BoundaryTrace, eps, g_a, g_b, levels=201):
    """Per-node grid search of <y, g> - eps/2 |g|^2 over [g_a, g_b].

    A second ``levels``-point grid inside the best cell removes the
    first grid's O(eps * spacing^2) discretization error.
    """
    def best(lo, hi):
        lev = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, levels)
        val = y.values[:, None] * lev - 0.5 * eps * lev**2
        k = np.argmax(val, axis=1)
        rows = np.arange(len(k))
        return lev[rows, k], val[rows, k]

    n = len(y)
    g0, _ = best(np.full(n, float(g_a)), np.full(n, float(g_b)))
    h = (g_b - g_a) / (levels - 1)
    g1, v1 = best(np.maximum(g0 - h, g_a), np.minimum(g0 + h, g_b))
    return float(y.weights @ v1), g1
