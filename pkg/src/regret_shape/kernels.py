"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
reference implementation. Set ``REGRET_SHAPE_KERNELS=python`` to force the
fallback.
"""

import os

import numpy as np

from . import _kernels_py

if os.environ.get("REGRET_SHAPE_KERNELS", "").lower() == "python":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = _impl.BACKEND


def backend(impl=None):
    """Kernel module for ``impl``: None (active), "python", "cython" or a module."""
    if impl is None:
        return _impl
    if impl == "python":
        return _kernels_py
    if impl == "cython":
        from . import _kernels

        return _kernels
    return impl


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def triangle_geometry(nodes, tris, impl=None):
    return backend(impl).triangle_geometry(_f64(nodes), _i64(tris))


def stiffness_values(areas, grads, impl=None):
    return backend(impl).stiffness_values(_f64(areas), _f64(grads))


def locate_points(nodes, tris, neighbors, points, start, tol=1e-10, impl=None):
    return backend(impl).locate_points(
        _f64(nodes), _i64(tris), _i64(neighbors), _f64(points), _i64(start), float(tol)
    )


def point_polyline_distance(points, poly, impl=None):
    return backend(impl).point_polyline_distance(_f64(points), _f64(poly))


def polyline_self_intersects(poly, impl=None):
    return bool(backend(impl).polyline_self_intersects(_f64(poly)))
