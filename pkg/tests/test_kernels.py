"""Compiled kernels against the pure-Python reference."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from regret_shape import _kernels_py, kernels

compiled = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled core not built")
IMPLS = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])

coords = st.floats(-3, 3, allow_nan=False, width=64)


def _triangles(draw_pts):
    pts = np.asarray(draw_pts, dtype=float).reshape(-1, 3, 2)
    nodes = pts.reshape(-1, 2)
    tris = np.arange(len(nodes)).reshape(-1, 3)
    return nodes, tris


@given(hnp.arrays(np.float64, (6, 3, 2), elements=coords))
def test_triangle_geometry_parity(pts):
    nodes, tris = _triangles(pts)
    a_py, g_py = kernels.triangle_geometry(nodes, tris, impl="python")
    for impl in IMPLS:
        a, g = kernels.triangle_geometry(nodes, tris, impl=impl)
        np.testing.assert_allclose(a, a_py, rtol=1e-12, atol=1e-14)
        ok = np.abs(a_py) > 1e-6
        np.testing.assert_allclose(g[ok], g_py[ok], rtol=1e-9, atol=1e-9)


def test_reference_triangle_oracle():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    tris = np.array([[0, 1, 2]])
    for impl in IMPLS:
        a, g = kernels.triangle_geometry(nodes, tris, impl=impl)
        assert a[0] == pytest.approx(0.5)
        np.testing.assert_allclose(g[0], [[-1, -1], [1, 0], [0, 1]], atol=1e-15)
        k = kernels.stiffness_values(a, g, impl=impl)[0]
        np.testing.assert_allclose(k, [[1, -0.5, -0.5], [-0.5, 0.5, 0], [-0.5, 0, 0.5]], atol=1e-15)


@given(hnp.arrays(np.float64, (20, 2), elements=coords), hnp.arrays(np.float64, (7, 2), elements=coords))
def test_point_polyline_distance_parity(points, poly):
    ref = _kernels_py.point_polyline_distance(points, poly)
    for impl in IMPLS:
        np.testing.assert_allclose(kernels.point_polyline_distance(points, poly, impl=impl), ref,
                                   rtol=1e-12, atol=1e-12)


def test_point_polyline_distance_oracle():
    sq = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    pts = np.array([[0.5, 0.5], [2.0, 0.5], [-1.0, -1.0]])
    for impl in IMPLS:
        np.testing.assert_allclose(kernels.point_polyline_distance(pts, sq, impl=impl),
                                   [0.5, 1.0, np.sqrt(2)], atol=1e-15)


@given(st.integers(4, 40), st.floats(0.0, 0.6), st.integers(0, 2**31 - 1))
def test_self_intersection_parity(n, noise, seed):
    rng = np.random.default_rng(seed)
    t = 2 * np.pi * np.arange(n) / n
    r = 1.0 + noise * rng.standard_normal(n)
    poly = np.column_stack([r * np.cos(t), r * np.sin(t)])
    ref = _kernels_py.polyline_self_intersects(poly)
    for impl in IMPLS:
        assert kernels.polyline_self_intersects(poly, impl=impl) == ref


def test_self_intersection_oracle():
    square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    bowtie = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    for impl in IMPLS:
        assert not kernels.polyline_self_intersects(square, impl=impl)
        assert kernels.polyline_self_intersects(bowtie, impl=impl)


def test_locate_parity(ref_mesh, rng):
    m = ref_mesh
    pts = m.nodes[rng.integers(0, m.n_nodes, 50)] * 0.999 + 0.001 * rng.standard_normal((50, 2))
    start = np.zeros(len(pts), dtype=np.int64)
    out = []
    for impl in IMPLS:
        out.append(kernels.locate_points(m.nodes, m.triangles, m.neighbors, pts, start, impl=impl))
    for idx, bary in out[1:]:
        np.testing.assert_array_equal(idx, out[0][0])
        np.testing.assert_allclose(bary, out[0][1], atol=1e-13)
    idx, bary = out[0]
    found = idx >= 0
    assert found.any()
    recon = np.einsum("pk,pkd->pd", bary[found], m.nodes[m.triangles[idx[found]]])
    np.testing.assert_allclose(recon, pts[found], atol=1e-12)


@compiled
def test_env_selects_python_backend():
    env = dict(os.environ, REGRET_SHAPE_KERNELS="python")
    out = subprocess.run([sys.executable, "-c", "from regret_shape import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
