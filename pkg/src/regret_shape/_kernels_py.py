"""Pure-numpy reference implementations of the hot mesh kernels.

Every function here has a twin in ``_kernels.pyx`` with the same signature
and semantics. Results agree to rounding, except that point location may
pick a different (equally valid) triangle for points on shared edges.
"""

import numpy as np

BACKEND = "python"


def triangle_geometry(nodes, tris):
    """Signed areas and P1 basis gradients of every triangle.

    Returns
    -------
    areas : (T,) float
    grads : (T, 3, 2) float
        ``grads[t, a]`` is the gradient of the hat function of local vertex a.
    """
    p0 = nodes[tris[:, 0]]
    p1 = nodes[tris[:, 1]]
    p2 = nodes[tris[:, 2]]
    e0 = p2 - p1
    e1 = p0 - p2
    e2 = p1 - p0
    det = e2[:, 0] * (-e1[:, 1]) - e2[:, 1] * (-e1[:, 0])
    areas = 0.5 * det
    grads = np.empty((len(tris), 3, 2))
    # rotate the opposite edge by -90 degrees and scale by 1/(2A);
    # degenerate triangles give inf, as in the compiled kernel
    with np.errstate(divide="ignore", invalid="ignore"):
        for a, e in enumerate((e0, e1, e2)):
            grads[:, a, 0] = -e[:, 1] / det
            grads[:, a, 1] = e[:, 0] / det
    return areas, grads


def stiffness_values(areas, grads):
    """Element stiffness matrices ``A * grad_a . grad_b``, shape (T, 3, 3)."""
    return areas[:, None, None] * np.einsum("tai,tbi->tab", grads, grads)


def _barycentric(nodes, tris, pts, tri_idx):
    p0 = nodes[tris[tri_idx, 0]]
    p1 = nodes[tris[tri_idx, 1]]
    p2 = nodes[tris[tri_idx, 2]]
    det = (p1[..., 0] - p0[..., 0]) * (p2[..., 1] - p0[..., 1]) - (
        p1[..., 1] - p0[..., 1]
    ) * (p2[..., 0] - p0[..., 0])
    dx = pts[..., 0] - p0[..., 0]
    dy = pts[..., 1] - p0[..., 1]
    l1 = (dx * (p2[..., 1] - p0[..., 1]) - dy * (p2[..., 0] - p0[..., 0])) / det
    l2 = ((p1[..., 0] - p0[..., 0]) * dy - (p1[..., 1] - p0[..., 1]) * dx) / det
    return np.stack([1.0 - l1 - l2, l1, l2], axis=-1)


def locate_points(nodes, tris, neighbors, points, start, tol):
    """Find a containing triangle and barycentric coordinates for each point.

    Brute force over all triangles in chunks; ``neighbors`` and ``start`` are
    accepted for signature parity with the compiled walk and ignored.

    Returns ``(tri_idx, bary)``; ``tri_idx[i] == -1`` when point i is farther
    than ``tol`` (in barycentric units) outside every triangle.
    """
    del neighbors, start
    n = len(points)
    out_idx = np.full(n, -1, dtype=np.int64)
    out_bary = np.zeros((n, 3))
    all_t = np.arange(len(tris))
    chunk = max(1, 2_000_000 // max(len(tris), 1))
    for lo in range(0, n, chunk):
        pts = points[lo : lo + chunk]
        bary = _barycentric(nodes, tris, pts[:, None, :], all_t[None, :])
        score = bary.min(axis=2)
        best = np.argmax(score >= -tol, axis=1)
        hit = score[np.arange(len(pts)), best] >= -tol
        # fall back to the least-violating triangle for reporting
        best = np.where(hit, best, np.argmax(score, axis=1))
        out_idx[lo : lo + chunk] = np.where(hit, best, -1)
        out_bary[lo : lo + chunk] = bary[np.arange(len(pts)), best]
    return out_idx, out_bary


def point_polyline_distance(points, poly):
    """Distance from each point to the closed polyline ``poly`` (M, 2)."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    ab = b - a
    len2 = np.einsum("ij,ij->i", ab, ab)
    len2 = np.where(len2 > 0, len2, 1.0)
    out = np.empty(len(points))
    chunk = max(1, 2_000_000 // max(len(a), 1))
    for lo in range(0, len(points), chunk):
        p = points[lo : lo + chunk, None, :]
        ap = p - a[None]
        s = np.clip(np.einsum("pmi,mi->pm", ap, ab) / len2, 0.0, 1.0)
        d = ap - s[..., None] * ab[None]
        out[lo : lo + chunk] = np.sqrt(np.einsum("pmi,pmi->pm", d, d).min(axis=1))
    return out


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def polyline_self_intersects(poly):
    """True if any two non-adjacent edges of the closed polyline touch."""
    m = len(poly)
    if m < 4:
        return False
    a = poly
    b = np.roll(poly, -1, axis=0)
    for i in range(m):
        j = np.arange(i + 2, m)
        if i == 0:
            j = j[j != m - 1]
        if len(j) == 0:
            continue
        o1 = _orient(a[i, 0], a[i, 1], b[i, 0], b[i, 1], a[j, 0], a[j, 1])
        o2 = _orient(a[i, 0], a[i, 1], b[i, 0], b[i, 1], b[j, 0], b[j, 1])
        o3 = _orient(a[j, 0], a[j, 1], b[j, 0], b[j, 1], a[i, 0], a[i, 1])
        o4 = _orient(a[j, 0], a[j, 1], b[j, 0], b[j, 1], b[i, 0], b[i, 1])
        box = (
            (np.minimum(a[j, 0], b[j, 0]) <= max(a[i, 0], b[i, 0]))
            & (np.maximum(a[j, 0], b[j, 0]) >= min(a[i, 0], b[i, 0]))
            & (np.minimum(a[j, 1], b[j, 1]) <= max(a[i, 1], b[i, 1]))
            & (np.maximum(a[j, 1], b[j, 1]) >= min(a[i, 1], b[i, 1]))
        )
        if np.any(box & (o1 * o2 <= 0) & (o3 * o4 <= 0)):
            return True
    return False
