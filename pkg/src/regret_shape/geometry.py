"""Annular domains: boundary curves, triangulation, node motion, remeshing.

Node ordering convention for every mesh built here::

    [ fixed nodes | Gamma loop nodes (loop order) | movable interior nodes ]

Fixed nodes are everything outside the open band between the inner boundary
and the first interior curve. Remeshing only ever rebuilds the last block, so
arrays indexed by fixed-node or Gamma-loop position stay valid for a run.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import triangle

from . import kernels
from .errors import (
    CurveIntersection,
    ElementInversion,
    MeshingFailure,
    SelfIntersectingBoundary,
)


class Label(enum.IntEnum):
    NONE = 0
    SIGMA = 1
    GAMMA = 2
    OMEGA_INNER = 3
    OMEGA_OUTER = 4
    GAMMA_D = 5


class Region(enum.IntEnum):
    INNER = 0
    OMEGA = 1
    OUTER = 2


# ---------------------------------------------------------------------------
# curves


@dataclass(frozen=True)
class BoundaryCurve:
    """A closed curve sampled at ``sample_count`` uniformly spaced parameters.

    ``kind`` is ``"circle"`` (``center``, ``radius``), ``"arrowhead"``
    (``x1 = a(cos t + b cos 2t) + cx``, ``x2 = c sin t + cy`` with
    ``amplitude = (a, b, c)``) or ``"polyline"`` (explicit ``points``).
    """

    kind: str
    sample_count: int
    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    amplitude: tuple = (0.4, 0.4, 0.3)
    points: np.ndarray | None = field(default=None, compare=False)

    def sample(self) -> np.ndarray:
        """CCW samples, shape (n, 2); the closing point is implicit."""
        n = self.sample_count
        t = 2.0 * np.pi * np.arange(n) / n
        cx, cy = self.center
        if self.kind == "circle":
            return np.column_stack([cx + self.radius * np.cos(t), cy + self.radius * np.sin(t)])
        if self.kind == "arrowhead":
            a, b, c = self.amplitude
            return np.column_stack([cx + a * (np.cos(t) + b * np.cos(2 * t)), cy + c * np.sin(t)])
        if self.kind == "polyline":
            pts = np.asarray(self.points, dtype=float)
            if len(pts) > 1 and np.allclose(pts[0], pts[-1]):
                pts = pts[:-1]
            if polygon_area(pts) < 0:
                pts = pts[::-1]
            return pts
        raise ValueError(f"unknown curve kind {self.kind!r}")

    def scaled(self, factor: float) -> "BoundaryCurve":
        """Same curve with the sample count multiplied by ``factor``."""
        if self.kind == "polyline":
            return self
        n = max(8, int(round(self.sample_count * factor)))
        return BoundaryCurve(self.kind, n, self.center, self.radius, self.amplitude)


def circle(radius, n, center=(0.0, 0.0)) -> BoundaryCurve:
    return BoundaryCurve("circle", n, center=tuple(center), radius=float(radius))


def arrowhead(n) -> BoundaryCurve:
    return BoundaryCurve("arrowhead", n)


def polygon_area(pts) -> float:
    """Signed shoelace area (positive for CCW)."""
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def points_in_polygon(points, poly) -> np.ndarray:
    """Even-odd ray casting, vectorized over points."""
    px = points[:, 0][:, None]
    py = points[:, 1][:, None]
    ax, ay = poly[:, 0][None, :], poly[:, 1][None, :]
    bx, by = np.roll(poly[:, 0], -1)[None, :], np.roll(poly[:, 1], -1)[None, :]
    cond = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = ax + (py - ay) * (bx - ax) / (by - ay)
    crossings = cond & (px < xint)
    return (crossings.sum(axis=1) % 2) == 1


def polyline_lengths(loop_pts) -> np.ndarray:
    """Lengths of the closed polyline's edges, edge i joining i -> i+1."""
    return np.linalg.norm(np.roll(loop_pts, -1, axis=0) - loop_pts, axis=1)


def trapezoid_weights(loop_pts) -> np.ndarray:
    """Per-node trapezoidal (lumped mass) weights of a closed polyline."""
    e = polyline_lengths(loop_pts)
    return 0.5 * (e + np.roll(e, 1))


def edge_normals(loop_pts, outward_left: bool) -> np.ndarray:
    """Unit edge normals; left of the CCW tangent when ``outward_left``."""
    t = np.roll(loop_pts, -1, axis=0) - loop_pts
    t = t / np.linalg.norm(t, axis=1)[:, None]
    left = np.column_stack([-t[:, 1], t[:, 0]])
    return left if outward_left else -left


def node_normals(loop_pts, outward_left: bool) -> np.ndarray:
    """Half-length-weighted node normals ``sum_e |e| nu_e / 2`` (not unit)."""
    e = polyline_lengths(loop_pts)
    nu = edge_normals(loop_pts, outward_left) * e[:, None] * 0.5
    return nu + np.roll(nu, 1, axis=0)


# ---------------------------------------------------------------------------
# mesh


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable conforming triangulation with labeled boundary loops.

    ``loop_nodes`` maps each present :class:`Label` to its CCW node loop.
    Loops of labels SIGMA and OMEGA_OUTER bound from outside, GAMMA / GAMMA_D
    from inside; the outward normal of the domain on the inner loop points
    into the hole.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    tri_region: np.ndarray
    loop_nodes: dict
    n_fixed: int
    inner_label: Label = Label.GAMMA

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.triangles.setflags(write=False)
        self.tri_region.setflags(write=False)

    def __reduce__(self):
        # cached factorizations are not picklable; rebuild lazily
        return (type(self), (self.nodes, self.triangles, self.tri_region, self.loop_nodes,
                             self.n_fixed, self.inner_label))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_gamma(self) -> int:
        return len(self.loop_nodes[self.inner_label])

    @cached_property
    def node_labels(self) -> np.ndarray:
        lab = np.zeros(self.n_nodes, dtype=np.int64)
        for label, ids in self.loop_nodes.items():
            lab[ids] = int(label)
        return lab

    @cached_property
    def boundary_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """All labeled loop edges (CCW oriented) and their labels."""
        edges, labels = [], []
        for label, ids in sorted(self.loop_nodes.items()):
            edges.append(np.column_stack([ids, np.roll(ids, -1)]))
            labels.append(np.full(len(ids), int(label)))
        return np.vstack(edges), np.concatenate(labels)

    @cached_property
    def geometry(self):
        """(areas, basis gradients) from the active kernel backend."""
        return kernels.triangle_geometry(self.nodes, self.triangles)

    @property
    def areas(self) -> np.ndarray:
        return self.geometry[0]

    @cached_property
    def neighbors(self) -> np.ndarray:
        """Triangle across the edge opposite each local vertex, -1 if none."""
        t = self.triangles
        nt = len(t)
        local = np.array([[1, 2], [2, 0], [0, 1]])
        e = np.sort(t[:, local], axis=2).reshape(-1, 2)
        owner = np.repeat(np.arange(nt), 3)
        key = e[:, 0] * self.n_nodes + e[:, 1]
        order = np.argsort(key, kind="stable")
        ks = key[order]
        nb = np.full(3 * nt, -1, dtype=np.int64)
        same = np.nonzero(ks[1:] == ks[:-1])[0]
        a, b = order[same], order[same + 1]
        nb[a] = owner[b]
        nb[b] = owner[a]
        return nb.reshape(nt, 3)

    @cached_property
    def node_to_triangle(self) -> np.ndarray:
        out = np.empty(self.n_nodes, dtype=np.int64)
        out[self.triangles.ravel()] = np.repeat(np.arange(len(self.triangles)), 3)
        return out

    @cached_property
    def cache(self) -> dict:
        """Scratch space for solver factorizations tied to this mesh."""
        return {}

    def loop_points(self, label) -> np.ndarray:
        return self.nodes[self.loop_nodes[Label(label)]]

    @property
    def gamma_points(self) -> np.ndarray:
        return self.loop_points(self.inner_label)

    @cached_property
    def omega_nodes(self) -> np.ndarray:
        """Nodes of the closed omega sub-triangulation."""
        tris = self.triangles[self.tri_region == Region.OMEGA]
        return np.unique(tris)

    @cached_property
    def movable_block(self) -> slice:
        return slice(self.n_fixed, self.n_nodes)

    def total_area(self) -> float:
        return float(self.areas.sum())


@dataclass(frozen=True)
class MeshQuality:
    min_quality: float
    min_area: float
    worst_triangle: int


def _band_seed(inner_pts, outward: bool):
    """A point just off the inner curve's first usable edge midpoint."""
    e = polyline_lengths(inner_pts)
    nrm = edge_normals(inner_pts, outward_left=not outward)
    mid = 0.5 * (inner_pts + np.roll(inner_pts, -1, axis=0))
    for i in range(len(inner_pts)):
        p = mid[i] + 1e-3 * e[i] * nrm[i]
        inside = points_in_polygon(p[None], inner_pts)[0]
        if inside != outward:
            return p
    raise MeshingFailure("could not seed a region point")


def _check_nesting(curves_out_to_in):
    for pts in curves_out_to_in:
        if kernels.polyline_self_intersects(pts):
            raise CurveIntersection("boundary curve is not simple")
    for outer, inner in zip(curves_out_to_in[:-1], curves_out_to_in[1:]):
        if not points_in_polygon(inner, outer).all() or points_in_polygon(outer, inner).any():
            raise CurveIntersection("curves are not nested")
        gap = kernels.point_polyline_distance(inner, outer).min()
        if gap <= 0:
            raise CurveIntersection("curves touch")


def _mean_spacing(pts) -> float:
    return float(polyline_lengths(pts).mean())


def _triangulate(loops_pts, holes, band_seeds, band_areas, min_angle=30):
    vertices = np.vstack(loops_pts)
    segs, off = [], 0
    for pts in loops_pts:
        n = len(pts)
        segs.append(np.column_stack([off + np.arange(n), off + (np.arange(n) + 1) % n]))
        off += n
    regions = [[s[0], s[1], k, a] for k, (s, a) in enumerate(zip(band_seeds, band_areas))]
    data = dict(vertices=vertices, segments=np.vstack(segs), regions=regions)
    if holes:
        data["holes"] = np.asarray(holes)
    try:
        out = triangle.triangulate(data, f"pq{min_angle}YYAaQ")
    except Exception as exc:  # triangle raises plain RuntimeError
        raise MeshingFailure(str(exc)) from exc
    if "triangles" not in out or len(out["triangles"]) == 0:
        raise MeshingFailure("triangulation produced no triangles")
    if len(out["vertices"]) < len(vertices) or not np.array_equal(
        out["vertices"][: len(vertices)], vertices
    ):
        raise MeshingFailure("mesher altered boundary vertices")
    tris = out["triangles"].astype(np.int64)
    band = out["triangle_attributes"][:, 0].astype(np.int64)
    return out["vertices"], tris, band


def _orient_ccw(nodes, tris):
    p = nodes[tris]
    det = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (
        p[:, 2, 0] - p[:, 0, 0]
    )
    tris = tris.copy()
    flip = det < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    if np.any(det == 0):
        raise MeshingFailure("degenerate triangle in mesher output")
    return tris


def _assemble(nodes, tris, band, loops: dict, band_regions, inner_label, movable_band):
    """Apply the node-ordering convention and wrap everything in a Mesh."""
    n = len(nodes)
    gamma_ids = loops.get(inner_label, np.zeros(0, dtype=np.int64))
    on_loop = np.zeros(n, dtype=bool)
    for ids in loops.values():
        on_loop[ids] = True
    in_band = np.zeros(n, dtype=bool)
    if movable_band is not None:
        in_band[tris[band == movable_band].ravel()] = True
    movable = in_band & ~on_loop
    is_gamma = np.zeros(n, dtype=bool)
    is_gamma[gamma_ids] = True
    fixed = np.nonzero(~movable & ~is_gamma)[0]
    order = np.concatenate([fixed, gamma_ids, np.nonzero(movable)[0]])
    inv = np.empty(n, dtype=np.int64)
    inv[order] = np.arange(n)
    new_tris = _orient_ccw(nodes[order], inv[tris])
    region = np.asarray(band_regions, dtype=np.int64)[band]
    new_loops = {Label(k): inv[v] for k, v in loops.items()}
    return Mesh(
        nodes=np.ascontiguousarray(nodes[order], dtype=float),
        triangles=np.ascontiguousarray(new_tris),
        tri_region=region,
        loop_nodes=new_loops,
        n_fixed=len(fixed),
        inner_label=Label(inner_label),
    )


def build_annulus(
    outer: BoundaryCurve,
    inner: BoundaryCurve | None,
    interior_curves=(),
    resolution: float = 1.0,
    inner_label=Label.GAMMA,
) -> Mesh:
    """Conforming Delaunay mesh of the region between ``outer`` and ``inner``.

    ``interior_curves`` (outer to inner order not required) become mesh
    lines; with two of them they bound omega and get OMEGA_OUTER /
    OMEGA_INNER labels. ``resolution`` scales every sample count.
    ``inner=None`` meshes the full region inside ``outer``.
    """
    curves = [outer] + sorted(interior_curves, key=lambda c: -abs(polygon_area(c.sample())))
    if inner is not None:
        curves.append(inner)
    for c in curves:
        if round(c.sample_count * resolution) < 8 and c.kind != "polyline":
            raise ValueError("resolution below 8 samples per curve")
    pts = [c.scaled(resolution).sample() if resolution != 1.0 else c.sample() for c in curves]
    _check_nesting(pts)

    labels = [Label.SIGMA]
    mids = len(interior_curves)
    if mids == 2:
        labels += [Label.OMEGA_OUTER, Label.OMEGA_INNER]
    elif mids:
        labels += [Label.NONE] * mids
    if inner is not None:
        labels.append(Label(inner_label))

    # bands from outside in: band k lies between curve k and curve k+1
    n_bands = len(pts) - 1 if inner is not None else len(pts)
    seeds, areas = [], []
    for k in range(n_bands):
        if k + 1 < len(pts):
            seeds.append(_band_seed(pts[k + 1], outward=True))
            h = 0.5 * (_mean_spacing(pts[k]) + _mean_spacing(pts[k + 1]))
        else:
            seeds.append(_band_seed(pts[k], outward=False))
            h = _mean_spacing(pts[k])
        areas.append(np.sqrt(3) / 4 * h * h)
    holes = [_band_seed(pts[-1], outward=False)] if inner is not None else []

    verts, tris, band = _triangulate(pts, holes, seeds, areas)
    offsets = np.cumsum([0] + [len(p) for p in pts])
    loops = {}
    for k, lab in enumerate(labels):
        if lab != Label.NONE:
            loops[lab] = np.arange(offsets[k], offsets[k + 1])

    # region of each band, indexed by band id (outside in)
    if mids == 2:
        band_regions = [Region.OUTER, Region.OMEGA] + [Region.INNER] * (n_bands - 2)
        movable_band = 2 if inner is not None else None
    else:
        band_regions = [Region.INNER] * n_bands
        movable_band = n_bands - 1 if inner is not None else None
    return _assemble(verts, tris, band, loops, band_regions, inner_label, movable_band)


def reference_curves(scale: float = 1.0):
    """Sigma, Gamma(phi^0) and the two omega circles at the reference sample counts."""
    s = lambda n: max(8, int(round(n * scale)))  # noqa: E731
    sigma = circle(2.0, s(160))
    gamma = circle(0.75, s(100))
    omega = [circle(1.0, s(120)), circle(1.75, s(140))]
    return sigma, gamma, omega


def hidden_curve(kind: str, scale: float = 1.0) -> BoundaryCurve:
    n = max(8, int(round(80 * scale)))
    if kind == "circle":
        return circle(0.25, n, center=(0.1, 0.0))
    if kind == "arrowhead":
        return arrowhead(n)
    raise ValueError(f"unknown hidden boundary {kind!r}")


def build_reference_mesh(scale: float = 1.0) -> Mesh:
    sigma, gamma, omega = reference_curves(scale)
    return build_annulus(sigma, gamma, omega)


# ---------------------------------------------------------------------------
# operations


def displace(mesh: Mesh, d, step: float) -> Mesh:
    """Move every node by ``step * d``; connectivity and labels unchanged."""
    d = np.asarray(d, dtype=float)
    if d.shape != mesh.nodes.shape:
        raise ValueError("displacement must be defined on all nodes")
    pinned = [mesh.loop_nodes[Label.SIGMA]]
    if Region.OMEGA in mesh.tri_region:
        pinned.append(mesh.omega_nodes)
    pinned = np.concatenate(pinned)
    if np.any(d[pinned] != 0.0):
        raise ValueError("displacement must vanish on Sigma and omega nodes")
    if step == 0.0:
        nodes = mesh.nodes.copy()
    else:
        nodes = mesh.nodes + step * d
    out = Mesh(
        nodes=nodes,
        triangles=mesh.triangles.copy(),
        tri_region=mesh.tri_region.copy(),
        loop_nodes=mesh.loop_nodes,
        n_fixed=mesh.n_fixed,
        inner_label=mesh.inner_label,
    )
    areas = out.areas
    if np.any(areas <= 0):
        raise ElementInversion(f"{int(np.sum(areas <= 0))} triangles inverted")
    return out


def quality(mesh: Mesh) -> MeshQuality:
    """Minimum of ``2 r_in / r_circ`` over triangles, plus the minimum area."""
    p = mesh.nodes[mesh.triangles]
    a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
    b = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
    c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
    area = mesh.areas
    q = 16.0 * area * area / ((a + b + c) * a * b * c)
    q = np.clip(np.where(area > 0, q, 0.0), 0.0, 1.0)
    worst = int(np.argmin(q))
    return MeshQuality(float(q[worst]), float(area.min()), worst)


def needs_remesh(mesh: Mesh, min_quality=0.2, min_area=1e-6) -> bool:
    q = quality(mesh)
    return q.min_quality < min_quality or q.min_area < min_area


def _band_outer(mesh: Mesh) -> np.ndarray:
    if Label.OMEGA_INNER in mesh.loop_nodes:
        return mesh.loop_nodes[Label.OMEGA_INNER]
    return mesh.loop_nodes[Label.SIGMA]


def check_gamma(mesh: Mesh) -> None:
    """Raise SelfIntersectingBoundary unless Gamma is simple, CCW and inside its band.

    Positive triangle areas alone do not exclude a pinched hole: two arcs of
    Gamma can cross through the hole while every triangle keeps its
    orientation.
    """
    gpts = mesh.gamma_points
    if kernels.polyline_self_intersects(gpts):
        raise SelfIntersectingBoundary("Gamma polyline crosses itself")
    wpts = mesh.nodes[_band_outer(mesh)]
    if polygon_area(gpts) <= 0 or not points_in_polygon(gpts, wpts).all():
        raise SelfIntersectingBoundary("Gamma polyline leaves its band")


def remesh(mesh: Mesh) -> Mesh:
    """Re-triangulate the band between Gamma(phi) and omega's inner circle.

    Gamma vertices, omega and the outer region are kept exactly; only the
    movable interior block of nodes is regenerated.
    """
    check_gamma(mesh)
    g_ids = mesh.loop_nodes[mesh.inner_label]
    gpts = mesh.nodes[g_ids]
    w_ids = _band_outer(mesh)
    wpts = mesh.nodes[w_ids]

    h = 0.5 * (_mean_spacing(gpts) + _mean_spacing(wpts))
    seed = _band_seed(gpts, outward=True)
    hole = _band_seed(gpts, outward=False)
    verts, tris, _ = _triangulate(
        [wpts, gpts], [hole], [seed], [np.sqrt(3) / 4 * h * h]
    )
    nw, ng = len(wpts), len(gpts)
    # map local mesher indices to the global ordering convention
    n_new = len(verts) - nw - ng
    local_to_global = np.concatenate(
        [w_ids, g_ids, mesh.n_fixed + ng + np.arange(n_new)]
    )
    keep = mesh.tri_region != Region.INNER
    if not np.all(mesh.triangles[keep] < mesh.n_fixed + ng):
        raise MeshingFailure("kept triangles reference movable nodes")
    nodes = np.vstack([mesh.nodes[: mesh.n_fixed + ng], verts[nw + ng :]])
    new_tris = _orient_ccw(nodes, local_to_global[tris])
    triangles = np.vstack([mesh.triangles[keep], new_tris])
    region = np.concatenate(
        [mesh.tri_region[keep], np.full(len(new_tris), Region.INNER, dtype=np.int64)]
    )
    return Mesh(
        nodes=np.ascontiguousarray(nodes),
        triangles=np.ascontiguousarray(triangles),
        tri_region=region,
        loop_nodes=mesh.loop_nodes,
        n_fixed=mesh.n_fixed,
        inner_label=mesh.inner_label,
    )


def hausdorff(loop_a, loop_b) -> float:
    """Symmetric Hausdorff distance between two closed sampled polylines."""
    a = np.asarray(loop_a, dtype=float)
    b = np.asarray(loop_b, dtype=float)
    return float(
        max(
            kernels.point_polyline_distance(a, b).max(),
            kernels.point_polyline_distance(b, a).max(),
        )
    )


# ---------------------------------------------------------------------------
# serialization


def write_mesh(mesh: Mesh, path) -> None:
    """Plain-text mesh: header, ``x y label`` nodes, ``i j k`` triangles,
    ``i j label`` boundary edges (loops CCW)."""
    edges, elabels = mesh.boundary_edges
    lab = mesh.node_labels
    with open(path, "w") as fh:
        fh.write(f"nodes {mesh.n_nodes} triangles {len(mesh.triangles)} edges {len(edges)}\n")
        for (x, y), l in zip(mesh.nodes, lab):
            fh.write(f"{float(x)!r} {float(y)!r} {int(l)}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")
        for (i, j), l in zip(edges, elabels):
            fh.write(f"{i} {j} {int(l)}\n")


def _chain_loop(edges):
    nxt = dict(zip(edges[:, 0].tolist(), edges[:, 1].tolist()))
    start = int(edges[0, 0])
    out = [start]
    cur = nxt[start]
    while cur != start:
        out.append(cur)
        cur = nxt[cur]
        if len(out) > len(edges):
            raise MeshingFailure("boundary edges do not form a loop")
    return np.asarray(out, dtype=np.int64)


def read_mesh(path) -> Mesh:
    with open(path) as fh:
        head = fh.readline().split()
        n, t, e = int(head[1]), int(head[3]), int(head[5])
        rows = [fh.readline().split() for _ in range(n)]
        nodes = np.array([[float(r[0]), float(r[1])] for r in rows])
        tris = np.array([[int(v) for v in fh.readline().split()] for _ in range(t)], dtype=np.int64)
        erows = np.array([[int(v) for v in fh.readline().split()] for _ in range(e)], dtype=np.int64)
    loops = {}
    for lab in np.unique(erows[:, 2]):
        loop = _chain_loop(erows[erows[:, 2] == lab, :2])
        # restore the loop start used by the writer (its smallest entry)
        loops[Label(int(lab))] = np.roll(loop, -int(np.argmin(loop)))
    inner_label = Label.GAMMA if Label.GAMMA in loops else Label.GAMMA_D
    centroids = nodes[tris].mean(axis=1)
    region = np.full(len(tris), Region.INNER, dtype=np.int64)
    if Label.OMEGA_INNER in loops:
        in_outer = points_in_polygon(centroids, nodes[loops[Label.OMEGA_OUTER]])
        in_inner = points_in_polygon(centroids, nodes[loops[Label.OMEGA_INNER]])
        region[in_outer & ~in_inner] = Region.OMEGA
        region[~in_outer] = Region.OUTER
    if inner_label in loops:
        n_fixed = int(loops[inner_label].min())
    else:
        n_fixed = n
    return Mesh(nodes, tris, region, loops, n_fixed, inner_label)
