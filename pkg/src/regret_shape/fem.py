"""P1 Lagrange finite elements on :class:`~regret_shape.geometry.Mesh`.

Boundary L2 pairings use the lumped (trapezoidal) boundary mass matrix
throughout, so a trace is a plain nodal vector with weights attached.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from numbers import Number

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from . import kernels
from .errors import PointOutsideMesh, SolveFailure
from .geometry import Label, Mesh, Region, polyline_lengths, trapezoid_weights

RESIDUAL_TOL = 1e-10


# ---------------------------------------------------------------------------
# field types


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One value per mesh node."""

    mesh: Mesh
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=float)
        if v.shape != (self.mesh.n_nodes,):
            raise ValueError(f"field has {v.shape} values for {self.mesh.n_nodes} nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __add__(self, other):
        return ScalarField(self.mesh, self.values + _vals(other), self.label)

    def __sub__(self, other):
        return ScalarField(self.mesh, self.values - _vals(other), self.label)

    def __mul__(self, a):
        return ScalarField(self.mesh, self.values * float(a), self.label)

    __rmul__ = __mul__


def _vals(x):
    return x.values if isinstance(x, (ScalarField, BoundaryTrace)) else x


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    """Values on the nodes of one labeled loop, in loop order.

    ``arclength[0] == 0``; ``weights`` are the trapezoidal node weights of
    the closed polyline, so ``weights.sum()`` is the loop length.
    """

    label: Label
    node_ids: np.ndarray
    arclength: np.ndarray
    values: np.ndarray
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("node_ids", "arclength", "values", "weights"):
            a = np.ascontiguousarray(getattr(self, name))
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        n = len(self.node_ids)
        if not (len(self.arclength) == len(self.values) == len(self.weights) == n):
            raise ValueError("trace arrays must share one length")
        if np.any(np.diff(self.arclength) <= 0):
            raise ValueError("arclength must be strictly increasing")

    def __len__(self):
        return len(self.values)

    def with_values(self, values) -> "BoundaryTrace":
        values = np.broadcast_to(np.asarray(values, dtype=float), self.values.shape)
        return BoundaryTrace(self.label, self.node_ids, self.arclength, values.copy(), self.weights)

    def inner(self, other) -> float:
        """Lumped L2 pairing on the loop."""
        return float(np.dot(self.weights * self.values, _vals(other)))

    def norm(self) -> float:
        return float(np.sqrt(max(self.inner(self), 0.0)))

    def integral(self) -> float:
        return float(np.dot(self.weights, self.values))

    @property
    def length(self) -> float:
        return float(self.weights.sum())


def loop_trace(mesh: Mesh, label, values=0.0) -> BoundaryTrace:
    """Trace on ``label``; ``values`` is a constant, an array or ``f(x, y)``."""
    label = Label(label)
    ids = mesh.loop_nodes[label]
    pts = mesh.nodes[ids]
    if callable(values):
        vals = np.asarray(values(pts[:, 0], pts[:, 1]), dtype=float)
    else:
        vals = np.asarray(values, dtype=float)
    vals = np.broadcast_to(vals, (len(ids),)).copy()
    s = np.concatenate([[0.0], np.cumsum(polyline_lengths(pts))[:-1]])
    return BoundaryTrace(label, ids.copy(), s, vals, trapezoid_weights(pts))


# ---------------------------------------------------------------------------
# assembly


def _element_mask(mesh: Mesh, region):
    if region is None or region == "all":
        return None
    if region == "omega":
        region = Region.OMEGA
    return mesh.tri_region == Region(region)


def assemble_stiffness(mesh: Mesh) -> sp.csr_matrix:
    """P1 stiffness matrix of -Laplace (cached on the mesh)."""
    K = mesh.cache.get("K")
    if K is None:
        areas, grads = mesh.geometry
        vals = kernels.stiffness_values(areas, grads)
        t = mesh.triangles
        rows = np.repeat(t, 3, axis=1).ravel()
        cols = np.tile(t, (1, 3)).ravel()
        K = sp.csr_matrix((vals.ravel(), (rows, cols)), shape=(mesh.n_nodes,) * 2)
        K.sum_duplicates()
        mesh.cache["K"] = K
    return K


_MASS_REF = (np.ones((3, 3)) + np.eye(3)) / 12.0


def assemble_mass(mesh: Mesh, region=None) -> sp.csr_matrix:
    """Exact P1 mass matrix, optionally restricted to one region's elements."""
    key = ("M", str(region))
    M = mesh.cache.get(key)
    if M is None:
        mask = _element_mask(mesh, region)
        t = mesh.triangles if mask is None else mesh.triangles[mask]
        a = mesh.areas if mask is None else mesh.areas[mask]
        vals = a[:, None, None] * _MASS_REF[None]
        rows = np.repeat(t, 3, axis=1).ravel()
        cols = np.tile(t, (1, 3)).ravel()
        M = sp.csr_matrix((vals.ravel(), (rows, cols)), shape=(mesh.n_nodes,) * 2)
        M.sum_duplicates()
        mesh.cache[key] = M
    return M


def load_vector(mesh: Mesh, source, region=None) -> np.ndarray:
    """``(source, psi_i)`` for every hat function.

    Constants and callables ``f(x, y)`` use the edge-midpoint rule (exact
    for quadratics); a :class:`ScalarField` or nodal array is integrated
    exactly against the P1 mass matrix.
    """
    n = mesh.n_nodes
    if source is None:
        return np.zeros(n)
    if isinstance(source, (ScalarField, np.ndarray)):
        return assemble_mass(mesh, region) @ _vals(source)
    mask = _element_mask(mesh, region)
    t = mesh.triangles if mask is None else mesh.triangles[mask]
    a = mesh.areas if mask is None else mesh.areas[mask]
    if isinstance(source, Number):
        fm = np.full((len(t), 3), float(source))
    else:
        p = mesh.nodes[t]
        # midpoint k is opposite local vertex k
        mids = 0.5 * (p[:, [1, 2, 0]] + p[:, [2, 0, 1]])
        fm = np.asarray(source(mids[..., 0], mids[..., 1]), dtype=float)
        fm = np.broadcast_to(fm, (len(t), 3))
    # hat a is 1/2 at the two midpoints not opposite to it
    contrib = (a / 6.0)[:, None] * (fm.sum(axis=1)[:, None] - fm)
    return np.bincount(t.ravel(), weights=contrib.ravel(), minlength=n)


# ---------------------------------------------------------------------------
# Dirichlet solves


def boundary_labels(mesh: Mesh):
    """Loops on the domain boundary (the omega circles are interior lines)."""
    out = [Label.SIGMA]
    if mesh.inner_label in mesh.loop_nodes:
        out.append(mesh.inner_label)
    return out


def dirichlet_nodes(mesh: Mesh) -> np.ndarray:
    return np.concatenate([mesh.loop_nodes[lab] for lab in boundary_labels(mesh)])


class _Factor:
    """Reduced interior system K_II with a cached LU and a CG fallback."""

    def __init__(self, mesh: Mesh):
        K = assemble_stiffness(mesh)
        n = mesh.n_nodes
        bnd = dirichlet_nodes(mesh)
        free = np.ones(n, dtype=bool)
        free[bnd] = False
        self.free = np.nonzero(free)[0]
        self.bnd = bnd
        self.K_ii = K[self.free][:, self.free].tocsc()
        self.K_ib = K[self.free][:, bnd].tocsr()
        try:
            self.lu = spla.splu(self.K_ii)
        except RuntimeError:  # singular factor: let CG try
            self.lu = None

    def solve(self, rhs):
        scale = np.linalg.norm(rhs)
        if scale == 0.0:
            return np.zeros_like(rhs)
        if self.lu is not None:
            x = self.lu.solve(rhs)
            if np.linalg.norm(self.K_ii @ x - rhs) <= RESIDUAL_TOL * scale:
                return x
        else:
            x = None
        x, info = spla.cg(self.K_ii, rhs, x0=x, rtol=1e-13, maxiter=20 * len(rhs))
        res = np.linalg.norm(self.K_ii @ x - rhs) / scale
        if info < 0 or res > RESIDUAL_TOL:
            raise SolveFailure(f"linear solve stagnated, relative residual {res:.3e}")
        return x


def _factor(mesh: Mesh) -> _Factor:
    f = mesh.cache.get("factor")
    if f is None:
        f = mesh.cache["factor"] = _Factor(mesh)
    return f


def _bc_values(mesh: Mesh, bc) -> np.ndarray:
    given = {}
    for label, spec in bc:
        label = Label(label)
        ids = mesh.loop_nodes[label]
        if isinstance(spec, BoundaryTrace):
            if spec.label != label or len(spec) != len(ids):
                raise ValueError(f"trace does not live on loop {label.name}")
            vals = spec.values
        elif callable(spec):
            p = mesh.nodes[ids]
            vals = np.broadcast_to(np.asarray(spec(p[:, 0], p[:, 1]), dtype=float), (len(ids),))
        else:
            vals = np.broadcast_to(np.asarray(spec, dtype=float), (len(ids),))
        given[label] = vals
    missing = [lab.name for lab in boundary_labels(mesh) if lab not in given]
    if missing:
        raise ValueError(f"no boundary condition for {', '.join(missing)}")
    return np.concatenate([given[lab] for lab in boundary_labels(mesh)])


def solve_dirichlet(mesh: Mesh, source=None, bc=(), region=None, rhs=None, label="") -> ScalarField:
    """Galerkin solution of ``-Laplace u = source`` with nodal Dirichlet data.

    Parameters
    ----------
    source : None, float, callable, ScalarField or nodal array
        See :func:`load_vector`; ``region`` restricts it to one element region.
    bc : sequence of (label, value)
        One entry per boundary loop; values are traces, constants or ``f(x, y)``.
    rhs : ndarray, optional
        Pre-assembled load vector, replacing ``source``.
    """
    F = load_vector(mesh, source, region) if rhs is None else np.asarray(rhs, dtype=float)
    fac = _factor(mesh)
    ub = _bc_values(mesh, bc)
    u = np.empty(mesh.n_nodes)
    u[fac.bnd] = ub
    u[fac.free] = fac.solve(F[fac.free] - fac.K_ib @ ub)
    return ScalarField(mesh, u, label)


def lift_harmonic(mesh_D: Mesh, g) -> ScalarField:
    """Discrete harmonic extension of a Sigma trace over the hold-all disk."""
    return solve_dirichlet(mesh_D, None, [(Label.SIGMA, g)], label="u_g")


def residual(mesh: Mesh, u, source=None, region=None, rhs=None) -> np.ndarray:
    """``a(u, psi_i) - (source, psi_i)`` for every node."""
    F = load_vector(mesh, source, region) if rhs is None else rhs
    return assemble_stiffness(mesh) @ _vals(u) - F


# ---------------------------------------------------------------------------
# norms and fluxes


def l2_norm_sq(field, region=None) -> float:
    v = _vals(field)
    return float(v @ (assemble_mass(field.mesh, region) @ v))


def l2_norm(field, region=None) -> float:
    """Exact P1 L2 norm; ``region='omega'`` restricts to omega's elements."""
    return float(np.sqrt(max(l2_norm_sq(field, region), 0.0)))


def h1_seminorm(field) -> float:
    v = _vals(field)
    return float(np.sqrt(max(v @ (assemble_stiffness(field.mesh) @ v), 0.0)))


# symmetric 6-point degree-4 rule (Dunavant)
_Q6_B = np.array(
    [
        [0.816847572980459, 0.091576213509771, 0.091576213509771],
        [0.091576213509771, 0.816847572980459, 0.091576213509771],
        [0.091576213509771, 0.091576213509771, 0.816847572980459],
        [0.108103018168070, 0.445948490915965, 0.445948490915965],
        [0.445948490915965, 0.108103018168070, 0.445948490915965],
        [0.445948490915965, 0.445948490915965, 0.108103018168070],
    ]
)
_Q6_W = np.array([0.109951743655322] * 3 + [0.223381589678011] * 3)


def l2_error(field, exact) -> float:
    """``||u_h - exact||_{L2}`` with a degree-4 rule on each triangle."""
    mesh = field.mesh
    p = mesh.nodes[mesh.triangles]
    xq = np.einsum("qa,tai->tqi", _Q6_B, p)
    uh = np.einsum("qa,ta->tq", _Q6_B, _vals(field)[mesh.triangles])
    err = (uh - exact(xq[..., 0], xq[..., 1])) ** 2
    return float(np.sqrt(np.sum(mesh.areas * (err @ _Q6_W))))


def flux(mesh: Mesh, u, source=None, label=Label.SIGMA, region=None, rhs=None) -> BoundaryTrace:
    """Variational outward normal derivative on one boundary loop.

    Solves ``<lambda, psi_i>_loop = a(u, psi_i) - (source, psi_i)`` for the
    loop's hat functions with the lumped boundary mass matrix.
    """
    r = residual(mesh, u, source, region, rhs)
    t = loop_trace(mesh, label)
    return t.with_values(r[t.node_ids] / t.weights)


def flux_on_sigma(mesh: Mesh, w, source=None, region=None, rhs=None) -> BoundaryTrace:
    return flux(mesh, w, source, Label.SIGMA, region, rhs)


# ---------------------------------------------------------------------------
# transfer between meshes


def locate(mesh: Mesh, points, tol=1e-9):
    """Containing triangle and barycentric coordinates of each point."""
    points = np.asarray(points, dtype=float)
    tree = mesh.cache.get("kdtree")
    if tree is None:
        tree = mesh.cache["kdtree"] = cKDTree(mesh.nodes)
    _, near = tree.query(points)
    start = mesh.node_to_triangle[near]
    idx, bary = kernels.locate_points(
        mesh.nodes, mesh.triangles, mesh.neighbors, points, start, tol
    )
    if np.any(idx < 0):
        bad = int(np.sum(idx < 0))
        raise PointOutsideMesh(f"{bad} points lie outside the source mesh")
    # snap points that sit within tol outside an edge
    bary = np.clip(bary, 0.0, None)
    bary /= bary.sum(axis=1, keepdims=True)
    return idx, bary


def interpolate_values(src_mesh: Mesh, values, points) -> np.ndarray:
    idx, bary = locate(src_mesh, points)
    return np.einsum("pa,pa->p", bary, np.asarray(_vals(values))[src_mesh.triangles[idx]])


def interpolate(src_mesh: Mesh, src, dst_mesh: Mesh) -> ScalarField:
    """P1 point evaluation of ``src`` at every node of ``dst_mesh``."""
    vals = interpolate_values(src_mesh, src, dst_mesh.nodes)
    return ScalarField(dst_mesh, vals, getattr(src, "label", ""))


# ---------------------------------------------------------------------------
# serialization


def write_field(field: ScalarField, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"field {len(field.values)} {field.label or 'unnamed'}\n")
        for v in field.values:
            fh.write(f"{float(v)!r}\n")


def read_field(path, mesh: Mesh) -> ScalarField:
    with open(path) as fh:
        head = fh.readline().split()
        n = int(head[1])
        vals = np.array([float(fh.readline()) for _ in range(n)])
    label = head[2] if len(head) > 2 and head[2] != "unnamed" else ""
    return ScalarField(mesh, vals, label)


def write_trace(trace: BoundaryTrace, path) -> None:
    with open(path, "w") as fh:
        fh.write("arclength,value\n")
        for s, v in zip(trace.arclength, trace.values):
            fh.write(f"{float(s)!r},{float(v)!r}\n")


def read_trace(path, mesh: Mesh, label=Label.SIGMA) -> BoundaryTrace:
    """Values from CSV attached to ``label``'s loop of ``mesh`` (same node count)."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    base = loop_trace(mesh, label)
    if len(data) != len(base):
        raise ValueError(f"trace has {len(data)} rows, loop has {len(base)} nodes")
    return base.with_values(data[:, 1])
