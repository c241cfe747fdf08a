"""Hadamard shape gradient on Gamma, traction extension and FD verification.

For any of the objectives in :mod:`regret_shape.regret`

    dJ(phi)[theta] = int_Gamma  rho (theta . nu) ds,
    rho = grad u . grad p + grad w . grad q

with (p, q) from :func:`system.solve_adjoint`. Since every field vanishes on
Gamma only normal derivatives survive, so ``rho = d_nu u d_nu p + d_nu w d_nu q``.
The volumetric form of the same derivative is the exact derivative of the
discrete objective and is kept for verification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fem, geometry, system
from .errors import ElementInversion, SolveFailure
from .fem import BoundaryTrace
from .geometry import Label, Mesh

CUTOFF_INNER = 0.9
CUTOFF_OUTER = 1.0
DENSITY_METHODS = ("flux", "average")


def gamma_normals(mesh: Mesh) -> np.ndarray:
    """Half-length-weighted outward node normals of the domain on Gamma."""
    return geometry.node_normals(mesh.gamma_points, outward_left=True)


def gamma_unit_normals(mesh: Mesh) -> np.ndarray:
    n = gamma_normals(mesh)
    return n / np.linalg.norm(n, axis=1)[:, None]


def gamma_trace(mesh: Mesh, values=0.0) -> BoundaryTrace:
    return fem.loop_trace(mesh, mesh.inner_label, values)


@dataclass(frozen=True, eq=False)
class Gradient:
    """Density on Gamma together with the solves that produced it."""

    density: BoundaryTrace
    state: system.StatePair
    adjoint: system.AdjointPair


def _averaged_node_gradients(mesh: Mesh, values, ids) -> np.ndarray:
    """Area-weighted mean of adjacent P1 element gradients at nodes ``ids``."""
    areas, grads = mesh.geometry
    eg = np.einsum("tai,ta->ti", grads, values[mesh.triangles])
    n = mesh.n_nodes
    acc = np.zeros((n, 2))
    wsum = np.zeros(n)
    for a in range(3):
        np.add.at(acc, mesh.triangles[:, a], areas[:, None] * eg)
        np.add.at(wsum, mesh.triangles[:, a], areas)
    return acc[ids] / wsum[ids, None]


def gradient_density(mesh: Mesh, state, adjoint, method="flux") -> BoundaryTrace:
    """Per-node gradient density on Gamma.

    ``method="flux"`` recovers the four normal derivatives variationally
    (lumped Gamma mass); ``"average"`` averages adjacent element gradients
    with area weights. The omega term vanishes because omega is bounded
    away from Gamma.
    """
    tr = gamma_trace(mesh)
    ids = tr.node_ids
    lab = mesh.inner_label
    if method == "flux":
        M = fem.assemble_mass(mesh, "omega")
        f_u = fem.flux(mesh, state.u, None, lab, rhs=state.u_load)
        f_w = fem.flux(mesh, state.w, None, lab, rhs=M @ state.misfit)
        f_p = fem.flux(mesh, adjoint.p, None, lab, rhs=M @ (state.misfit + adjoint.q.values))
        f_q = fem.flux(mesh, adjoint.q, None, lab, rhs=np.zeros(mesh.n_nodes))
        rho = f_u.values * f_p.values + f_w.values * f_q.values
    elif method == "average":
        gu, gw, gp, gq = (
            _averaged_node_gradients(mesh, fld.values, ids)
            for fld in (state.u, state.w, adjoint.p, adjoint.q)
        )
        rho = np.einsum("ni,ni->n", gu, gp) + np.einsum("ni,ni->n", gw, gq)
    else:
        raise ValueError(f"unknown density method {method!r}")
    return tr.with_values(rho)


def compute_gradient(evaluation, method="flux") -> Gradient:
    mesh = evaluation.mesh
    adj = system.solve_adjoint(mesh, evaluation.state, evaluation.gbar)
    return Gradient(gradient_density(mesh, evaluation.state, adj, method), evaluation.state, adj)


def directional_derivative(mesh: Mesh, density: BoundaryTrace, d) -> float:
    """Trapezoidal ``int_Gamma rho (d . nu) ds`` on the Gamma polyline.

    With half-length node normals this is tangent-invariant by construction.
    """
    d = np.asarray(d, dtype=float)
    dg = d[density.node_ids]
    return float(np.sum(density.values * np.einsum("ni,ni->n", dg, gamma_normals(mesh))))


# ---------------------------------------------------------------------------
# extension


def cutoff(r) -> np.ndarray:
    """Quintic smoothstep: 1 for r <= 0.9, 0 for r >= 1.0, C^2 in between."""
    s = np.clip((np.asarray(r) - CUTOFF_INNER) / (CUTOFF_OUTER - CUTOFF_INNER), 0.0, 1.0)
    return 1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s))


ALPHA_FACTOR = 1.0


def default_alpha(mesh: Mesh) -> float:
    """Robin weight proportional to the mean Gamma edge length.

    A factor well below one leaves the boundary-scale modes undamped and the
    Gamma polyline develops a node-scale zig-zag within a few dozen steps.
    """
    return ALPHA_FACTOR * float(geometry.polyline_lengths(mesh.gamma_points).mean())


def _traction_factor(mesh: Mesh, alpha: float):
    key = ("traction", float(alpha))
    fac = mesh.cache.get(key)
    if fac is None:
        K = fem.assemble_stiffness(mesh)
        g_ids = mesh.loop_nodes[mesh.inner_label]
        w = geometry.trapezoid_weights(mesh.gamma_points)
        Mg = sp.csr_matrix((w, (g_ids, g_ids)), shape=K.shape)
        A = (alpha * K + Mg).tocsr()
        free = np.ones(mesh.n_nodes, dtype=bool)
        free[mesh.loop_nodes[Label.SIGMA]] = False
        free = np.nonzero(free)[0]
        try:
            lu = spla.splu(A[free][:, free].tocsc())
        except RuntimeError as exc:
            raise SolveFailure(f"traction system is singular: {exc}") from exc
        fac = mesh.cache[key] = (free, lu, A)
    return fac


def normal_reextend(mesh: Mesh, G) -> np.ndarray:
    """Keep only the normal part of G on Gamma and re-extend harmonically.

    Tangential node motion leaves the objective unchanged to first order
    but bunches Gamma nodes; dropping it keeps the polyline regular.
    """
    n_hat = gamma_unit_normals(mesh)
    ids = mesh.loop_nodes[mesh.inner_label]
    gn = np.einsum("ni,ni->n", G[ids], n_hat)[:, None] * n_hat
    out = np.empty_like(G)
    for c in range(2):
        bc = [(Label.SIGMA, 0.0), (mesh.inner_label, gn[:, c])]
        out[:, c] = fem.solve_dirichlet(mesh, None, bc).values
    return out


def smooth_density(mesh: Mesh, density: BoundaryTrace, beta: float) -> BoundaryTrace:
    """H1(Gamma) smoothing: solve ``(W + beta L) s = W rho`` on the closed loop.

    ``W`` is the lumped Gamma mass and ``L`` the P1 stiffness along the
    polyline, so a Fourier mode k on a circle of radius R is damped by
    ``1 / (1 + beta k^2 / R^2)`` and constants pass unchanged.
    """
    if beta <= 0:
        return density
    pts = mesh.gamma_points
    n = len(pts)
    e = geometry.polyline_lengths(pts)
    w = geometry.trapezoid_weights(pts)
    i = np.arange(n)
    j = (i + 1) % n
    ke = beta / e
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([i, j, j, i])
    vals = np.concatenate([ke, ke, -ke, -ke])
    A = sp.csc_matrix((vals, (rows, cols)), shape=(n, n)) + sp.diags(w)
    return density.with_values(spla.spsolve(A.tocsc(), w * density.values))


def traction_extend(mesh: Mesh, density: BoundaryTrace, alpha=None, normal_only=False, beta=0.0) -> np.ndarray:
    """Descent field G on all nodes from the Robin problem with load -rho nu.

    Solves ``alpha a(G, v) + <G, v>_Gamma = -<rho nu, v>_Gamma`` per
    component with G = 0 on Sigma, then multiplies by the radial cutoff so
    G vanishes on omega-bar. Fixed-block nodes are zeroed explicitly.
    ``beta > 0`` first smooths rho along Gamma (:func:`smooth_density`);
    ``normal_only`` drops the tangential part on Gamma (:func:`normal_reextend`).
    """
    if alpha is None:
        alpha = default_alpha(mesh)
    density = smooth_density(mesh, density, beta)
    free, lu, A = _traction_factor(mesh, alpha)
    n = mesh.n_nodes
    G = np.zeros((n, 2))
    if not np.any(density.values):
        return G
    rhs = np.zeros((n, 2))
    rhs[density.node_ids] = -density.values[:, None] * gamma_normals(mesh)
    sol = lu.solve(np.ascontiguousarray(rhs[free]))
    res = np.linalg.norm(A[free][:, free] @ sol - rhs[free])
    scale = np.linalg.norm(rhs[free])
    # no division: the norm of a subnormal load underflows to zero
    if not res <= fem.RESIDUAL_TOL * scale:
        raise SolveFailure(f"traction solve residual {res:.3e} (load norm {scale:.3e})")
    G[free] = sol
    if normal_only:
        G = normal_reextend(mesh, G)
    r = np.linalg.norm(mesh.nodes, axis=1)
    G *= cutoff(r)[:, None]
    G[: mesh.n_fixed] = 0.0
    return G


def gamma_l2_norm(mesh: Mesh, d) -> float:
    """``||d||_{L2(Gamma)}`` with the trapezoidal rule."""
    ids = mesh.loop_nodes[mesh.inner_label]
    w = geometry.trapezoid_weights(mesh.gamma_points)
    return float(np.sqrt(np.sum(w * np.einsum("ni,ni->n", d[ids], d[ids]))))


# ---------------------------------------------------------------------------
# volumetric derivative (verification only)


def _load_derivative(mesh: Mesh, f, theta, h=1e-6) -> np.ndarray:
    """dF[theta] by a central difference of the assembled load.

    Exact up to rounding for constant f (element areas are quadratic in h).
    """
    if f is None:
        return np.zeros(mesh.n_nodes)
    plus = _moved(mesh, theta, h)
    minus = _moved(mesh, theta, -h)
    return (fem.load_vector(plus, f) - fem.load_vector(minus, f)) / (2 * h)


def _moved(mesh: Mesh, theta, h) -> Mesh:
    return geometry.Mesh(
        mesh.nodes + h * theta, mesh.triangles, mesh.tri_region, mesh.loop_nodes,
        mesh.n_fixed, mesh.inner_label,
    )


def _stiffness_form(mesh: Mesh, theta, a, b) -> float:
    """``sum_T A grad a^T (div I - D theta - D theta^T) grad b`` = a^T dK b."""
    areas, grads = mesh.geometry
    t = mesh.triangles
    D = np.einsum("tai,taj->tij", theta[t], grads)  # D[t, i, j] = d theta_i / d x_j
    div = D[:, 0, 0] + D[:, 1, 1]
    ga = np.einsum("tai,ta->ti", grads, a[t])
    gb = np.einsum("tai,ta->ti", grads, b[t])
    S = D + np.transpose(D, (0, 2, 1))
    val = div * np.einsum("ti,ti->t", ga, gb) - np.einsum("ti,tij,tj->t", ga, S, gb)
    return float(np.sum(areas * val))


def volumetric_derivative(mesh: Mesh, grad: Gradient, f, theta) -> float:
    """Exact derivative of the discrete objective along nodal field ``theta``.

    ``dJ = p^T dF - p^T dK u - q^T dK w``, valid when theta vanishes on
    Sigma and on omega's nodes.
    """
    theta = np.asarray(theta, dtype=float)
    u, w = grad.state.u.values, grad.state.w.values
    p, q = grad.adjoint.p.values, grad.adjoint.q.values
    dF = _load_derivative(mesh, f, theta)
    return float(p @ dF - _stiffness_form(mesh, theta, p, u) - _stiffness_form(mesh, theta, q, w))


# ---------------------------------------------------------------------------
# finite-difference verification


def random_direction(mesh: Mesh, rng, modes=4, alpha=None) -> np.ndarray:
    """Smooth admissible field: traction extension of a low Fourier density."""
    pts = mesh.gamma_points
    c = pts.mean(axis=0)
    ang = np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0])
    k = np.arange(modes + 1)
    a = rng.standard_normal(modes + 1) / (1.0 + k)
    b = rng.standard_normal(modes + 1) / (1.0 + k)
    rho = (a[None] * np.cos(k[None] * ang[:, None]) + b[None] * np.sin(k[None] * ang[:, None])).sum(1)
    d = traction_extend(mesh, gamma_trace(mesh, rho), alpha)
    return d / max(np.abs(d).max(), 1e-300)


@dataclass(frozen=True)
class FDCheck:
    boundary: float
    volumetric: float
    steps: tuple
    fd: tuple

    @property
    def fd_errors(self):
        """|FD(t) - boundary| / |FD(t)| per step."""
        return tuple(abs(self.boundary - v) / max(abs(v), 1e-300) for v in self.fd)

    @property
    def best_rel_error(self) -> float:
        return min(self.fd_errors)

    @property
    def volumetric_fd_gaps(self):
        """|FD(t) - volumetric| per step, the truncation error of the FD."""
        return tuple(abs(v - self.volumetric) for v in self.fd)

    @property
    def converges(self) -> bool:
        """FD error against the exact discrete derivative shrinks at least
        linearly over the decade spanned by the steps (or is at rounding)."""
        g = self.volumetric_fd_gaps
        floor = 1e-9 * max(abs(self.volumetric), 1e-300)
        if g[-1] <= floor:
            return True
        t0, t1 = self.steps[0], self.steps[-1]
        return g[-1] <= g[0] * (t1 / t0) * 1.5

    @property
    def boundary_vs_volumetric(self) -> float:
        return abs(self.boundary - self.volumetric) / max(abs(self.volumetric), 1e-300)


def fd_check(objective, mesh: Mesh, direction, steps=(1e-2, 3e-3, 1e-3), method="flux") -> FDCheck:
    """Central differences of ``objective.evaluate`` along ``direction``."""
    ev = objective.evaluate(mesh)
    gr = compute_gradient(ev, method)
    bd = directional_derivative(mesh, gr.density, direction)
    vol = volumetric_derivative(mesh, gr, objective.f, direction)
    fds = []
    for t in steps:
        try:
            jp = objective.evaluate(geometry.displace(mesh, direction, t)).value
            jm = objective.evaluate(geometry.displace(mesh, direction, -t)).value
        except ElementInversion:
            fds.append(np.nan)
            continue
        fds.append((jp - jm) / (2 * t))
    return FDCheck(bd, vol, tuple(steps), tuple(fds))
