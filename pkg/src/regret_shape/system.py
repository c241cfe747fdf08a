"""State and adjoint solves on the current (deformed) mesh.

State, one-way coupled::

    -Lap u = f            u = g_d on Sigma, u = 0 on Gamma
    -Lap w = chi_w (u - u_d)   w = 0 on Sigma and Gamma

Adjoint, solved in reverse order::

    -Lap q = 0                 q = gbar on Sigma, q = 0 on Gamma
    -Lap p = chi_w (u - u_d + q)   p = 0 on Sigma and Gamma

The sign of ``q`` on Sigma is the one that makes the Hadamard density
``grad u . grad p + grad w . grad q`` the derivative of
``J~ + F*_eps(flux_nominal - flux(w))``; with the opposite sign the
regret term would be differentiated with the wrong orientation.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fem
from .fem import BoundaryTrace, ScalarField
from .geometry import Label, Mesh

NOMINAL_FLUX_FILE = "nominal_flux_sigma.csv"
NOMINAL_SUMMARY_FILE = "nominal_summary.txt"


@dataclass(frozen=True, eq=False)
class Target:
    """Observation u_d, stored on the frozen omega nodes.

    Node ids of omega are in the fixed block of every mesh derived from the
    one the target was built for, so the same values serve a whole run.
    """

    omega_ids: np.ndarray
    values: np.ndarray
    name: str = ""

    def on(self, mesh: Mesh) -> ScalarField:
        v = np.zeros(mesh.n_nodes)
        v[self.omega_ids] = self.values
        return ScalarField(mesh, v, "u_d")

    @classmethod
    def from_field(cls, field: ScalarField, name="") -> "Target":
        ids = field.mesh.omega_nodes
        return cls(ids.copy(), field.values[ids].copy(), name)

    @classmethod
    def zero(cls, mesh: Mesh) -> "Target":
        ids = mesh.omega_nodes
        return cls(ids.copy(), np.zeros(len(ids)), "zero")


@dataclass(frozen=True, eq=False)
class StatePair:
    u: ScalarField
    w: ScalarField
    misfit: np.ndarray  # nodal u - u_d (meaningful on omega nodes)
    u_load: np.ndarray  # assembled (f, psi_i)

    @property
    def mesh(self) -> Mesh:
        return self.u.mesh

    def w_load(self) -> np.ndarray:
        return fem.assemble_mass(self.mesh, "omega") @ self.misfit

    def flux_w(self) -> BoundaryTrace:
        """Outward normal derivative of w on Sigma."""
        return fem.flux_on_sigma(self.mesh, self.w, rhs=self.w_load())


@dataclass(frozen=True, eq=False)
class AdjointPair:
    p: ScalarField
    q: ScalarField


def _as_target_field(mesh, u_d) -> ScalarField:
    if isinstance(u_d, Target):
        return u_d.on(mesh)
    if isinstance(u_d, ScalarField):
        return u_d
    if u_d is None:
        return ScalarField(mesh, np.zeros(mesh.n_nodes))
    return ScalarField(mesh, np.asarray(u_d, dtype=float))


def solve_u(mesh: Mesh, f, sigma_data, rhs=None) -> ScalarField:
    return fem.solve_dirichlet(
        mesh, f, [(Label.SIGMA, sigma_data), (mesh.inner_label, 0.0)], rhs=rhs, label="u"
    )


def solve_state(mesh: Mesh, f, g_d, u_d) -> StatePair:
    """Solve for (u, w); ``g_d`` is a Sigma trace, constant or ``g(x, y)``."""
    F = fem.load_vector(mesh, f)
    u = solve_u(mesh, None, g_d, rhs=F)
    ud = _as_target_field(mesh, u_d)
    e = u.values - ud.values
    zero = [(Label.SIGMA, 0.0), (mesh.inner_label, 0.0)]
    rhs = fem.assemble_mass(mesh, "omega") @ e
    w = fem.solve_dirichlet(mesh, bc=zero, rhs=rhs, label="w")
    return StatePair(u, w, e, F)


def solve_adjoint(mesh: Mesh, state: StatePair, gbar) -> AdjointPair:
    """Solve q then p; ``gbar`` is the projected Sigma trace (or 0)."""
    q = fem.solve_dirichlet(
        mesh, None, [(Label.SIGMA, gbar), (mesh.inner_label, 0.0)], label="q"
    )
    M = fem.assemble_mass(mesh, "omega")
    zero = [(Label.SIGMA, 0.0), (mesh.inner_label, 0.0)]
    p = fem.solve_dirichlet(mesh, bc=zero, rhs=M @ (state.misfit + q.values), label="p")
    return AdjointPair(p, q)


# ---------------------------------------------------------------------------
# nominal cache


@dataclass(frozen=True, eq=False)
class NominalData:
    """J~ and the Sigma flux of w at the nominal deformation."""

    jtilde: float
    flux: BoundaryTrace

    def save(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        fem.write_trace(self.flux, d / NOMINAL_FLUX_FILE)
        (d / NOMINAL_SUMMARY_FILE).write_text(f"jtilde={self.jtilde!r}\n")
        return d / NOMINAL_FLUX_FILE

    @classmethod
    def load(cls, directory, mesh: Mesh) -> "NominalData":
        d = Path(directory)
        flux = fem.read_trace(d / NOMINAL_FLUX_FILE, mesh, Label.SIGMA)
        kv = dict(
            line.split("=", 1)
            for line in (d / NOMINAL_SUMMARY_FILE).read_text().splitlines()
            if "=" in line
        )
        return cls(float(kv["jtilde"]), flux)

    @classmethod
    def exists(cls, directory) -> bool:
        d = Path(directory)
        return (d / NOMINAL_FLUX_FILE).is_file() and (d / NOMINAL_SUMMARY_FILE).is_file()
