"""Fenchel transform of the box-constrained regret penalty and the objectives.

With the lumped Sigma mass matrix the supremum

    F*_eps(y) = sup_{g_a <= g <= g_b}  <y, g> - eps/2 ||g||^2

separates node by node and is attained at ``clamp(y / eps, g_a, g_b)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem, system
from .errors import ConfigError
from .fem import BoundaryTrace
from .geometry import Label

T_MIN = 1e-6
T_MAX = 1e3  # BB quotients scale like 1/|grad|; max_move is the practical cap


@dataclass(frozen=True)
class RegretParams:
    eps: float = 0.5
    g_a: float = -0.2
    g_b: float = 0.2
    alpha: float | None = None  # traction Robin weight; None -> mean Gamma edge length
    sigma: float = 0.999
    tol: float = 1e-7
    max_iter: int = 3000
    t_min: float = T_MIN
    t_max: float = T_MAX
    max_move: float | None = 0.25  # cap on t * max|delta phi| in mean Gamma edge lengths

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if not self.g_a < 0 < self.g_b:
            raise ConfigError("need g_a < 0 < g_b")
        if self.alpha is not None and not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if not 0 < self.sigma < 1:
            raise ConfigError("sigma must lie in (0, 1)")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if int(self.max_iter) < 1:
            raise ConfigError("max_iter must be at least 1")
        if not 0 < self.t_min <= self.t_max:
            raise ConfigError("need 0 < t_min <= t_max")
        if self.max_move is not None and not self.max_move > 0:
            raise ConfigError("max_move must be positive")

    @property
    def box_sq(self) -> float:
        """``max(g_a^2, g_b^2)``, the pointwise bound on admissible data."""
        return max(self.g_a**2, self.g_b**2)


@dataclass(frozen=True, eq=False)
class FenchelResult:
    value: float
    maximizer: BoundaryTrace
    maximizer_norm: float


def project_box(y: BoundaryTrace, eps, g_a, g_b) -> BoundaryTrace:
    """Pointwise ``clamp(y / eps, g_a, g_b)``."""
    return y.with_values(np.clip(y.values / eps, g_a, g_b))


def fenchel(y: BoundaryTrace, params: RegretParams) -> FenchelResult:
    if not np.any(y.values):
        zero = y.with_values(0.0)
        return FenchelResult(0.0, zero, 0.0)
    g = project_box(y, params.eps, params.g_a, params.g_b)
    gg = g.inner(g)
    value = y.inner(g) - 0.5 * params.eps * gg
    return FenchelResult(float(value), g, float(np.sqrt(gg)))


def eval_Jtilde(mesh, state, u_d=None) -> float:
    """``1/2 ||u - u_d||^2`` over omega (exact P1 quadrature)."""
    e = state.misfit if u_d is None else state.u.values - system._as_target_field(mesh, u_d).values
    return 0.5 * float(e @ (fem.assemble_mass(mesh, "omega") @ e))


@dataclass(frozen=True, eq=False)
class JepsResult:
    Jeps: float
    tracking: float
    fenchel_value: float
    gbar_norm: float
    gbar: BoundaryTrace
    flux_gap: BoundaryTrace  # y = flux(w at nominal) - flux(w)


def flux_gap(state, nominal) -> BoundaryTrace:
    lam = state.flux_w()
    if len(lam) != len(nominal.flux):
        raise ValueError("nominal flux lives on a different Sigma discretization")
    return lam.with_values(nominal.flux.values - lam.values)


def eval_Jeps(mesh, state, u_d, nominal, params: RegretParams) -> JepsResult:
    tracking = eval_Jtilde(mesh, state, u_d)
    y = flux_gap(state, nominal)
    fr = fenchel(y, params)
    return JepsResult(
        tracking - nominal.jtilde + fr.value, tracking, fr.value, fr.maximizer_norm, fr.maximizer, y
    )


def bang_bang(y: BoundaryTrace, g_a, g_b) -> BoundaryTrace:
    """Maximizer of ``<y, g>`` over the box; ties (y == 0) go to g_b."""
    return y.with_values(np.where(y.values >= 0, g_b, g_a))


def eval_Jstar(mesh, state, u_d, nominal, params: RegretParams) -> JepsResult:
    """No-regret objective with its bang-bang maximizer (eps-free)."""
    tracking = eval_Jtilde(mesh, state, u_d)
    y = flux_gap(state, nominal)
    g = bang_bang(y, params.g_a, params.g_b)
    lin = y.inner(g)
    return JepsResult(tracking - nominal.jtilde + lin, tracking, lin, g.norm(), g, y)


def eval_J_with_delta(mesh, g_delta: BoundaryTrace, u_d, f, g_d) -> float:
    """Tracking cost with the Sigma data ``g_d + g_delta``."""
    base = fem.loop_trace(mesh, Label.SIGMA, g_d) if not isinstance(g_d, BoundaryTrace) else g_d
    data = base.with_values(base.values + g_delta.values)
    st = system.solve_state(mesh, f, data, u_d)
    return eval_Jtilde(mesh, st)


# ---------------------------------------------------------------------------
# objectives driven by the optimizer

MODES = ("lowregret", "nominal", "fixed_delta", "nostar")


@dataclass(frozen=True, eq=False)
class Evaluation:
    """Objective value at one mesh plus what the adjoint needs."""

    state: object
    value: float
    tracking: float
    fenchel_value: float
    gbar_norm: float
    gbar: object  # Sigma trace feeding q, or 0.0

    @property
    def mesh(self):
        return self.state.mesh


@dataclass(frozen=True, eq=False)
class Objective:
    """One of the shape functionals minimized by :func:`descent.optimize`.

    ``lowregret``  J~ - J~(nominal) + F*_eps(flux gap)
    ``nominal``    J~ with the known data only
    ``fixed_delta`` J~ with Sigma data g_d + g_delta
    ``nostar``     J~ - J~(nominal) + <flux gap, g*> (bang-bang g*)
    """

    mode: str
    f: object
    g_d: object
    target: object
    params: RegretParams
    nominal: object = None
    g_delta: BoundaryTrace | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown objective mode {self.mode!r}")
        if self.mode in ("lowregret", "nostar") and self.nominal is None:
            raise ConfigError(f"mode {self.mode} needs nominal data")
        if self.mode == "fixed_delta" and self.g_delta is None:
            raise ConfigError("fixed_delta mode needs g_delta")

    def sigma_data(self, mesh):
        if self.mode != "fixed_delta":
            return self.g_d
        base = fem.loop_trace(mesh, Label.SIGMA, self.g_d)
        return base.with_values(base.values + self.g_delta.values)

    def evaluate(self, mesh) -> Evaluation:
        st = system.solve_state(mesh, self.f, self.sigma_data(mesh), self.target)
        if self.mode in ("nominal", "fixed_delta"):
            jt = eval_Jtilde(mesh, st)
            return Evaluation(st, jt, jt, 0.0, 0.0, 0.0)
        fn = eval_Jeps if self.mode == "lowregret" else eval_Jstar
        r = fn(mesh, st, None, self.nominal, self.params)
        return Evaluation(st, r.Jeps, r.tracking, r.fenchel_value, r.gbar_norm, r.gbar)
