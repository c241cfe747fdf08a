"""Gradient descent on Gamma with a weighted Barzilai-Borwein step.

Loop (iterate k carries phi^k, the accumulated displacement of Gamma)::

    J^k, delta phi^k  = objective and traction-extended descent field at phi^k
    test              = max(|J^k - J^{k-1}|, ||delta phi^k||_{L2(Gamma)})
    t^{k+1}           = 0.5 for k = 0, else BB from (phi^k - phi^{k-1}, dphi^k - dphi^{k-1})
    phi^{k+1}         = phi^k + t^{k+1} delta phi^k

Gamma keeps its node ids through remeshing, so the BB history never needs
re-interpolation.
"""

from __future__ import annotations

import concurrent.futures as cf
import csv
import math
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import fem, geometry, shapegrad
from .errors import (
    DegenerateStep, ElementInversion, NonFiniteObjective, RegretShapeError,
    SelfIntersectingBoundary,
)
from .geometry import Mesh
from .regret import T_MAX, T_MIN, Objective, RegretParams, eval_Jstar
from .system import NominalData

BB_DENOM_TOL = 1e-14
MAX_HALVINGS = 10
RECORD_COLUMNS = (
    "iter", "Jeps", "tracking", "fenchel_value", "gbar_norm", "grad_norm", "step",
    "test", "quality", "remeshed", "halvings", "jstar", "w_h1",
)


@dataclass(frozen=True)
class Problem:
    mesh0: Mesh
    f: object
    g_d: object
    target: object
    name: str = ""


@dataclass(frozen=True)
class IterateRecord:
    iter: int
    Jeps: float
    tracking: float
    fenchel_value: float
    gbar_norm: float
    grad_norm: float
    step: float
    test: float
    quality: float
    remeshed: bool
    halvings: int = 0
    jstar: float = math.nan
    w_h1: float = math.nan

    def row(self):
        return [getattr(self, c) for c in RECORD_COLUMNS]


@dataclass(eq=False)
class RunResult:
    mesh: Mesh
    gamma: np.ndarray
    displacement: np.ndarray  # (iters, n_gamma, 2), Gamma displacement per iterate
    records: list
    converged: bool
    final: dict = field(default_factory=dict)
    density: np.ndarray | None = None
    gamma_history: dict = field(default_factory=dict)  # iter -> (gamma points, density)
    mode: str = ""
    eps: float = math.nan
    elapsed: float = 0.0

    @property
    def stalled(self) -> bool:
        """Stopped because no step along the descent field kept the mesh valid."""
        return bool(self.final.get("stalled", 0))

    @property
    def iterations(self) -> int:
        return self.records[-1].iter if self.records else 0


# ---------------------------------------------------------------------------
# step size


def _inner(a, b, weights):
    return float(np.sum(weights * np.einsum("ni,ni->n", a, b)))


def bb_quotient(k, phi_prev2, phi_prev1, d_prev2, d_prev1, weights=None) -> float:
    """Raw BB quotient: k odd ``<s, y>/<y, y>``, k even ``<s, s>/<s, y>``.

    ``s = phi_prev1 - phi_prev2`` and ``y = d_prev1 - d_prev2``; pairings use
    the Gamma trapezoidal weights. Raises DegenerateStep when the
    denominator vanishes relative to ``||s|| ||y||`` (scale-free, so tiny
    late-stage gradients are not mistaken for degeneracy).
    """
    s = np.asarray(phi_prev1, dtype=float) - np.asarray(phi_prev2, dtype=float)
    y = np.asarray(d_prev1, dtype=float) - np.asarray(d_prev2, dtype=float)
    if weights is None:
        weights = np.ones(len(s))
    sy = _inner(s, y, weights)
    if k % 2 == 1:
        den = _inner(y, y, weights)
        num = sy
    else:
        den = sy
        num = _inner(s, s, weights)
    scale = np.sqrt(_inner(s, s, weights) * _inner(y, y, weights))
    if abs(den) <= BB_DENOM_TOL * scale or den == 0.0:
        raise DegenerateStep(f"BB denominator {den:.3e}")
    return num / den


def bb_step(k, phi_prev2, phi_prev1, d_prev2, d_prev1, sigma, weights=None,
            t_min=T_MIN, t_max=T_MAX) -> float:
    """``sigma^k |BB_k|`` clamped to ``[t_min, t_max]``; t_min on degeneracy.

    The magnitude is used because for a descent field delta phi = -grad J
    both quotients come out negative (s and y point in opposite directions).
    """
    if k < 2:
        raise ValueError("BB step needs k >= 2")
    try:
        q = bb_quotient(k, phi_prev2, phi_prev1, d_prev2, d_prev1, weights)
    except DegenerateStep:
        return float(t_min)
    return float(np.clip(sigma**k * abs(q), t_min, t_max))


# ---------------------------------------------------------------------------
# driver


def _advance(mesh: Mesh, d, t):
    """displace with halving on inversion or a crossing Gamma, then remesh if quality drops."""
    for h in range(MAX_HALVINGS + 1):
        try:
            new = geometry.displace(mesh, d, t)
            geometry.check_gamma(new)
            break
        except (ElementInversion, SelfIntersectingBoundary):
            t *= 0.5
    else:
        raise ElementInversion(f"step still invalid after {MAX_HALVINGS} halvings")
    remeshed = False
    if geometry.needs_remesh(new):
        new = geometry.remesh(new)
        remeshed = True
    return new, t, h, remeshed


def optimize(problem: Problem, params: RegretParams, mode="lowregret", nominal=None,
             g_delta=None, method="flux", keep_every=10, callback=None,
             normal_only=False, beta=0.0) -> RunResult:
    """Descent loop for the objective selected by ``mode``.

    Parameters
    ----------
    mode : {"lowregret", "nominal", "fixed_delta", "nostar"}
    nominal : NominalData, needed by "lowregret" and "nostar"
    g_delta : Sigma trace, needed by "fixed_delta"
    keep_every : int
        Gamma polyline and density are kept every this many iterations.
    normal_only, beta
        Optional regularizations of the descent field, see
        :func:`shapegrad.traction_extend`; both off by default.
    """
    start = time.perf_counter()
    obj = Objective(mode, problem.f, problem.g_d, problem.target, params, nominal, g_delta)
    mesh = problem.mesh0
    g_ids = mesh.loop_nodes[mesh.inner_label]
    gamma0 = mesh.nodes[g_ids].copy()
    weights = geometry.trapezoid_weights(gamma0)
    alpha = params.alpha if params.alpha is not None else shapegrad.default_alpha(mesh)

    records, disp, hist = [], [], {}
    phi_prev = d_prev = None
    j_prev = None
    step, halvings, remeshed = 0.0, 0, False
    converged = stalled = False
    w0 = None
    density = None
    for k in range(int(params.max_iter) + 1):
        ev = obj.evaluate(mesh)
        if not np.isfinite(ev.value):
            raise NonFiniteObjective(f"objective is {ev.value} at iteration {k}")
        grad = shapegrad.compute_gradient(ev, method)
        G = shapegrad.traction_extend(mesh, grad.density, alpha, normal_only, beta)
        density = grad.density.values
        gnorm = shapegrad.gamma_l2_norm(mesh, G)
        test = gnorm if j_prev is None else max(abs(ev.value - j_prev), gnorm)
        jstar = math.nan
        if mode == "lowregret":
            jstar = eval_Jstar(mesh, ev.state, None, nominal, params).Jeps
        w_h1 = fem.h1_seminorm(ev.state.w)
        w0 = w_h1 if w0 is None else w0
        rec = IterateRecord(
            k, ev.value, ev.tracking, ev.fenchel_value, ev.gbar_norm, gnorm, step, test,
            geometry.quality(mesh).min_quality, remeshed, halvings, jstar, w_h1,
        )
        records.append(rec)
        phi = mesh.nodes[g_ids] - gamma0
        disp.append(phi.copy())
        if keep_every and k % keep_every == 0:
            hist[k] = (mesh.nodes[g_ids].copy(), density.copy())
        if callback is not None:
            callback(rec)
        if j_prev is not None and test < params.tol:
            converged = True
            break
        if k == int(params.max_iter):
            break
        dg = G[g_ids]
        if k == 0:
            t = min(0.5, params.t_max)
        else:
            t = bb_step(k + 1, phi_prev, phi, d_prev, dg, params.sigma, weights,
                        params.t_min, params.t_max)
        if params.max_move is not None:
            h = geometry.polyline_lengths(mesh.gamma_points).mean()
            t = max(params.t_min, min(t, params.max_move * h / max(np.abs(dg).max(), 1e-300)))
        phi_prev, d_prev, j_prev = phi, dg, ev.value
        try:
            mesh, step, halvings, remeshed = _advance(mesh, G, t)
        except ElementInversion:
            # no admissible step along delta phi: keep the last valid iterate
            stalled = True
            break

    hist[records[-1].iter] = (mesh.nodes[g_ids].copy(), density.copy())
    last = records[-1]
    final = {
        "Jeps": last.Jeps, "tracking": last.tracking, "fenchel_value": last.fenchel_value,
        "gbar_norm": last.gbar_norm, "grad_norm": last.grad_norm, "test": last.test,
        "iterations": last.iter, "w_h1_ratio": max(r.w_h1 for r in records) / max(w0, 1e-300),
        "stalled": int(stalled),
    }
    return RunResult(
        mesh, mesh.nodes[g_ids].copy(), np.asarray(disp), records, converged, final, density,
        hist, mode, params.eps, time.perf_counter() - start,
    )


def nominal_data(result: RunResult, problem: Problem, params: RegretParams) -> NominalData:
    """J~ and the Sigma flux of w at the end of a nominal run."""
    obj = Objective("nominal", problem.f, problem.g_d, problem.target, params)
    ev = obj.evaluate(result.mesh)
    return NominalData(ev.tracking, ev.state.flux_w())


def run_nominal(problem: Problem, params: RegretParams, **kw):
    res = optimize(problem, params, "nominal", **kw)
    return res, nominal_data(res, problem, params)


# ---------------------------------------------------------------------------
# sweeps


@dataclass(eq=False)
class SweepEntry:
    eps: float
    result: RunResult | None
    error: str = ""


def _sweep_one(args):
    problem, params, nominal, method, mode = args
    try:
        return SweepEntry(params.eps, optimize(problem, params, mode, nominal, method=method))
    except RegretShapeError as exc:
        return SweepEntry(params.eps, None, f"{type(exc).__name__}: {exc}")


def epsilon_sweep(problem: Problem, eps_list, params: RegretParams, nominal: NominalData,
                  workers=1, method="flux") -> list:
    """Independent low-regret runs; a failing run is recorded, not raised."""
    jobs = [(problem, replace(params, eps=float(e)), nominal, method, "lowregret") for e in eps_list]
    return run_jobs(_sweep_one, jobs, workers)


def run_jobs(fn, jobs, workers=1):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with cf.ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


# ---------------------------------------------------------------------------
# run directory


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_records(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow([_fmt(v) for v in r.row()])


def read_records(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for f in fields(IterateRecord):
                v = row[f.name]
                kw[f.name] = int(v) if f.name in ("iter", "halvings") else (
                    bool(int(v)) if f.name == "remeshed" else float(v))
            out.append(IterateRecord(**kw))
    return out


def write_boundary(points, density, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "density"])
        for (x, y), d in zip(points, density):
            w.writerow([_fmt(x), _fmt(y), _fmt(d)])


def read_boundary(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_run(result: RunResult, out_dir, config_text: str = "") -> Path:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    if config_text:
        (d / "config.snapshot").write_text(config_text)
    write_records(result.records, d / "records.csv")
    for k, (pts, dens) in sorted(result.gamma_history.items()):
        write_boundary(pts, dens, d / f"boundary_iter_{k}.csv")
    geometry.write_mesh(result.mesh, d / "final_mesh.txt")
    summary = {"mode": result.mode, "eps": result.eps, "converged": int(result.converged)}
    summary.update(result.final)
    summary["elapsed_s"] = result.elapsed
    (d / "summary.txt").write_text("".join(f"{k}={v}\n" for k, v in summary.items()))
    return d


def read_summary(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k] = v
    return out
