"""Reference data, target generation, the g_delta regret study and report files."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import fem, geometry, regret, shapegrad
from .errors import IndexOutOfRange, RegretShapeError
from .geometry import Label, Mesh
from .system import Target

F_SOURCE = 1.0
G_A, G_B = -0.2, 0.2
EPS_GRID = (8.0, 4.0, 2.0, 1.0, 0.5, 0.25, 0.225, 0.125, 0.0625)
I_RANGE = tuple(range(1, 11))


def g_d(x, y):
    """Known Sigma data ``0.1 cos(2 pi x) sin(2 pi y)``."""
    return 0.1 * np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y)


@dataclass(frozen=True)
class TargetSpec:
    hidden_boundary: str = "circle"  # or "arrowhead"
    resolution: float = 2.0  # multiplier over the working sample counts


def make_target_mesh(spec: TargetSpec, scale: float = 1.0) -> Mesh:
    sigma, _, omega = geometry.reference_curves(scale * spec.resolution)
    hidden = geometry.hidden_curve(spec.hidden_boundary, scale * spec.resolution)
    return geometry.build_annulus(sigma, hidden, omega, inner_label=Label.GAMMA_D)


def make_target(spec: TargetSpec, working: Mesh, f=F_SOURCE, gd=g_d, scale: float = 1.0) -> Target:
    """Solve on Omega_d (2x resolution) and sample on the working omega nodes."""
    md = make_target_mesh(spec, scale)
    v = fem.solve_dirichlet(md, f, [(Label.SIGMA, gd), (Label.GAMMA_D, 0.0)], label="u_d")
    ids = working.omega_nodes
    vals = fem.interpolate_values(md, v, working.nodes[ids])
    return Target(ids.copy(), vals, spec.hidden_boundary)


def make_gdelta(i: int, mesh: Mesh) -> fem.BoundaryTrace:
    """Stress family g_delta^i at Sigma nodes, i in 1..10."""
    if int(i) != i or not 1 <= i <= 10:
        raise IndexOutOfRange(f"g_delta index {i} outside 1..10")

    def g(x, y):
        raw = x * y / (30.0 * (1.0 - 0.099 * i)) + 0.02 * np.cos(4 * np.pi * x) * np.cos(4 * np.pi * y)
        return np.minimum(0.2, np.maximum(-0.2, raw))

    return fem.loop_trace(mesh, Label.SIGMA, g)


def reference_problem(target: str = "circle", scale: float = 1.0, resolution: float = 2.0):
    """Working mesh plus u_d for one hidden boundary, ready for :func:`descent.optimize`."""
    from .descent import Problem

    mesh = geometry.build_reference_mesh(scale)
    u_d = make_target(TargetSpec(target, resolution), mesh, scale=scale)
    return Problem(mesh, F_SOURCE, g_d, u_d, target)


# ---------------------------------------------------------------------------
# regret study


@dataclass(eq=False)
class RegretStudyResult:
    """``diff[a, b] = J_lowregret[a, b] - J_opt[a]`` for ``i_range[a]``, ``eps_list[b]``."""

    eps_list: tuple
    i_range: tuple
    J_opt: np.ndarray
    J_lowregret: np.ndarray
    errors: dict = field(default_factory=dict)  # (i, eps or None) -> message

    @property
    def diff(self) -> np.ndarray:
        return self.J_lowregret - self.J_opt[:, None]

    def profile(self) -> np.ndarray:
        """Largest difference over i, one value per eps (NaN for a failed eps)."""
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanmax(self.diff, axis=0)

    def rows(self):
        for a, i in enumerate(self.i_range):
            for b, e in enumerate(self.eps_list):
                yield i, e, self.J_opt[a], self.J_lowregret[a, b], self.diff[a, b]


def _fixed_delta_one(args):
    from .descent import optimize

    problem, params, i, method = args
    gd = make_gdelta(i, problem.mesh0)
    try:
        res = optimize(problem, params, "fixed_delta", g_delta=gd, method=method, keep_every=0)
    except RegretShapeError as exc:
        return i, math.nan, f"{type(exc).__name__}: {exc}"
    return i, res.final["tracking"], ""


def regret_study(eps_list, i_range, problem, params, lowregret_meshes, workers=1,
                 method="flux") -> RegretStudyResult:
    """Compare each g_delta^i optimum with the low-regret shapes.

    Parameters
    ----------
    lowregret_meshes : dict
        eps -> final mesh of the low-regret run for that eps. Missing
        entries (failed runs) leave NaN cells.
    """
    from .descent import run_jobs

    eps_list = tuple(float(e) for e in eps_list)
    i_range = tuple(int(i) for i in i_range)
    for i in i_range:
        make_gdelta(i, problem.mesh0)  # validate before any run starts
    jobs = [(problem, params, i, method) for i in i_range]
    errors = {}
    J_opt = np.full(len(i_range), math.nan)
    for a, (i, val, err) in enumerate(run_jobs(_fixed_delta_one, jobs, workers)):
        J_opt[a] = val
        if err:
            errors[(i, None)] = err
    J_low = np.full((len(i_range), len(eps_list)), math.nan)
    for b, e in enumerate(eps_list):
        mesh = lowregret_meshes.get(e)
        if mesh is None:
            errors[(None, e)] = "no low-regret shape"
            continue
        for a, i in enumerate(i_range):
            try:
                gd = make_gdelta(i, mesh)
                J_low[a, b] = regret.eval_J_with_delta(mesh, gd, problem.target, problem.f, problem.g_d)
            except RegretShapeError as exc:
                errors[(i, e)] = f"{type(exc).__name__}: {exc}"
    return RegretStudyResult(eps_list, i_range, J_opt, J_low, errors)


# ---------------------------------------------------------------------------
# report

SWEEP_COLUMNS = ("eps", "Jeps", "tracking", "gbar_norm", "converged", "iterations")
REGRET_COLUMNS = ("i", "eps", "J_opt", "J_lowregret", "diff")
_PALETTE = ("#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f")


def _num(v) -> str:
    return repr(float(v))


def write_sweep_table(entries, path) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for en in entries:
            r = en.result
            if r is None:
                w.writerow([_num(en.eps), "nan", "nan", "nan", 0, 0])
                continue
            fin = r.final
            w.writerow([_num(en.eps), _num(fin["Jeps"]), _num(fin["tracking"]),
                        _num(fin["gbar_norm"]), int(r.converged), r.iterations])
    return Path(path)


def write_regret_table(study, path) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REGRET_COLUMNS)
        if study is not None:
            for i, e, jo, jl, d in study.rows():
                w.writerow([i, _num(e), _num(jo), _num(jl), _num(d)])
    return Path(path)


def read_table(path) -> list:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


class _Frame:
    """Data-to-pixel map for one SVG panel."""

    def __init__(self, boxes, width, height, margin=50, equal=False):
        x0, y0, x1, y1 = boxes
        if x1 <= x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 <= y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        sx = (width - 2 * margin) / (x1 - x0)
        sy = (height - 2 * margin) / (y1 - y0)
        if equal:
            sx = sy = min(sx, sy)
        self.x0, self.y0, self.sx, self.sy = x0, y0, sx, sy
        self.m, self.h = margin, height
        self.bounds = (x0, y0, x1, y1)

    def __call__(self, x, y):
        return self.m + (x - self.x0) * self.sx, self.h - self.m - (y - self.y0) * self.sy


def _svg(series, path, title, xlabel="", ylabel="", equal=False, closed=False,
         width=640, height=480):
    """Hand-rolled SVG: one polyline per (label, x, y) with axes and legend."""
    series = [(lab, np.asarray(x, float), np.asarray(y, float)) for lab, x, y in series]
    finite = [(x[np.isfinite(y)], y[np.isfinite(y)]) for _, x, y in series]
    finite = [(x, y) for x, y in finite if len(x)]
    if finite:
        xs = np.concatenate([x for x, _ in finite])
        ys = np.concatenate([y for _, y in finite])
        box = (xs.min(), ys.min(), xs.max(), ys.max())
    else:
        box = (0.0, 0.0, 1.0, 1.0)
    fr = _Frame(box, width, height, equal=equal)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
    ]
    x0, y0, x1, y1 = fr.bounds
    (ax, ay), (bx, by) = fr(x0, y0), fr(x1, y1)
    out.append(f'<rect x="{ax:.2f}" y="{by:.2f}" width="{bx - ax:.2f}" height="{ay - by:.2f}" '
               'fill="none" stroke="#888"/>')
    for v in np.linspace(x0, x1, 5):
        px, _ = fr(v, y0)
        out.append(f'<text x="{px:.2f}" y="{ay + 15:.2f}" text-anchor="middle" font-size="10">{v:.3g}</text>')
    for v in np.linspace(y0, y1, 5):
        _, py = fr(x0, v)
        out.append(f'<text x="{ax - 4:.2f}" y="{py + 3:.2f}" text-anchor="end" font-size="10">{v:.3g}</text>')
    if xlabel:
        out.append(f'<text x="{width / 2}" y="{height - 8}" text-anchor="middle" font-size="11">{xlabel}</text>')
    if ylabel:
        out.append(f'<text x="12" y="{height / 2}" font-size="11" '
                   f'transform="rotate(-90 12 {height / 2})" text-anchor="middle">{ylabel}</text>')
    for n, (lab, x, y) in enumerate(series):
        ok = np.isfinite(x) & np.isfinite(y)
        pts = " ".join("%.2f,%.2f" % fr(a, b) for a, b in zip(x[ok], y[ok]))
        tag = "polygon" if closed else "polyline"
        color = _PALETTE[n % len(_PALETTE)]
        out.append(f'<{tag} points="{pts}" fill="none" stroke="{color}" stroke-width="1.2">'
                   f'<title>{lab}</title></{tag}>')
        out.append(f'<text x="{width - 45}" y="{40 + 14 * n}" font-size="10" fill="{color}" '
                   f'text-anchor="end">{lab}</text>')
    out.append("</svg>\n")
    Path(path).write_text("\n".join(out))
    return Path(path)


def emit_report(out_dir, target="circle", nominal=None, sweep=(), study=None, hidden=None) -> list:
    """Write tables and SVG overlays for one target profile.

    Parameters
    ----------
    nominal : RunResult or None
    sweep : sequence of SweepEntry
    study : RegretStudyResult or None
    hidden : (n, 2) polyline of the hidden boundary, drawn when given

    Returns
    -------
    list of Path
        Files written. The CSV tables are always written, header only when
        there is nothing to report.
    """
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    sweep = [en for en in sweep]
    files = [write_sweep_table(sweep, d / "sweep_table.csv"),
             write_regret_table(study, d / "regret_table.csv")]
    done = [en for en in sweep if en.result is not None]

    curves = []
    if hidden is not None:
        curves.append(("Gamma_d", *np.asarray(hidden).T))
    if nominal is not None:
        curves.append(("nominal", *nominal.gamma.T))
    curves += [(f"eps={en.eps:g}", *en.result.gamma.T) for en in done]
    if nominal is not None or done:
        files.append(_svg(curves, d / f"boundaries_{target}.svg", f"boundaries ({target})",
                          "x1", "x2", equal=True, closed=True))
        runs = ([("nominal", nominal)] if nominal is not None else []) + [
            (f"eps={en.eps:g}", en.result) for en in done]
        obj = []
        for lab, r in runs:
            it = [rec.iter for rec in r.records]
            jv = np.abs([rec.Jeps for rec in r.records])
            obj.append((lab, it, np.log10(np.maximum(jv, 1e-300))))
        files.append(_svg(obj, d / f"objective_{target}.svg", f"objective ({target})",
                          "iteration", "log10 |J|"))
    if study is not None and len(study.eps_list):
        order = np.argsort(study.eps_list)
        le = np.log10(np.asarray(study.eps_list)[order])
        diff = study.diff[:, order]
        lines = [(f"i={i}", le, diff[a]) for a, i in enumerate(study.i_range)]
        files.append(_svg(lines, d / f"regret_diff_{target}.svg", f"regret difference ({target})",
                          "log10 eps", "J_lowregret - J_opt"))
    return files


# ---------------------------------------------------------------------------
# gradient verification

GATE_REL = 2e-2


@dataclass(frozen=True)
class GateRow:
    iterate: int
    direction: int
    check: object  # shapegrad.FDCheck

    @property
    def passed(self) -> bool:
        return self.check.best_rel_error <= GATE_REL and self.check.converges


def verify_gradient(problem, params, nominal, iterates=(0, 5, 15), n_dirs=5, seed=0,
                    mode="lowregret", method="flux") -> list:
    """FD gate at several iterates of one run, ``n_dirs`` random fields each.

    The mesh at iterate k is reproduced by a deterministic run of k steps.
    """
    from .descent import optimize

    rng = np.random.default_rng(seed)
    obj = regret.Objective(mode, problem.f, problem.g_d, problem.target, params, nominal)
    rows = []
    for k in iterates:
        mesh = problem.mesh0
        if k > 0:
            mesh = optimize(problem, replace(params, max_iter=k, tol=1e-300), mode, nominal,
                            method=method, keep_every=0).mesh
        for j in range(n_dirs):
            d = shapegrad.random_direction(mesh, rng)
            rows.append(GateRow(k, j, shapegrad.fd_check(obj, mesh, d, method=method)))
    return rows
