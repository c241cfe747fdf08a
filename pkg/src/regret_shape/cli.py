"""Command line front end: ``regret-shape run --mode ... --target ...``.

Configuration is a flat ``key=value`` file (``--config``) overridden by
flags. Every run directory receives a ``config.snapshot`` from which the
run can be replayed bitwise in single-threaded mode.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from . import descent, experiments, geometry
from .errors import ConfigError, RegretShapeError
from .regret import RegretParams
from .system import NominalData

log = logging.getLogger("regret_shape")

MODES = ("nominal", "lowregret", "sweep", "regret-study", "verify-gradient")
TARGETS = ("circle", "arrowhead")
OUT_ENV = "REGRET_SHAPE_OUT"


@dataclass(frozen=True)
class Config:
    mode: str = "nominal"
    target: str = "circle"
    eps: tuple = (0.5,)
    g_a: float = experiments.G_A
    g_b: float = experiments.G_B
    alpha: float | None = None
    sigma: float = RegretParams.sigma
    tol: float = RegretParams.tol
    nominal_tol: float | None = None
    max_iter: int = RegretParams.max_iter
    t_min: float = RegretParams.t_min
    t_max: float = RegretParams.t_max
    max_move: float | None = RegretParams.max_move
    i_range: tuple = experiments.I_RANGE
    method: str = "flux"
    resolution: float = 2.0
    coarse: bool = False
    threads: int = 1
    verify: bool = False
    out: str = ""

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.target not in TARGETS:
            raise ConfigError(f"unknown target {self.target!r}")
        if not self.eps:
            raise ConfigError("need at least one eps")
        if self.method not in ("flux", "average"):
            raise ConfigError(f"unknown gradient method {self.method!r}")
        if int(self.threads) < 1:
            raise ConfigError("threads must be at least 1")
        if self.resolution < 1 and not self.coarse:
            raise ConfigError("target resolution below the working mesh needs --coarse")
        if self.nominal_tol is not None and not self.nominal_tol > 0:
            raise ConfigError("nominal_tol must be positive")
        self.params()  # validates the optimizer fields

    def params(self, eps=None) -> RegretParams:
        return RegretParams(
            eps=float(self.eps[0] if eps is None else eps), g_a=self.g_a, g_b=self.g_b,
            alpha=self.alpha, sigma=self.sigma, tol=self.tol, max_iter=self.max_iter,
            t_min=self.t_min, t_max=self.t_max, max_move=self.max_move,
        )

    def nominal_params(self) -> RegretParams:
        return replace(self.params(), tol=self.nominal_tol or self.tol)

    @property
    def scale(self) -> float:
        return 0.5 if self.coarse else 1.0

    @property
    def root(self) -> Path:
        base = self.out or os.environ.get(OUT_ENV, "") or "runs"
        return Path(base) / (self.target + ("-coarse" if self.coarse else ""))

    def snapshot(self) -> str:
        return "".join(f"{k}={_dump(v)}\n" for k, v in asdict(self).items())

    def nominal_key(self) -> str:
        keys = ("target", "g_a", "g_b", "alpha", "sigma", "tol", "nominal_tol", "max_iter",
                "t_min", "t_max", "max_move", "method", "resolution", "coarse")
        d = asdict(self)
        return "".join(f"{k}={_dump(d[k])}\n" for k in keys)


def _dump(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, tuple):
        return ",".join(_dump(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(name: str, text: str):
    f = {f.name: f for f in fields(Config)}[name]
    text = text.strip()
    try:
        if name in ("eps",):
            return tuple(float(x) for x in text.split(",") if x.strip())
        if name == "i_range":
            return tuple(int(x) for x in text.split(",") if x.strip())
        if f.type in ("bool",):
            return text.lower() in ("1", "true", "yes", "on")
        if text.lower() == "none" and "None" in str(f.type):
            return None
        if name in ("max_iter", "threads"):
            return int(text)
        if name in ("mode", "target", "method", "out"):
            return text
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {text!r}") from exc


def read_config(path) -> dict:
    allowed = {f.name for f in fields(Config)}
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        if k not in allowed:
            raise ConfigError(f"{path}:{n}: unknown key {k!r}")
        out[k] = _parse_value(k, v)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="regret-shape", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one pipeline")
    r.add_argument("--config", help="key=value file; flags override it")
    r.add_argument("--mode", choices=MODES)
    r.add_argument("--target", choices=TARGETS)
    r.add_argument("--eps", help="one value or a comma separated list")
    r.add_argument("--g-bounds", help="g_a,g_b")
    r.add_argument("--alpha", help="traction Robin weight (none = mesh based default)")
    r.add_argument("--sigma")
    r.add_argument("--tol")
    r.add_argument("--nominal-tol")
    r.add_argument("--max-iter")
    r.add_argument("--t-max")
    r.add_argument("--max-move")
    r.add_argument("--i-range", help="comma separated g_delta indices")
    r.add_argument("--method", choices=("flux", "average"))
    r.add_argument("--out", help=f"output root (default ${OUT_ENV} or ./runs)")
    r.add_argument("--coarse", action="store_true", default=None, help="halve the mesh sample counts")
    r.add_argument("--threads", help="parallel scenario workers")
    r.add_argument("--verify", action="store_true", default=None,
                   help="run the gradient gate at the initial shape first")
    r.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(ns) -> Config:
    kw = read_config(ns.config) if ns.config else {}
    for name in ("mode", "target", "eps", "alpha", "sigma", "tol", "nominal_tol", "max_iter",
                 "t_max", "max_move", "i_range", "method", "out", "threads"):
        v = getattr(ns, name)
        if v is not None:
            kw[name] = _parse_value(name, v) if isinstance(v, str) and name not in (
                "mode", "target", "method", "out") else v
    if ns.g_bounds is not None:
        parts = ns.g_bounds.split(",")
        if len(parts) != 2:
            raise ConfigError("--g-bounds expects g_a,g_b")
        kw["g_a"], kw["g_b"] = (_parse_value("g_a", x) for x in parts)
    for flag in ("coarse", "verify"):
        if getattr(ns, flag):
            kw[flag] = True
    if ns.mode == "sweep" and ns.eps is None and "eps" not in (read_config(ns.config) if ns.config else {}):
        kw["eps"] = experiments.EPS_GRID
    try:
        return Config(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# pipelines


def _problem(cfg: Config):
    return experiments.reference_problem(cfg.target, cfg.scale, cfg.resolution)


def ensure_nominal(cfg: Config, problem):
    """Nominal run dir plus cache; reused when its key matches ``cfg``."""
    d = cfg.root / "nominal"
    key = cfg.nominal_key()
    if NominalData.exists(d) and (d / "cache.key").is_file() and (d / "cache.key").read_text() == key:
        log.info("using nominal cache in %s", d)
        return None, NominalData.load(d, problem.mesh0)
    log.info("nominal run -> %s", d)
    res, nom = descent.run_nominal(problem, cfg.nominal_params(), method=cfg.method)
    descent.write_run(res, d, replace(cfg, mode="nominal").snapshot())
    nom.save(d)
    (d / "cache.key").write_text(key)
    if not res.converged:
        log.warning("nominal run stopped at max_iter (test %.3e)", res.final["test"])
    return res, nom


def _eps_dir(root: Path, e: float) -> Path:
    return root / f"eps_{e:g}"


def run_nominal_mode(cfg: Config) -> int:
    problem = _problem(cfg)
    res, _ = ensure_nominal(cfg, problem)
    if res is not None:
        hidden = geometry.hidden_curve(cfg.target).sample()
        experiments.emit_report(cfg.root / "nominal", cfg.target, nominal=res, hidden=hidden)
    return 0


def _sweep(cfg: Config, problem, nominal, root: Path):
    entries = descent.epsilon_sweep(problem, cfg.eps, cfg.params(), nominal, workers=cfg.threads,
                                    method=cfg.method)
    status = 0
    for en in entries:
        if en.result is None:
            log.error("eps=%g failed: %s", en.eps, en.error)
            status = 1
            continue
        descent.write_run(en.result, _eps_dir(root, en.eps), replace(cfg, eps=(en.eps,)).snapshot())
    return entries, status


def run_lowregret_mode(cfg: Config) -> int:
    problem = _problem(cfg)
    _, nom = ensure_nominal(cfg, problem)
    _, status = _sweep(cfg, problem, nom, cfg.root / "lowregret")
    return status


def _nominal_result(cfg: Config, problem, res):
    if res is not None:
        return res
    # reload the polyline only; enough for the overlays
    d = cfg.root / "nominal"
    mesh = geometry.read_mesh(d / "final_mesh.txt")
    recs = descent.read_records(d / "records.csv")
    return descent.RunResult(mesh, mesh.gamma_points, None, recs, True, mode="nominal")


def run_sweep_mode(cfg: Config, root: Path | None = None, study: bool = False) -> int:
    problem = _problem(cfg)
    res, nom = ensure_nominal(cfg, problem)
    root = root or cfg.root / "sweep"
    root.mkdir(parents=True, exist_ok=True)
    (root / "config.snapshot").write_text(cfg.snapshot())
    entries, status = _sweep(cfg, problem, nom, root)
    result = None
    if study:
        meshes = {en.eps: en.result.mesh for en in entries if en.result is not None}
        result = experiments.regret_study(cfg.eps, cfg.i_range, problem, cfg.params(), meshes,
                                          workers=cfg.threads, method=cfg.method)
        for k, msg in sorted(result.errors.items(), key=str):
            log.error("regret cell %s failed: %s", k, msg)
        status = status or int(bool(result.errors))
    hidden = geometry.hidden_curve(cfg.target).sample()
    experiments.emit_report(root, cfg.target, _nominal_result(cfg, problem, res), entries,
                            result, hidden)
    return status


def run_verify_mode(cfg: Config, iterates=(0, 5, 15)) -> int:
    problem = _problem(cfg)
    _, nom = ensure_nominal(cfg, problem)
    rows = experiments.verify_gradient(problem, cfg.params(), nom, iterates, method=cfg.method)
    d = cfg.root / "verify_gradient"
    d.mkdir(parents=True, exist_ok=True)
    (d / "config.snapshot").write_text(cfg.snapshot())
    lines = ["iterate,direction,analytic,volumetric,best_rel_error,converges,passed"]
    for r in rows:
        c = r.check
        lines.append(f"{r.iterate},{r.direction},{c.boundary!r},{c.volumetric!r},"
                     f"{c.best_rel_error!r},{int(c.converges)},{int(r.passed)}")
    (d / "report.csv").write_text("\n".join(lines) + "\n")
    ok = all(r.passed for r in rows)
    worst = max(r.check.best_rel_error for r in rows)
    print(f"gradient gate: {sum(r.passed for r in rows)}/{len(rows)} passed, "
          f"worst relative error {worst:.2e} -> {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def run(cfg: Config) -> int:
    if cfg.verify and cfg.mode != "verify-gradient":
        if run_verify_mode(cfg, iterates=(0,)) != 0:
            return 1
    if cfg.mode == "nominal":
        return run_nominal_mode(cfg)
    if cfg.mode == "lowregret":
        return run_lowregret_mode(cfg)
    if cfg.mode == "sweep":
        return run_sweep_mode(cfg)
    if cfg.mode == "regret-study":
        return run_sweep_mode(cfg, cfg.root / "regret_study", study=True)
    return run_verify_mode(cfg)


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(ns)
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (RegretShapeError, OSError) as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
