"""Compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--csv out.csv]

Times every kernel on reference-mesh data with both backends, then one
objective-plus-gradient evaluation with each backend active, to show what
share of a descent iteration the kernels account for.
"""

import argparse
import csv
import sys
import timeit

import numpy as np

from scipy.spatial import cKDTree

from regret_shape import experiments, geometry, kernels, regret, shapegrad, system


def _best(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def kernel_cases(mesh):
    rng = np.random.default_rng(0)
    nodes, tris = mesh.nodes, mesh.triangles
    areas, grads = kernels.triangle_geometry(nodes, tris, impl="python")
    target = geometry.build_annulus(*_target_curves())
    pts = target.nodes[target.omega_nodes]
    # walks start next to the point, as in fem.locate
    start = mesh.node_to_triangle[cKDTree(nodes).query(pts)[1]]
    gamma = mesh.gamma_points
    cloud = rng.uniform(-2, 2, (2000, 2))
    return {
        "triangle_geometry": lambda impl: kernels.triangle_geometry(nodes, tris, impl=impl),
        "stiffness_values": lambda impl: kernels.stiffness_values(areas, grads, impl=impl),
        "locate_points": lambda impl: kernels.locate_points(
            nodes, tris, mesh.neighbors, pts, start, impl=impl),
        "point_polyline_distance": lambda impl: kernels.point_polyline_distance(cloud, gamma, impl=impl),
        "polyline_self_intersects": lambda impl: kernels.polyline_self_intersects(gamma, impl=impl),
    }


def _target_curves():
    sigma, _, omega = geometry.reference_curves(2.0)
    return sigma, geometry.hidden_curve("circle", 2.0), omega


def _iteration(problem, nominal, params):
    ev = regret.Objective("lowregret", problem.f, problem.g_d, problem.target, params,
                          nominal).evaluate(problem.mesh0)
    gr = shapegrad.compute_gradient(ev)
    return shapegrad.traction_extend(problem.mesh0, gr.density)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--csv", help="also write the table here")
    args = ap.parse_args(argv)

    try:
        kernels.backend("cython")
    except ImportError:
        sys.exit("compiled extension not built: python setup.py build_ext --inplace")

    mesh = geometry.build_reference_mesh()
    rows = []
    for name, fn in kernel_cases(mesh).items():
        t_py = _best(lambda: fn("python"), args.repeat, 3)
        t_cy = _best(lambda: fn("cython"), args.repeat, 3)
        rows.append((name, t_py, t_cy))

    # a full evaluation, with a fresh mesh per call so no cached geometry is reused
    problem = experiments.reference_problem("circle")
    params = regret.RegretParams()
    s = system.solve_state(problem.mesh0, problem.f, problem.g_d, problem.target)
    nominal = system.NominalData(regret.eval_Jtilde(problem.mesh0, s), s.flux_w())
    saved = kernels._impl
    times = {}
    for impl in ("python", "cython"):
        kernels._impl = kernels.backend(impl)
        try:
            def one():
                m = geometry.Mesh(mesh.nodes.copy(), mesh.triangles, mesh.tri_region,
                                  mesh.loop_nodes, mesh.n_fixed, mesh.inner_label)
                _iteration(problem.__class__(m, problem.f, problem.g_d, problem.target),
                           nominal, params)
            times[impl] = _best(one, args.repeat, 1)
        finally:
            kernels._impl = saved
    rows.append(("objective+gradient", times["python"], times["cython"]))

    print(f"{'kernel':28s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, a, b in rows:
        print(f"{name:28s} {1e3 * a:12.3f} {1e3 * b:12.3f} {a / b:8.1f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kernel", "python_s", "cython_s", "speedup"])
            for name, a, b in rows:
                w.writerow([name, repr(a), repr(b), repr(a / b)])
    return 0


if __name__ == "__main__":
    sys.exit(main())
