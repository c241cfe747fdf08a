import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from regret_shape import descent, experiments, fem, geometry, regret
from regret_shape.descent import SweepEntry
from regret_shape.errors import IndexOutOfRange
from regret_shape.geometry import Label


@pytest.fixture(scope="module")
def nominal_run(coarse_problem, fast_params):
    return descent.run_nominal(coarse_problem, fast_params)


def test_g_d_values():
    assert experiments.g_d(0.0, 0.25) == pytest.approx(0.1)
    assert experiments.g_d(0.5, 0.25) == pytest.approx(-0.1)
    assert experiments.g_d(0.3, 0.0) == 0.0


def test_gdelta_formula(coarse_mesh):
    ids = coarse_mesh.loop_nodes[Label.SIGMA]
    x, y = coarse_mesh.nodes[ids].T
    for i in (1, 5, 10):
        raw = x * y / (30 * (1 - 0.099 * i)) + 0.02 * np.cos(4 * np.pi * x) * np.cos(4 * np.pi * y)
        gd = experiments.make_gdelta(i, coarse_mesh)
        np.testing.assert_allclose(gd.values, np.clip(raw, -0.2, 0.2), atol=1e-15)
    # amplitude grows with i towards the box
    amp = [np.abs(experiments.make_gdelta(i, coarse_mesh).values).max() for i in experiments.I_RANGE]
    assert np.all(np.diff(amp) >= 0) and amp[-1] == pytest.approx(0.2)


def test_target_matches_direct_solve():
    # u_d sampled from the 2x mesh agrees with a solve on a 1x mesh around Gamma_d
    sigma, _, omega = geometry.reference_curves(1.0)
    hidden = geometry.hidden_curve("circle")
    m = geometry.build_annulus(sigma, hidden, omega, inner_label=Label.GAMMA_D)
    direct = fem.solve_dirichlet(m, 1.0, [(Label.SIGMA, experiments.g_d), (Label.GAMMA_D, 0.0)])
    t = experiments.make_target(experiments.TargetSpec("circle"), m)
    np.testing.assert_array_equal(t.omega_ids, m.omega_nodes)
    ref = direct.values[m.omega_nodes]
    assert np.abs(t.values - ref).max() <= 1e-2 * np.abs(ref).max()


def test_regret_study_bookkeeping(coarse_problem, fast_params, monkeypatch):
    monkeypatch.setattr(experiments, "_fixed_delta_one", lambda a: (a[2], 0.0, "") if a[2] != 3 else (3, math.nan, "X: y"))
    m = coarse_problem.mesh0
    s = experiments.regret_study((0.5, 1.0), (1, 2, 3), coarse_problem, fast_params, {0.5: m})
    p = coarse_problem
    for a, i in enumerate(s.i_range):
        ref = regret.eval_J_with_delta(m, experiments.make_gdelta(i, m), p.target, p.f, p.g_d)
        assert s.J_lowregret[a, 0] == ref
    assert np.isnan(s.J_lowregret[:, 1]).all()
    assert s.errors == {(3, None): "X: y", (None, 1.0): "no low-regret shape"}
    np.testing.assert_array_equal(s.diff[:2, 0], s.J_lowregret[:2, 0])
    assert s.profile()[0] == pytest.approx(np.max(s.J_lowregret[:2, 0]))
    assert len(list(s.rows())) == 6
    with pytest.raises(IndexOutOfRange):
        experiments.regret_study((0.5,), (0, 1), coarse_problem, fast_params, {})


def test_tables(tmp_path, nominal_run):
    res = nominal_run[0]
    path = experiments.write_sweep_table([SweepEntry(0.5, res), SweepEntry(1.0, None, "E: x")],
                                         tmp_path / "s.csv")
    rows = experiments.read_table(path)
    assert rows[0]["Jeps"] == res.final["Jeps"] and rows[0]["iterations"] == res.iterations
    assert math.isnan(rows[1]["Jeps"])
    path = experiments.write_regret_table(None, tmp_path / "r.csv")
    assert path.read_text().strip() == ",".join(experiments.REGRET_COLUMNS)


def test_emit_report(tmp_path, nominal_run, coarse_problem, fast_params, monkeypatch):
    res = nominal_run[0]
    monkeypatch.setattr(experiments, "_fixed_delta_one", lambda a: (a[2], 0.0, ""))
    s = experiments.regret_study((0.5, 1.0), (1, 2), coarse_problem, fast_params,
                                 {0.5: res.mesh, 1.0: res.mesh})
    files = experiments.emit_report(tmp_path, "circle", res, [SweepEntry(0.5, res)], s,
                                    hidden=geometry.hidden_curve("circle").sample())
    names = sorted(f.name for f in files)
    assert names == ["boundaries_circle.svg", "objective_circle.svg", "regret_diff_circle.svg",
                     "regret_table.csv", "sweep_table.csv"]
    for f in files:
        if f.suffix == ".svg":
            root = ET.parse(f).getroot()
            assert root.tag.endswith("svg")
            ns = "{http://www.w3.org/2000/svg}"
            assert root.findall(f".//{ns}polyline") or root.findall(f".//{ns}polygon")
    assert len(experiments.read_table(tmp_path / "regret_table.csv")) == 4
    empty = experiments.emit_report(tmp_path / "e")
    assert sorted(f.name for f in empty) == ["regret_table.csv", "sweep_table.csv"]


def test_verify_gradient_small(coarse_problem, fast_params, nominal_run):
    rows = experiments.verify_gradient(coarse_problem, fast_params, nominal_run[1],
                                       iterates=(0, 3), n_dirs=2)
    assert [(r.iterate, r.direction) for r in rows] == [(0, 0), (0, 1), (3, 0), (3, 1)]
    assert all(r.passed for r in rows)
