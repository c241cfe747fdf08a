import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from oracles import grid_fenchel, toy_sigma_trace
from regret_shape import experiments, fem, regret, system
from regret_shape.errors import ConfigError, IndexOutOfRange
from regret_shape.geometry import Label
from regret_shape.regret import RegretParams
from regret_shape.system import NominalData, Target

traces = hnp.arrays(np.float64, 16, elements=st.floats(-0.5, 0.5))
eps_s = st.floats(0.01, 10.0)


@pytest.fixture(scope="module")
def nominal_setup(coarse_problem):
    p = coarse_problem
    st_ = system.solve_state(p.mesh0, p.f, p.g_d, p.target)
    nom = NominalData(regret.eval_Jtilde(p.mesh0, st_), st_.flux_w())
    return p, st_, nom


def test_params_validation():
    for kw in ({"eps": 0}, {"g_a": 0.1}, {"g_b": -0.1}, {"alpha": -1}, {"sigma": 1.0},
               {"tol": 0}, {"max_iter": 0}, {"t_min": 2e3}, {"max_move": 0}):
        with pytest.raises(ConfigError):
            RegretParams(**kw)
    assert RegretParams().box_sq == pytest.approx(0.04)


def test_project_box_examples():
    y = toy_sigma_trace(np.zeros(16))
    assert np.all(regret.project_box(y, 1.0, -0.2, 0.2).values == 0)
    y = y.with_values(0.1)
    assert np.allclose(regret.project_box(y, 1.0, -0.2, 0.2).values, 0.1)
    assert np.allclose(regret.project_box(y, 0.1, -0.2, 0.2).values, 0.2)


def test_fenchel_examples():
    P = RegretParams(eps=0.5)
    y = toy_sigma_trace(np.zeros(16))
    fr = regret.fenchel(y, P)
    assert fr.value == 0.0 and np.all(fr.maximizer.values == 0)
    y = y.with_values(P.eps * P.g_b)
    fr = regret.fenchel(y, P)
    np.testing.assert_allclose(fr.maximizer.values, P.g_b)
    assert fr.value == pytest.approx(0.5 * P.eps * P.g_b**2 * y.length, rel=1e-12)
    assert y.length == pytest.approx(4 * np.pi, rel=3e-2)


@given(traces, eps_s)
def test_fenchel_invariants(v, eps):
    P = RegretParams(eps=eps)
    y = toy_sigma_trace(v)
    fr = regret.fenchel(y, P)
    g = fr.maximizer
    assert np.all(g.values >= P.g_a) and np.all(g.values <= P.g_b)
    assert fr.value == pytest.approx(y.inner(g) - 0.5 * eps * g.inner(g), abs=1e-12)
    assert fr.value >= 0
    assert fr.maximizer_norm == pytest.approx(g.norm())


@given(traces, st.floats(0.01, 2.0))
def test_fenchel_grid_oracle(v, eps):
    P = RegretParams(eps=eps)
    y = toy_sigma_trace(v)
    ref, gref = grid_fenchel(y, eps, P.g_a, P.g_b)
    fr = regret.fenchel(y, P)
    assert abs(fr.value - ref) <= 1e-6
    assert fr.value >= ref - 1e-15
    assert np.abs(fr.maximizer.values - gref).max() <= 0.4 / 200


@given(traces)
def test_project_box_idempotent_nonexpansive(v):
    y = toy_sigma_trace(v)
    z = toy_sigma_trace(v[::-1])
    p = regret.project_box(y, 1.0, -0.2, 0.2)
    np.testing.assert_array_equal(regret.project_box(p, 1.0, -0.2, 0.2).values, p.values)
    q = regret.project_box(z, 1.0, -0.2, 0.2)
    assert np.abs(p.values - q.values).max() <= np.abs(v - v[::-1]).max() + 1e-15
    assert p.with_values(p.values - q.values).norm() <= y.with_values(v - v[::-1]).norm() + 1e-15


@given(traces, traces, st.floats(0, 1), eps_s)
def test_fenchel_convex_in_y(a, b, s, eps):
    P = RegretParams(eps=eps)
    f = lambda v: regret.fenchel(toy_sigma_trace(v), P).value  # noqa: E731
    assert f(s * a + (1 - s) * b) <= s * f(a) + (1 - s) * f(b) + 1e-12


@given(traces, eps_s, eps_s)
def test_fenchel_monotone_in_eps(v, e1, e2):
    e1, e2 = sorted((e1, e2))
    y = toy_sigma_trace(v)
    assert regret.fenchel(y, RegretParams(eps=e1)).value >= regret.fenchel(y, RegretParams(eps=e2)).value - 1e-14


@given(traces, hnp.arrays(np.float64, 16, elements=st.floats(-0.1, 0.1)), eps_s)
def test_fenchel_frechet(v, dv, eps):
    P = RegretParams(eps=eps)
    y, d = toy_sigma_trace(v), toy_sigma_trace(dv)
    lhs = regret.fenchel(y.with_values(v + dv), P).value - regret.fenchel(y, P).value
    lin = d.inner(regret.project_box(y, eps, P.g_a, P.g_b))
    assert abs(lhs - lin) <= d.inner(d) / eps + 1e-14


def test_jtilde_examples(coarse_mesh):
    st_ = system.solve_state(coarse_mesh, 0.0, 0.0, Target.zero(coarse_mesh))
    assert regret.eval_Jtilde(coarse_mesh, st_) == 0.0
    e = np.zeros(coarse_mesh.n_nodes)
    e[coarse_mesh.omega_nodes] = 1.0
    ud = Target(coarse_mesh.omega_nodes, -np.ones(len(coarse_mesh.omega_nodes)))
    jt = regret.eval_Jtilde(coarse_mesh, st_, ud)
    area = float(e @ (fem.assemble_mass(coarse_mesh, "omega") @ e))
    assert jt == pytest.approx(0.5 * area)
    assert area == pytest.approx(np.pi * (1.75**2 - 1), rel=2e-2)


def test_jeps_at_nominal_is_zero(nominal_setup):
    p, st_, nom = nominal_setup
    r = regret.eval_Jeps(p.mesh0, st_, None, nom, RegretParams())
    assert r.Jeps == 0.0 and r.fenchel_value == 0.0 and r.gbar_norm == 0.0


def test_jeps_large_eps_limit(nominal_setup):
    p, st_, nom = nominal_setup
    shifted = NominalData(nom.jtilde * 0.5, nom.flux.with_values(nom.flux.values + 0.01))
    y = regret.flux_gap(st_, shifted)
    for eps in (10.0, 100.0, 1000.0):
        r = regret.eval_Jeps(p.mesh0, st_, None, shifted, RegretParams(eps=eps))
        assert r.fenchel_value == pytest.approx(y.inner(y) / (2 * eps), rel=1e-12)
    assert r.Jeps == pytest.approx(r.tracking - shifted.jtilde, abs=1e-6)


def test_jstar_examples(nominal_setup):
    p, st_, nom = nominal_setup
    P = RegretParams()
    r = regret.eval_Jstar(p.mesh0, st_, None, nom, P)
    assert r.Jeps == pytest.approx(r.tracking - nom.jtilde, abs=0)
    np.testing.assert_array_equal(r.gbar.values, P.g_b)  # ties go to g_b
    c = 0.03
    shifted = NominalData(nom.jtilde, nom.flux.with_values(st_.flux_w().values + c))
    r = regret.eval_Jstar(p.mesh0, st_, None, shifted, P)
    assert r.fenchel_value == pytest.approx(c * P.g_b * shifted.flux.length, rel=1e-12)


@pytest.fixture(scope="module")
def coarse_state():
    p = experiments.reference_problem("circle", 0.5)
    return p, system.solve_state(p.mesh0, p.f, p.g_d, p.target)


def test_jstar_dominates_jeps(coarse_state):
    p, st_ = coarse_state
    lam = st_.flux_w()

    @given(hnp.arrays(np.float64, len(lam), elements=st.floats(-0.2, 0.2)), eps_s)
    def check(dv, eps):
        nom = NominalData(0.0, lam.with_values(lam.values + dv))
        P = RegretParams(eps=eps)
        js = regret.eval_Jstar(p.mesh0, st_, None, nom, P).Jeps
        assert js >= regret.eval_Jeps(p.mesh0, st_, None, nom, P).Jeps

    check()


def test_j_with_delta(coarse_problem):
    p = coarse_problem
    m = p.mesh0
    zero = fem.loop_trace(m, Label.SIGMA, 0.0)
    st_ = system.solve_state(m, p.f, p.g_d, p.target)
    assert regret.eval_J_with_delta(m, zero, p.target, p.f, p.g_d) == pytest.approx(
        regret.eval_Jtilde(m, st_), rel=1e-14)
    vals = []
    for i in experiments.I_RANGE:
        gd = experiments.make_gdelta(i, m)
        assert np.abs(gd.values).max() <= 0.2
        vals.append(regret.eval_J_with_delta(m, gd, p.target, p.f, p.g_d))
    assert int(np.sum(np.diff(vals) < 0)) <= 1


def test_objective_modes(coarse_problem):
    p = coarse_problem
    with pytest.raises(ConfigError):
        regret.Objective("bogus", p.f, p.g_d, p.target, RegretParams())
    with pytest.raises(ConfigError):
        regret.Objective("lowregret", p.f, p.g_d, p.target, RegretParams())
    with pytest.raises(ConfigError):
        regret.Objective("fixed_delta", p.f, p.g_d, p.target, RegretParams())
    ev = regret.Objective("nominal", p.f, p.g_d, p.target, RegretParams()).evaluate(p.mesh0)
    assert ev.value == ev.tracking and ev.gbar == 0.0


def test_gdelta_index_errors(coarse_mesh):
    for i in (0, 11, 2.5):
        with pytest.raises(IndexOutOfRange):
            experiments.make_gdelta(i, coarse_mesh)
    with pytest.raises(IndexError):
        experiments.make_gdelta(0, coarse_mesh)
