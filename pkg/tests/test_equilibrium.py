from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from accretion.backstrain import init_backstrain
from accretion.config import RunConfig
from accretion.constitutive import MaterialParams
from accretion.eikonal import solve_fmm
from accretion.equilibrium import (
    DeformationState,
    EnergyLedger,
    IncrementalProblem,
    InadmissibleState,
    NonconvergedStep,
    SolverOptions,
    dissipation_increment,
    el_residual,
    energy_parts,
    incremental_energy,
    minimize_step,
    operators,
    tangent,
)
from accretion.harness import fd_assembly_check

MP = MaterialParams(kappa=10.0, eps_H=1.0)
N_STEPS = 8


@pytest.fixture(scope="module")
def setup(grid33):
    th = solve_fmm(np.ones(grid33.shape), grid33).values
    tau = grid33.spec.T / N_STEPS
    bs = init_backstrain(np.eye(2), grid33, th, tau, N_STEPS)
    return grid33, th, tau, bs


def problem(setup, step=1, force=(0.0, 0.0), y_prev=None, mp=MP, A=None):
    g, th, tau, bs = setup
    y_prev = y_prev or DeformationState.identity(g)
    return IncrementalProblem(step, step * tau, tau, th, bs.A if A is None else A, y_prev, np.array(force), mp)


def random_state(grid, rng, amp=1e-3):
    ops = operators(grid)
    return DeformationState.identity(grid).with_free(amp * rng.normal(size=ops.n_free))


def test_identity_stationary(setup):
    g = setup[0]
    prob = problem(setup)
    v, grad = incremental_energy(DeformationState.identity(g), prob)
    assert v == pytest.approx(MP.c_J * g.spec.area, rel=1e-14)
    assert np.abs(grad).max() <= 1e-10
    assert el_residual(DeformationState.identity(g), prob) <= 1e-10


def test_gradient_matches_fd(grid33, rng):
    cfg = RunConfig(domain=grid33.spec, material=MP, nx=33, n_steps=N_STEPS)
    assert fd_assembly_check(cfg, rng, n_states=2, n_dofs=20) <= 1e-5


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_gradient_matches_fd_property(grid33, seed):
    rng = np.random.default_rng(seed)
    cfg = RunConfig(domain=grid33.spec, material=MP, nx=33, n_steps=N_STEPS)
    assert fd_assembly_check(cfg, rng, n_states=1, n_dofs=5) <= 1e-5


def test_tangent_matches_gradient_differences(setup, rng):
    g = setup[0]
    prev = random_state(g, rng)
    prob = problem(setup, step=3, force=(0.1, -0.3), y_prev=prev)
    st_ = random_state(g, rng)
    x = st_.free_vector()
    K = tangent(st_, prob)
    d = rng.normal(size=x.size)
    e = 1e-6
    gp = incremental_energy(prev.with_free(x + e * d), prob)[1]
    gm = incremental_energy(prev.with_free(x - e * d), prob)[1]
    num = (gp - gm) / (2 * e)
    assert np.abs(K @ d - num).max() <= 1e-5 * np.abs(num).max()


def test_cJ_scaling(setup, rng):
    g = setup[0]
    s = random_state(g, rng)
    a = energy_parts(s, problem(setup, force=(0, -0.1)))
    b = energy_parts(s, problem(setup, force=(0, -0.1), mp=replace(MP, c_J=2 * MP.c_J)))
    assert b.volumetric == pytest.approx(2 * a.volumetric, rel=1e-15)
    assert (b.elastic, b.second_grade, b.dissipation, b.work) == (a.elastic, a.second_grade, a.dissipation, a.work)


def test_inadmissible_state_raises(setup):
    g = setup[0]
    u = -2 * (g.coords - 0.5)
    u[g.fixed] = 0
    with pytest.raises(InadmissibleState, match="inadmissible state"):
        incremental_energy(DeformationState(g, u), problem(setup))


def test_identity_step_stays_put(setup):
    g = setup[0]
    y, row = minimize_step(problem(setup))
    assert np.abs(y.u).max() <= 1e-8
    assert row.iterations == 0


def test_forced_step(setup, rng):
    g = setup[0]
    prob = problem(setup, step=2, force=(0.0, -0.2))
    tol = 1e-7 * (MP.c_W + MP.q * MP.c_J)
    assert el_residual(prob.y_prev, prob) > tol
    y, row = minimize_step(prob)
    # load potential drops: the body sags along the force
    assert row.work < energy_parts(prob.y_prev, prob).work
    assert row.residual <= tol
    assert row.energy <= row.energy_prev
    assert np.all(y.u[g.fixed] == 0.0)
    # same local minimum from a perturbed start
    start = y.with_free(y.free_vector() + 1e-4 * rng.normal(size=operators(g).n_free))
    y2, row2 = minimize_step(prob, start=start)
    assert abs(row2.energy - row.energy) <= 1e-8


def test_nonconverged_step_reports_residual(setup):
    prob = problem(setup, step=2, force=(0.0, -0.2))
    with pytest.raises(NonconvergedStep) as ei:
        minimize_step(prob, SolverOptions(max_iter=1))
    assert ei.value.residual > 0
    assert ei.value.state is not None


def test_dissipation_increment(setup, rng):
    g, th, tau, _ = setup
    prev = random_state(g, rng)
    assert dissipation_increment(prev, prev, th, tau, tau, MP) == 0.0
    # rigid infinitesimal rotation of the previous state
    S = np.array([[0.0, 0.3], [-0.3, 0.0]])
    y = prev.y + tau * prev.y @ S.T
    rot = DeformationState(g, y - g.coords)
    assert dissipation_increment(rot, prev, th, tau, tau, MP) <= 1e-20
    other = random_state(g, rng)
    assert dissipation_increment(other, prev, th, tau, tau, MP) > 0


def test_ledger_accumulates(setup, tmp_path):
    g = setup[0]
    led = EnergyLedger()
    y = DeformationState.identity(g)
    for i in (1, 2, 3):
        y, row = minimize_step(problem(setup, step=i, force=(0.0, -0.1), y_prev=y))
        led.append(row)
    cum = led.as_array("cumulative_dissipation")
    assert np.allclose(cum, np.cumsum(led.as_array("dissipation")), rtol=0, atol=0)
    led.to_csv(tmp_path / "l.csv")
    d = np.genfromtxt(tmp_path / "l.csv", delimiter=",", names=True)
    assert list(d["step"]) == [1, 2, 3]
    assert led.summary()["minimality_holds"]


def test_unweighted_terms_ignore_phase(setup, rng):
    # V^J and H carry no phase weight: moving every node to the fictitious phase leaves them unchanged
    g, th, tau, bs = setup
    s = random_state(g, rng)
    a = energy_parts(s, problem(setup, step=1))
    late = IncrementalProblem(1, -1.0, tau, th, bs.A, DeformationState.identity(g), np.zeros(2), MP)
    b = energy_parts(s, late)
    assert (a.volumetric, a.second_grade) == (b.volumetric, b.second_grade)
    assert b.elastic != a.elastic
