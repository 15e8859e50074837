import csv

import numpy as np
import pytest
import scipy.sparse as sp

from crossdiff import run, simulate
from crossdiff.errors import (
    InvalidArgument,
    LinearSolveFailure,
    NewtonDivergence,
    RunFailure,
    SnapshotMissing,
)
from crossdiff.field import SpeciesField, project_initial
from crossdiff.interaction import build_interaction
from crossdiff.mesh import build_interval_mesh, build_rect_mesh
from crossdiff.scheme import MeanFunction, ModelConfig, jacobian_euler, residual_euler
from crossdiff.solver import SolverConfig, TimeStepper, newton_solve, uniqueness_advisory

from conftest import desk

EXP1_A = [[2, 1, 0.5], [1, 3, 1.5], [0.5, 1.5, 1]]
EXP1_U0 = [lambda x: np.cos(np.pi * x) + 2, lambda x: 2 - np.cos(2 * np.pi * x), 2.0]


def exp1_model():
    return ModelConfig(0.5, build_interaction(EXP1_A), MeanFunction())


def test_newton_at_root_takes_no_iterations():
    mesh = build_interval_mesh(10)
    cfg = exp1_model()
    c = np.full((10, 3), 2.0)
    u, rep = newton_solve(lambda v: residual_euler(cfg, mesh, 0.1, v, c),
                          lambda v: jacobian_euler(cfg, mesh, 0.1, v), c)
    assert rep.iterations == 0
    np.testing.assert_array_equal(u.values, c)


def test_newton_euler_step_converges_quickly():
    mesh = build_interval_mesh(64)
    cfg = exp1_model()
    u0 = project_initial(mesh, EXP1_U0).values
    dt = 1 / 128
    u, rep = newton_solve(lambda v: residual_euler(cfg, mesh, dt, v, u0),
                          lambda v: jacobian_euler(cfg, mesh, dt, v), u0)
    assert rep.iterations <= 10
    assert np.abs(residual_euler(cfg, mesh, dt, u.values, u0)).max() <= 1e-12


def test_newton_zero_iterations_budget():
    mesh = build_interval_mesh(8)
    cfg = exp1_model()
    u0 = project_initial(mesh, EXP1_U0).values
    with pytest.raises(NewtonDivergence) as exc:
        newton_solve(lambda v: residual_euler(cfg, mesh, 0.1, v, u0 + 1),
                     lambda v: jacobian_euler(cfg, mesh, 0.1, v), u0,
                     SolverConfig(max_newton_iters=0))
    assert exc.value.iterations == 0
    np.testing.assert_array_equal(exc.value.best_iterate.values, u0)


def test_newton_singular_jacobian():
    with pytest.raises(LinearSolveFailure):
        newton_solve(lambda v: v - 1.0, lambda v: sp.csr_matrix((4, 4)), np.zeros((2, 2)))


def test_newton_scalar_quadratic():
    u, rep = newton_solve(lambda v: v**2 - 2.0, lambda v: sp.diags(2 * v.ravel()), np.ones((1, 1)))
    assert u.values[0, 0] == pytest.approx(np.sqrt(2), rel=1e-15)
    assert not rep.roundoff_limited


def test_constant_data_is_stationary():
    mesh = build_rect_mesh(4, 4)
    model = ModelConfig(0.5, build_interaction([[1, 0.5], [0.5, 1]]))
    u0 = SpeciesField.constant(mesh, [0.3, 0.9])
    traj = simulate(model, mesh, u0, 0.05, 4)
    for k in range(5):
        np.testing.assert_array_equal(traj.snapshots[k].values, u0.values)
    for d in traj.diagnostics[1:]:
        assert d.entropy_defect == 0 and d.dissipation == 0 and d.newton_iters == 0


def test_step_count():
    cfg = desk(1, T=3 / 128)
    assert cfg.n_steps == 3
    traj = run(cfg)
    assert traj.n_steps == 3 and len(traj.diagnostics) == 4
    assert traj.times[-1] == pytest.approx(3 / 128)


def test_stepper_rejects_bad_input():
    mesh = build_interval_mesh(4)
    with pytest.raises(InvalidArgument):
        TimeStepper(exp1_model(), mesh, 0.0, SpeciesField.constant(mesh, [1, 1, 1]))
    with pytest.raises(InvalidArgument):
        TimeStepper(exp1_model(), mesh, 0.1, SpeciesField.constant(mesh, [1, 1]))


def test_deterministic():
    cfg = desk(2, T=4 / 256)
    a, b = run(cfg), run(cfg)
    np.testing.assert_array_equal(a.final.values, b.final.values)


def test_run_failure_keeps_partial_trajectory():
    cfg = desk(1, T=3 / 128, max_newton_iters=1)
    with pytest.raises(RunFailure) as exc:
        run(cfg)
    traj = exc.value.trajectory
    assert traj.n_steps == 0 and 0 in traj.snapshots
    assert isinstance(exc.value.cause, NewtonDivergence)


def test_exp1_mass_each_step(exp1_short):
    for d in exp1_short.diagnostics:
        np.testing.assert_allclose(d.mass, 2.0, atol=1e-10)


def test_exp1_entropy_defect(exp1_short):
    assert all(d.entropy_defect <= d.tol_e for d in exp1_short.diagnostics[2:])
    assert exp1_short.entropy_violations() == []


def test_exp1_distance_trend(exp1_short):
    k, _ = exp1_short.snapshot_at(0.01)
    assert k == 1
    d = exp1_short.distances
    assert d[-1] < d[k]


def test_snapshot_missing(exp2_run):
    with pytest.raises(SnapshotMissing):
        exp2_run.snapshot_at(0.1)
    k, snap = exp2_run.snapshot_at(exp2_run.times[-1])
    assert k == exp2_run.n_steps


def test_diagnostics_csv(exp1_short, tmp_path):
    p = tmp_path / "d.csv"
    exp1_short.write_diagnostics_csv(p)
    rows = list(csv.reader(p.open()))
    assert rows[0] == ["k", "t_k", "H_pair", "dissipation", "entropy_defect",
                       "mass_1", "mass_2", "mass_3", "min_density", "newton_iters"]
    assert len(rows) == exp1_short.n_steps + 2


def test_uniqueness_gamma_zero():
    mesh = build_interval_mesh(16)
    rep = uniqueness_advisory(mesh, ModelConfig(0.0, build_interaction(np.eye(2))), 0.1, 1.0)
    assert rep.bound == 0 and rep.satisfied is None
    assert "unavailable" in rep.message


def test_uniqueness_small_dt_holds():
    mesh = build_interval_mesh(16)
    model = exp1_model()
    big = uniqueness_advisory(mesh, model, 1.0, 3.0, C_user=0.1)
    small = uniqueness_advisory(mesh, model, 1e-12, 3.0, C_user=0.1)
    assert not big.satisfied and small.satisfied


def test_uniqueness_exp1_ratio():
    mesh = build_interval_mesh(12800)
    model = exp1_model()
    A = model.A
    rep = uniqueness_advisory(mesh, model, 1 / 128, 4.0, C_user=1.0)
    assert rep.ratio == pytest.approx((1 / 128) / (1 / 12800) ** 3, rel=1e-12)
    assert rep.bound == pytest.approx(0.5 * A.lambda_min**2 / (A.lambda_max**2 * 4.0), rel=1e-12)
