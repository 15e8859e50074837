"""Acceptance suite: one or more tests per criterion, tagged ``criterion(n)``.

The terminal summary (see conftest) prints one PASS/FAIL line per criterion.
"""

import time

import numpy as np
import pytest

from crossdiff import run
from crossdiff.config import from_mapping, preset
from crossdiff.diagnostics import convergence_study, decay_fit, uphill_check
from crossdiff.field import norm_0q, norm_1q, seminorm_1q
from crossdiff.interaction import bdf2_identity_parts, entropy_density, entropy_sandwich_bounds, weighted_norm_sq
from crossdiff.mesh import build_graded_interval_mesh, build_rect_mesh
from crossdiff.scheme import (
    MeanFunction,
    ModelConfig,
    jacobian_bdf2,
    residual_bdf2,
    spatial_jacobian,
    spatial_operator,
)

from conftest import desk
from oracles import fd_jacobian, random_spd

criterion = pytest.mark.criterion

# tolerances
IDENTITY_RTOL = 1e-12
MASS_TOL = 1e-10
STEADY_TOL = 1e-2
DECAY_TARGETS = {5.0: -4.37, 4.01: -1.03}
DECAY_RTOL = 0.10
ORDER_RANGE = (1.7, 2.3)
UPHILL_FLOOR = 1e-3
JACOBIAN_RTOL = 1e-6
NEG_FAIL = -1e-6
CASES = 10_000


@criterion(1)
def test_c1_bdf2_identity():
    g = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    total = 0
    for n in (1, 2, 3, 5):
        for _ in range(1000):
            A = random_spd(g, n, 1e-2, 1e2)
            scale = 10.0 ** g.uniform(-3, 3)
            u, v, w = (scale * g.normal(size=(25, n)) for _ in range(3))
            lhs, ediff, rem = bdf2_identity_parts(A, u, v, w)
            size = A.lambda_max * ((u * u).sum(1) + (v * v).sum(1) + (w * w).sum(1))
            worst = max(worst, float(np.max(np.abs(lhs - ediff - rem) / size)))
            total += u.shape[0]
    elapsed = time.perf_counter() - start
    print(f"\n[c1] {total} cases, worst relative defect {worst:.2e}, {elapsed:.2f} s")
    assert total == 100_000
    assert worst <= IDENTITY_RTOL
    assert elapsed < 5.0


@criterion(2)
def test_c2_entropy_dissipation():
    start = time.perf_counter()
    traj = run(desk(1))
    elapsed = time.perf_counter() - start
    diags = traj.diagnostics[1:]
    excess = max(d.entropy_defect - d.tol_e for d in diags)
    H = np.array([d.entropy_pair for d in diags])
    print(f"\n[c2] {len(diags)} steps, max defect - slack {excess:.2e}, "
          f"max increase of H {np.max(np.diff(H)):.2e}, {elapsed:.1f} s")
    assert all(d.entropy_defect <= d.tol_e for d in diags)
    assert np.all(np.diff(H) <= 0)
    assert elapsed < 120


@criterion(3)
def test_c3_mass_conservation(exp1_short, exp2_run):
    for traj, target in ((exp1_short, [2.0, 2.0, 2.0]), (exp2_run, [0.25, 0.25])):
        masses = np.array([d.mass for d in traj.diagnostics])
        drift = float(np.max(np.abs(masses - target)))
        print(f"\n[c3] {traj.config.name}: max mass drift {drift:.2e}")
        assert drift <= MASS_TOL


@criterion(4)
def test_c4_steady_state(exp1_long):
    assert exp1_long.times[-1] == pytest.approx(0.5)
    dev = float(np.max(np.abs(exp1_long.final.values - 2.0)))
    d = exp1_long.distances
    slack = np.array([x.tol_e for x in exp1_long.diagnostics])
    rises = [k for k in range(2, len(d) - 1) if d[k + 1] > d[k] + slack[k + 1]]
    print(f"\n[c4] max |u - 2| at t=0.5: {dev:.2e}; distance {d[0]:.3e} -> {d[-1]:.3e}")
    assert dev < STEADY_TOL
    assert rises == []


@criterion(5)
@pytest.mark.parametrize("beta", sorted(DECAY_TARGETS))
def test_c5_decay_rate(beta):
    cfg = from_mapping(preset(3, "desk", beta))
    start = time.perf_counter()
    rep = decay_fit(run(cfg), cfg.window_fraction, cfg.C_P)
    elapsed = time.perf_counter() - start
    target = DECAY_TARGETS[beta]
    print(f"\n[c5] beta={beta}: fitted slope {rep.slope:.4f} (target {target}), {elapsed:.1f} s")
    assert abs(rep.slope - target) <= DECAY_RTOL * abs(target)
    assert elapsed < 300


@criterion(6)
def test_c6_temporal_order():
    start = time.perf_counter()
    reports = {}
    for beta in (5.0, 4.0):
        cfg = from_mapping(preset(4, "desk", beta))
        assert cfg.gamma == 0 and cfg.mesh_n == (128,) and cfg.T == 0.02
        reports[beta] = convergence_study(cfg, cfg.p_list, cfg.p_ref, cfg.T, cfg.dt_base)
    elapsed = time.perf_counter() - start
    for beta, rep in reports.items():
        orders = " ".join(f"{o:.3f}" for o in rep.pairwise_orders)
        print(f"\n[c6] beta={beta}: global order {rep.global_order:.4f}, pairwise {orders}, "
              f"decreasing={rep.strictly_decreasing}")
    assert elapsed < 600
    for rep in reports.values():
        assert rep.strictly_decreasing
        assert ORDER_RANGE[0] <= rep.global_order <= ORDER_RANGE[1]


@criterion(7)
def test_c7_uphill(exp1_short):
    early = uphill_check(exp1_short, 2, 2.0, 0.01)
    late = uphill_check(exp1_short, 2, 2.0, 0.1)
    print(f"\n[c7] species 3 deviation: t=0.01 {early:.3e}, t=0.1 {late:.3e}")
    assert early > UPHILL_FLOOR
    assert late < early


@criterion(8)
@pytest.mark.parametrize("dim", [1, 2])
def test_c8_jacobian(dim):
    g = np.random.default_rng(8 + dim)
    worst = 0.0
    for case in range(100):
        n = 1 + case % 3
        if dim == 1:
            mesh = build_graded_interval_mesh(np.cumsum(np.r_[0, g.uniform(0.2, 1, 6)]))
        else:
            mesh = build_rect_mesh(3, 3, (0, g.uniform(0.5, 2), 0, g.uniform(0.5, 2)))
        mean = MeanFunction("maximum" if case % 2 else "arithmetic")
        cfg = ModelConfig(float(g.uniform(0, 1)), random_spd(g, n), mean)
        u = g.uniform(0.1, 3, size=(mesh.n_cells, n))
        prev, prev2 = g.uniform(0.1, 3, size=u.shape), g.uniform(0.1, 3, size=u.shape)
        dt = float(g.uniform(1e-3, 1e-1))
        for J, fun in ((spatial_jacobian(cfg, mesh, u), lambda v: spatial_operator(cfg, mesh, v)),
                       (jacobian_bdf2(cfg, mesh, dt, u), lambda v: residual_bdf2(cfg, mesh, dt, v, prev, prev2))):
            J = J.toarray()
            err = np.max(np.abs(J - fd_jacobian(fun, u))) / np.max(np.abs(J))
            worst = max(worst, err)
    print(f"\n[c8] {dim}D: worst relative Jacobian mismatch {worst:.2e}")
    assert worst <= JACOBIAN_RTOL


def _random_mesh(g):
    if g.random() < 0.5:
        return build_graded_interval_mesh(np.cumsum(np.r_[g.uniform(-1, 1), g.uniform(0.05, 1, g.integers(2, 12))]))
    return build_rect_mesh(int(g.integers(2, 5)), int(g.integers(2, 5)),
                           (0, g.uniform(0.2, 3), 0, g.uniform(0.2, 3)))


@criterion(9)
def test_c9_flux_conservation_and_ibp():
    g = np.random.default_rng(91)
    failures = 0
    for _ in range(CASES):
        mesh = _random_mesh(g)
        n = int(g.integers(1, 4))
        cfg = ModelConfig(float(g.uniform(0, 2)), random_spd(g, n, 0.05, 20),
                          MeanFunction("maximum" if g.random() < 0.5 else "arithmetic"))
        u = g.uniform(-0.5, 3, size=(mesh.n_cells, n))
        S = spatial_operator(cfg, mesh, u)
        mag = float(np.abs(S).sum()) + 1e-300
        if np.abs(S.sum(axis=0)).max() > 1e-13 * mag:
            failures += 1
        # sum_K S_K . p(u_K) = sum_sigma tau (gamma Du.A Du + M+ |A Du|^2) >= gamma |A^1/2 u|_1,2^2
        du = mesh.diff(u)
        Adu = du @ cfg.A.entries
        mob = np.maximum(cfg.mean(u[mesh.edge_K], u[mesh.edge_L]), 0.0)
        quad = np.sum(du * Adu, axis=1)
        rhs = float(np.sum(mesh.transmissibility * (cfg.gamma * quad + np.sum(mob * Adu * Adu, axis=1))))
        lhs = float(np.sum(S * cfg.pressure(u)))
        diss = cfg.gamma * float(np.sum(mesh.transmissibility * quad))
        size = float(np.sum(np.abs(S * cfg.pressure(u)))) + 1e-300
        if abs(lhs - rhs) > 1e-12 * size or lhs < diss - 1e-12 * size:
            failures += 1
    assert failures == 0


@criterion(9)
def test_c9_mesh_identities():
    g = np.random.default_rng(92)
    failures = 0
    for _ in range(CASES):
        m = _random_mesh(g)
        seg = m.centers[m.edge_L] - m.centers[m.edge_K]
        ok = np.allclose(seg, m.edge_distance[:, None] * m.edge_normal, rtol=0, atol=1e-12)
        ok &= np.allclose(m.dist_K_face + m.dist_L_face, m.edge_distance, rtol=1e-12, atol=0)
        part = np.zeros(m.n_cells)
        np.add.at(part, m.edge_K, m.edge_measure * m.dist_K_face / m.dimension)
        np.add.at(part, m.edge_L, m.edge_measure * m.dist_L_face / m.dimension)
        np.add.at(part, m.bnd_K, m.triangle_measure)
        ok &= np.allclose(part, m.measures, rtol=1e-12, atol=0)
        ok &= abs(m.diamond_measure.sum() + m.triangle_measure.sum() - m.domain_measure) <= 1e-12 * m.domain_measure
        acc = np.zeros(m.n_cells)
        np.add.at(acc, m.edge_K, m.edge_measure * m.edge_distance)
        np.add.at(acc, m.edge_L, m.edge_measure * m.edge_distance)
        ok &= bool(np.all(acc <= 2 / m.zeta * m.measures * (1 + 1e-12)))
        failures += not ok
    assert failures == 0


@criterion(9)
def test_c9_norm_homogeneity():
    g = np.random.default_rng(93)
    failures = 0
    for _ in range(CASES):
        m = _random_mesh(g)
        v = g.normal(size=m.n_cells) * 10.0 ** g.uniform(-3, 3)
        alpha = float(g.normal() * 10.0 ** g.uniform(-3, 3))
        q = float(g.choice([1.0, 1.5, 2.0, 4.0, np.inf]))
        for f in (norm_0q, seminorm_1q, norm_1q):
            a, b = f(m, alpha * v, q), abs(alpha) * f(m, v, q)
            failures += abs(a - b) > 1e-12 * max(a, b)
    assert failures == 0


@criterion(9)
def test_c9_entropy_sandwich():
    g = np.random.default_rng(94)
    failures = 0
    for _ in range(CASES):
        n = int(g.integers(1, 6))
        A = random_spd(g, n, 1e-2, 1e2)
        u, v = g.normal(size=n), g.normal(size=n)
        if g.random() < 0.1:
            v = u.copy()
        h = entropy_density(A, u, v)
        lo, hi = entropy_sandwich_bounds(A, u, v)
        tol = 1e-13 * (weighted_norm_sq(A, u) + weighted_norm_sq(A, v))
        failures += not (lo - tol <= h <= hi + tol)
    assert failures == 0


@criterion(9)
@pytest.mark.parametrize("variant", ["arithmetic", "maximum"])
def test_c9_mean_axioms(variant):
    g = np.random.default_rng(95)
    M = MeanFunction(variant)
    L = M.lipschitz_constant
    u, v, u2, v2 = (g.uniform(-10, 10, CASES) for _ in range(4))
    failures = 0
    failures += int(np.sum(M(u, u) != u))  # consistency
    failures += int(np.sum(M(u, v) != M(v, u)))  # symmetry
    lip = np.abs(M(u, v) - M(u2, v2)) > L * np.maximum(np.abs(u - u2), np.abs(v - v2)) * (1 + 1e-15)
    failures += int(np.sum(lip))
    failures += int(np.sum(np.abs(M(u, v)) > np.abs(u) + np.abs(v)))  # linear growth
    failures += int(np.sum((M(u, v) < np.minimum(u, v)) | (M(u, v) > np.maximum(u, v))))
    assert failures == 0


@criterion(10)
def test_c10_nonnegativity(exp1_short, exp1_long, exp2_run):
    for traj in (exp1_short, exp1_long, exp2_run):
        lowest = min(d.min_density for d in traj.diagnostics)
        strict = lowest >= -10 * traj.config.newton_tol
        print(f"\n[c10] {traj.config.name} T={traj.config.T}: min density {lowest:.3e} "
              f"(>= -10*newton_tol: {'yes' if strict else 'no'})")
        assert lowest >= NEG_FAIL
