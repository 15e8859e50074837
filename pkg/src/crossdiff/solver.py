"""Damped Newton solves and the Euler-start / BDF2 time-marching driver."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .errors import InvalidArgument, LinearSolveFailure, NewtonDivergence, RunFailure, SnapshotMissing
from .field import (SpeciesField, norm_0q, rao_entropy_pair, total_mass, weighted_field_norms,
                    weighted_h1_seminorm_sq)
from .mesh import Mesh
from .scheme import ModelConfig, jacobian_bdf2, jacobian_euler, residual_bdf2, residual_euler

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-12
    max_newton_iters: int = 50
    max_halvings: int = 30
    armijo: float = 1e-4

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise InvalidArgument("newton_tol must be > 0")
        if self.max_newton_iters < 0:
            raise InvalidArgument("max_newton_iters must be >= 0")


@dataclass
class NewtonReport:
    iterations: int
    residual_norm: float
    halvings: int = 0
    roundoff_limited: bool = False


def newton_solve(residual, jacobian, initial_guess, cfg: SolverConfig = SolverConfig()):
    """Solve ``residual(u) = 0`` by Newton's method with backtracking.

    ``residual`` maps an ``(n_cells, n)`` array to an array of the same shape,
    ``jacobian`` maps it to a sparse matrix on the flattened (cell-major)
    unknowns.  A step is accepted when the Euclidean residual norm decreases
    by the Armijo factor; otherwise it is halved, at most ``max_halvings``
    times.  Convergence is ``max |R| <= newton_tol``.

    On fine meshes the residual of the best representable state can exceed
    ``newton_tol`` (flux terms scale with the transmissibility).  An iterate
    whose residual is below the rounding floor ``8 eps max(|J| |u|)`` is
    therefore also accepted once Newton stagnates there (a step fails to halve
    the residual), with ``roundoff_limited`` set in the report.

    Returns ``(state, NewtonReport)``.
    """
    u = np.array(initial_guess.values if isinstance(initial_guess, SpeciesField) else initial_guess,
                 dtype=float)
    shape = u.shape
    R = residual(u)
    rn = float(np.max(np.abs(R)))
    best_u, best_rn = u.copy(), rn
    total_halvings = 0
    it = 0
    stalled = False
    while rn > cfg.newton_tol:
        if it >= cfg.max_newton_iters:
            raise NewtonDivergence(f"no convergence after {it} iterations (|R|={rn:.3e})",
                                   SpeciesField(best_u), best_rn, it)
        J = jacobian(u).tocsc()
        floor = 8 * _EPS * float(np.max(abs(J) @ np.abs(u.ravel())))
        if stalled and rn <= floor:
            return SpeciesField(u), NewtonReport(it, rn, total_halvings, roundoff_limited=True)
        try:
            delta = spla.splu(J).solve(-R.ravel()).reshape(shape)
        except RuntimeError as exc:
            raise LinearSolveFailure(f"singular Jacobian at iteration {it}: {exc}") from exc
        if not np.all(np.isfinite(delta)):
            raise LinearSolveFailure(f"non-finite Newton correction at iteration {it}")
        it += 1

        phi0 = float(np.linalg.norm(R))
        lam = 1.0
        for h in range(cfg.max_halvings + 1):
            un = u + lam * delta
            Rn = residual(un)
            phin = float(np.linalg.norm(Rn))
            if np.isfinite(phin) and phin <= (1.0 - cfg.armijo * lam) * phi0:
                break
            lam *= 0.5
        else:
            if rn <= floor:
                return SpeciesField(u), NewtonReport(it, rn, total_halvings, roundoff_limited=True)
            raise NewtonDivergence(f"line search failed at iteration {it} (|R|={rn:.3e})",
                                   SpeciesField(best_u), best_rn, it)
        total_halvings += h
        u, R = un, Rn
        rn_old, rn = rn, float(np.max(np.abs(R)))
        stalled = rn > 0.5 * rn_old
        if rn < best_rn:
            best_u, best_rn = u.copy(), rn
    return SpeciesField(u), NewtonReport(it, rn, total_halvings)


@dataclass
class StepDiagnostics:
    k: int
    t: float
    entropy_pair: float
    dissipation: float
    entropy_defect: float
    tol_e: float
    mass: np.ndarray
    min_density: float
    newton_iters: int
    residual_norm: float
    distance: float  # ||A^{1/2}(u^k - ubar)||_{0,2}

    @property
    def entropy_ok(self) -> bool:
        return self.entropy_defect <= self.tol_e


class TimeStepper:
    """Owns the two-level history and advances one step at a time.

    Step 1 is implicit Euler (predictor ``u^0``); later steps are BDF2 with the
    linear-extrapolation predictor ``2 u^{k-1} - u^{k-2}``.
    """

    def __init__(self, model: ModelConfig, mesh: Mesh, dt: float, u0: SpeciesField,
                 solver: SolverConfig = SolverConfig()):
        if not dt > 0:
            raise InvalidArgument(f"dt must be > 0, got {dt}")
        if u0.n != model.n or u0.n_cells != mesh.n_cells:
            raise InvalidArgument("initial field does not match model/mesh")
        self.model, self.mesh, self.dt, self.solver = model, mesh, float(dt), solver
        self.k = 0
        self.current = u0
        self.previous = None
        self.mass0 = total_mass(mesh, u0)
        self.u_bar = self.mass0 / mesh.domain_measure
        self._H_prev_pair = rao_entropy_pair(mesh, model.A, u0, u0)

    def initial_diagnostics(self) -> StepDiagnostics:
        u = self.current
        return StepDiagnostics(0, 0.0, self._H_prev_pair, 0.0, 0.0, 0.0, self.mass0.copy(),
                               float(u.values.min()), 0, 0.0, self._distance(u))

    def _distance(self, u):
        return weighted_field_norms(self.mesh, self.model.A, u.values - self.u_bar)[0]

    def advance(self):
        model, mesh, dt = self.model, self.mesh, self.dt
        A = model.A
        if self.k == 0:
            u0 = self.current.values
            res = lambda u: residual_euler(model, mesh, dt, u, u0)  # noqa: E731
            jac = lambda u: jacobian_euler(model, mesh, dt, u)  # noqa: E731
            guess = u0
        else:
            u1, u2 = self.current.values, self.previous.values
            res = lambda u: residual_bdf2(model, mesh, dt, u, u1, u2)  # noqa: E731
            jac = lambda u: jacobian_bdf2(model, mesh, dt, u)  # noqa: E731
            guess = 2.0 * u1 - u2
        new, rep = newton_solve(res, jac, guess, self.solver)
        if not new.is_finite():
            raise NewtonDivergence("non-finite state", new, rep.residual_norm, rep.iterations)

        k = self.k + 1
        dissipation = model.gamma * dt * weighted_h1_seminorm_sq(mesh, A, new)
        H_pair = rao_entropy_pair(mesh, A, new, self.current)
        if k == 1:
            defect = rao_entropy_pair(mesh, A, new, new) + dissipation - self._H_prev_pair
        else:
            defect = H_pair + dissipation - self._H_prev_pair
        p_l1 = norm_0q(mesh, np.abs(model.pressure(new.values)).sum(axis=1), 1)
        tol_e = 10.0 * self.solver.newton_tol * (1.0 + p_l1)
        diag = StepDiagnostics(k, k * dt, H_pair, dissipation, defect, tol_e,
                               total_mass(mesh, new), float(new.values.min()),
                               rep.iterations, rep.residual_norm, self._distance(new))
        if not diag.entropy_ok:
            log.warning("step %d: entropy defect %.3e exceeds slack %.3e", k, defect, tol_e)
        self.previous, self.current = self.current, new
        self._H_prev_pair = H_pair
        self.k = k
        return new, diag


@dataclass
class Trajectory:
    mesh: Mesh
    model: ModelConfig
    dt: float
    u_bar: np.ndarray
    snapshots: dict = field(default_factory=dict)  # step -> SpeciesField
    diagnostics: list = field(default_factory=list)  # index = step
    config: object = None

    @property
    def n_steps(self) -> int:
        return len(self.diagnostics) - 1

    @property
    def times(self) -> np.ndarray:
        return np.array([d.t for d in self.diagnostics])

    @property
    def distances(self) -> np.ndarray:
        return np.array([d.distance for d in self.diagnostics])

    @property
    def final(self) -> SpeciesField:
        return self.snapshots[max(self.snapshots)]

    def entropy_violations(self):
        return [d for d in self.diagnostics[1:] if not d.entropy_ok]

    def snapshot_at(self, t: float) -> tuple:
        """Stored snapshot whose time is nearest ``t`` (within half a step)."""
        if not self.snapshots:
            raise SnapshotMissing(f"no snapshots stored")
        k = min(self.snapshots, key=lambda j: abs(j * self.dt - t))
        if abs(k * self.dt - t) > 0.5 * self.dt * (1 + 1e-9):
            raise SnapshotMissing(f"no snapshot within half a step of t={t}")
        return k, self.snapshots[k]

    def write_diagnostics_csv(self, path):
        n = self.model.n
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "t_k", "H_pair", "dissipation", "entropy_defect",
                        *(f"mass_{i + 1}" for i in range(n)), "min_density", "newton_iters"])
            for d in self.diagnostics:
                w.writerow([d.k, f"{d.t:.16e}", f"{d.entropy_pair:.16e}", f"{d.dissipation:.16e}",
                            f"{d.entropy_defect:.16e}", *(f"{m:.16e}" for m in d.mass),
                            f"{d.min_density:.16e}", d.newton_iters])


def simulate(model: ModelConfig, mesh: Mesh, u0: SpeciesField, dt: float, n_steps: int,
             solver: SolverConfig = SolverConfig(), snapshot_stride: int = 1,
             config=None) -> Trajectory:
    """March ``n_steps`` steps; snapshots every ``snapshot_stride`` steps plus the last."""
    if int(n_steps) != n_steps or n_steps < 1:
        raise InvalidArgument(f"n_steps must be a positive integer, got {n_steps}")
    if snapshot_stride < 1:
        raise InvalidArgument("snapshot_stride must be >= 1")
    stepper = TimeStepper(model, mesh, dt, u0, solver)
    traj = Trajectory(mesh, model, float(dt), stepper.u_bar, config=config)
    traj.snapshots[0] = u0
    traj.diagnostics.append(stepper.initial_diagnostics())
    for k in range(1, int(n_steps) + 1):
        try:
            u, diag = stepper.advance()
        except (NewtonDivergence, LinearSolveFailure) as exc:
            traj.snapshots[stepper.k] = stepper.current
            raise RunFailure(f"step {k} failed: {exc}", traj, exc) from exc
        traj.diagnostics.append(diag)
        if k % snapshot_stride == 0 or k == n_steps:
            traj.snapshots[k] = u
    return traj


def run(run_config) -> Trajectory:
    """Run a :class:`~crossdiff.config.RunConfig` to its horizon."""
    model, mesh, u0 = run_config.build()
    return simulate(model, mesh, u0, run_config.time_step, run_config.n_steps,
                    run_config.solver_config(), run_config.snapshot_stride, config=run_config)


@dataclass
class UniquenessReport:
    ratio: float
    bound: float
    satisfied: bool | None
    message: str


def uniqueness_advisory(mesh: Mesh, model: ModelConfig, dt: float, H0: float,
                        C_user: float = 1.0) -> UniquenessReport:
    """Compare ``dt / dx^(d+2)`` with ``C gamma lambda_m^2 / (lambda_M^2 L^2 H0)``.

    ``C_user`` stands in for the mesh-dependent constant, whose value is not
    known; the result is advisory only.
    """
    r = dt / mesh.dx ** (mesh.dimension + 2)
    A, L = model.A, model.mean.lipschitz_constant
    if model.gamma <= 0:
        return UniquenessReport(r, 0.0, None, "uniqueness condition unavailable (gamma=0)")
    if H0 <= 0:
        return UniquenessReport(r, math.inf, True, "H(u0) = 0: trivial initial data")
    b = C_user * model.gamma * A.lambda_min**2 / (A.lambda_max**2 * L**2 * H0)
    ok = r < b
    verdict = "holds" if ok else "not satisfied"
    return UniquenessReport(r, b, ok, f"dt/dx^(d+2) = {r:.6g} vs bound {b:.6g} (C={C_user:g}): {verdict}")
