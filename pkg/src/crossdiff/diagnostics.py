"""Post-hoc analyses: equilibrium, decay rates, temporal convergence order, uphill diffusion."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateFit, InvalidArgument, MisalignedHorizon
from .field import norm_0q, seminorm_1q, total_mass, weighted_field_norms
from .interaction import SQRT8
from .mesh import Mesh
from .scheme import ModelConfig
from .solver import Trajectory, run

_EPS = np.finfo(float).eps


def steady_state(mesh: Mesh, u0_field) -> np.ndarray:
    """Constant equilibrium ``ubar_i = mass_i / m(Omega)``."""
    return total_mass(mesh, u0_field) / mesh.domain_measure


@dataclass
class KappaBound:
    kappa: float
    rate_dt: float | None  # log(1 + kappa dt) / dt, increases to kappa as dt -> 0
    C_P: float


def kappa_bound(model: ModelConfig, mesh: Mesh, C_P: float = 1.0, dt: float | None = None) -> KappaBound:
    """Guaranteed decay rate ``4 gamma lambda_m zeta / ((3 + sqrt 8) C_P^2 lambda_M)``."""
    if not C_P > 0:
        raise InvalidArgument("C_P must be > 0")
    A = model.A
    kappa = 4.0 * model.gamma * A.lambda_min * mesh.zeta / ((3.0 + SQRT8) * C_P**2 * A.lambda_max)
    rate = None if dt is None else math.log1p(kappa * dt) / dt
    return KappaBound(kappa, rate, C_P)


@dataclass
class DecayReport:
    times: np.ndarray
    values: np.ndarray
    slope: float
    window: tuple
    kappa_bound: float
    envelope_rate: float  # -lambda_dt
    C_P: float

    def summary(self) -> str:
        return (f"fitted decay rate {self.slope:.6g} on t in [{self.window[0]:.4g}, {self.window[1]:.4g}]; "
                f"guaranteed envelope rate {self.envelope_rate:.6g} (kappa={self.kappa_bound:.6g}, "
                f"C_P={self.C_P:g})")

    def write_series_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "distance"])
            for t, v in zip(self.times, self.values):
                w.writerow([f"{t:.16e}", f"{v:.16e}"])


def fit_log_slope(times, values, window_fraction=0.2):
    """Least-squares slope of ``log(values)`` against ``times`` after dropping
    the leading ``window_fraction`` of the time horizon.  Returns ``(slope, (t_lo, t_hi))``."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if not 0 <= window_fraction < 1:
        raise InvalidArgument("window_fraction must lie in [0, 1)")
    t_lo = t[0] + window_fraction * (t[-1] - t[0])
    sel = t >= t_lo - 1e-12 * abs(t[-1])
    if sel.sum() < 2:
        raise DegenerateFit("fewer than two points in the fit window")
    if np.any(v[sel] <= 0):
        raise DegenerateFit("non-positive values in the fit window")
    slope = np.polyfit(t[sel], np.log(v[sel]), 1)[0]
    return float(slope), (float(t[sel][0]), float(t[sel][-1]))


def decay_fit(trajectory: Trajectory, window_fraction: float = 0.2, C_P: float = 1.0) -> DecayReport:
    """Fit the exponential rate of ``||A^{1/2}(u^k - ubar)||_{0,2}`` over the tail of a run."""
    if trajectory.n_steps < 10:
        raise InvalidArgument(f"need >= 10 steps, trajectory has {trajectory.n_steps}")
    t, v = trajectory.times, trajectory.distances
    mesh, model = trajectory.mesh, trajectory.model
    scale = weighted_field_norms(mesh, model.A, np.tile(trajectory.u_bar, (mesh.n_cells, 1)))[0]
    t_lo = t[0] + window_fraction * (t[-1] - t[0])
    if np.all(v[t >= t_lo] < 1e2 * _EPS * max(scale, _EPS)):
        raise DegenerateFit("run is already at steady state to rounding")
    slope, window = fit_log_slope(t, v, window_fraction)
    kb = kappa_bound(model, mesh, C_P, trajectory.dt)
    return DecayReport(t, v, slope, window, kb.kappa, -kb.rate_dt, C_P)


def decay_envelope(trajectory: Trajectory, C_P: float = 1.0):
    """Large-time bound ``sqrt 2 ||A^{1/2}(u^0-ubar)|| (1 + kappa dt)^{-(k-2)/4}`` for k >= 2.

    Returns ``(steps, values, bound, violating_steps)``; with an unvalidated
    ``C_P`` the violations are informational.
    """
    kb = kappa_bound(trajectory.model, trajectory.mesh, C_P, trajectory.dt)
    d = trajectory.distances
    k = np.arange(d.size)
    bound = math.sqrt(2.0) * d[0] * (1.0 + kb.kappa * trajectory.dt) ** (-(k - 2) / 4.0)
    mask = k >= 2
    viol = k[mask][d[mask] > bound[mask] * (1 + 1e-12)]
    return k[mask], d[mask], bound[mask], viol


def poincare_wirtinger_witness(mesh: Mesh, v, C_P: float = 1.0):
    """``(||v - mean||_{0,2}, C_P zeta^{-1/2} |v|_{1,2}, holds)`` for a scalar or vector field."""
    v = np.asarray(v, dtype=float)
    mean = total_mass(mesh, v) / mesh.domain_measure
    lhs = norm_0q(mesh, v - (mean if v.ndim == 2 else mean[0]), 2)
    rhs = C_P * mesh.zeta**-0.5 * seminorm_1q(mesh, v, 2)
    return lhs, rhs, bool(lhs <= rhs * (1 + 1e-12))


def entropy_audit(trajectory: Trajectory) -> dict:
    """Entropy-chain summary: the pair entropies for k >= 1 and their monotonicity."""
    diags = trajectory.diagnostics[1:]
    H = np.array([d.entropy_pair for d in diags])
    slack = np.array([d.tol_e for d in diags])
    increases = np.diff(H) - slack[1:] if H.size > 1 else np.zeros(0)
    return {
        "H_initial": trajectory.diagnostics[0].entropy_pair,
        "H_final": float(H[-1]) if H.size else float("nan"),
        "nonincreasing": bool(np.all(increases <= 0)),
        "max_defect_excess": float(max((d.entropy_defect - d.tol_e for d in diags), default=0.0)),
        "violations": [d.k for d in diags if not d.entropy_ok],
    }


def uphill_check(trajectory: Trajectory, species: int, u_bar_i: float, t_probe: float) -> float:
    """``max_K |u_{i,K}(t_probe) - ubar_i|`` at the stored snapshot nearest ``t_probe``."""
    _, snap = trajectory.snapshot_at(t_probe)
    return float(np.max(np.abs(snap.values[:, species] - u_bar_i)))


# ---------------------------------------------------------------- convergence study


@dataclass
class ConvergenceReport:
    dts: np.ndarray
    errors: np.ndarray
    pairwise_orders: np.ndarray
    global_order: float
    labels: tuple = ()

    @property
    def strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.errors) < 0))

    def summary(self) -> str:
        lines = [f"{'p':>3} {'dt':>14} {'error':>14} {'order':>8}"]
        for j, (dt, e) in enumerate(zip(self.dts, self.errors)):
            lab = self.labels[j] if self.labels else j
            order = f"{self.pairwise_orders[j - 1]:8.4f}" if j else " " * 8
            lines.append(f"{lab!s:>3} {dt:14.6e} {e:14.6e} {order}")
        lines.append(f"global observed order (least squares): {self.global_order:.4f}")
        return "\n".join(lines)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["p", "dt", "error", "pairwise_order"])
            for j, (dt, e) in enumerate(zip(self.dts, self.errors)):
                lab = self.labels[j] if self.labels else j
                order = f"{self.pairwise_orders[j - 1]:.16e}" if j else ""
                w.writerow([lab, f"{dt:.16e}", f"{e:.16e}", order])


def build_convergence_report(dts, errors, labels=()) -> ConvergenceReport:
    """Pairwise orders ``log(e_p / e_{p+1}) / log(dt_p / dt_{p+1})`` and the
    least-squares slope of ``log e`` against ``log dt``."""
    dts = np.asarray(dts, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if dts.size < 2 or dts.shape != errors.shape:
        raise InvalidArgument("need at least two (dt, error) pairs of equal length")
    with np.errstate(divide="ignore", invalid="ignore"):
        pairwise = np.log(errors[:-1] / errors[1:]) / np.log(dts[:-1] / dts[1:])
        global_order = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
    return ConvergenceReport(dts, errors, pairwise, global_order, tuple(labels))


def _final_state(cfg):
    return run(cfg).final.values


def study_time_steps(p_list, dt_base=0.1):
    return [dt_base / 2**p for p in p_list]


def convergence_study(base, p_list, p_ref, T, dt_base=0.1, workers=1) -> ConvergenceReport:
    """Temporal error at ``t = T`` for ``dt_p = dt_base 2^{-p}`` against a run with ``p_ref``.

    Errors are ``||A^{1/2}(u_p - u_ref)(T)||_{0,2}`` on the shared mesh of ``base``.
    """
    p_list = list(p_list)
    if not p_list:
        raise InvalidArgument("p_list is empty")
    if p_ref <= max(p_list):
        raise InvalidArgument("p_ref must exceed every entry of p_list")
    all_p = p_list + [p_ref]
    configs = []
    for p, dt in zip(all_p, study_time_steps(all_p, dt_base)):
        r = T / dt
        if abs(r - round(r)) > 1e-9 * r or round(r) < 1:
            raise MisalignedHorizon(f"T={T} is not an integer multiple of dt={dt} (p={p})")
        configs.append(replace(base, T=float(T), dt=None, steps=int(round(r)),
                               snapshot_stride=int(round(r))))
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            finals = list(pool.map(_final_state, configs))
    else:
        finals = [_final_state(c) for c in configs]
    model = base.model()
    mesh = base.build_mesh()
    ref = finals[-1]
    errors = [weighted_field_norms(mesh, model.A, u - ref)[0] for u in finals[:-1]]
    return build_convergence_report(study_time_steps(p_list, dt_base), errors, labels=p_list)


def default_workers():
    return os.cpu_count() or 1
