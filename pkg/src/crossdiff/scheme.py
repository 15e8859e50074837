"""Two-point numerical fluxes and the nonlinear residuals of the Euler and BDF2 steps.

Unknowns are ordered cell-major: entry ``K * n + i`` is species ``i`` in cell
``K``, so the Jacobian is made of ``n x n`` blocks coupling each cell to
itself and to its edge neighbours.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument
from .field import _vals
from .interaction import InteractionMatrix
from .mesh import Edge, Mesh

BDF2_WEIGHTS = (1.5, -2.0, 0.5)
EULER_WEIGHTS = (1.0, -1.0)


@dataclass(frozen=True)
class MeanFunction:
    """Edge mobility ``M(u, v)``: ``arithmetic`` ((u+v)/2) or ``maximum``."""

    variant: str = "arithmetic"
    lipschitz_constant: float = 1.0

    def __post_init__(self):
        if self.variant not in ("arithmetic", "maximum"):
            raise InvalidArgument(f"unknown mean function {self.variant!r}")

    def __call__(self, u, v):
        if self.variant == "arithmetic":
            return 0.5 * (np.asarray(u) + np.asarray(v))
        return np.maximum(u, v)

    def partials(self, u, v):
        """``(dM/du, dM/dv)``; the maximum splits 1/2-1/2 on ties."""
        u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
        if self.variant == "arithmetic":
            h = np.full(np.broadcast(u, v).shape, 0.5)
            return h, h.copy()
        du = np.where(u > v, 1.0, np.where(u < v, 0.0, 0.5))
        return du, 1.0 - du


@dataclass(frozen=True)
class ModelConfig:
    gamma: float
    A: InteractionMatrix
    mean: MeanFunction = MeanFunction()

    def __post_init__(self):
        if not self.gamma >= 0:
            raise InvalidArgument(f"gamma must be >= 0, got {self.gamma}")

    @property
    def n(self) -> int:
        return self.A.n

    def pressure(self, u):
        return np.asarray(u) @ self.A.entries


def mobility(mean: MeanFunction, uK, uL):
    return mean(uK, uL)


def numerical_flux(config: ModelConfig, edge: Edge, uK, uL, i=None):
    """Flux ``F_{i,K,sigma}`` leaving ``K`` through ``edge``.

    Returns the n-vector over species, or species ``i`` only.  Boundary edges
    carry zero flux.
    """
    uK = np.asarray(uK, dtype=float)
    uL = np.asarray(uL, dtype=float)
    if not edge.interior:
        F = np.zeros(config.n)
    else:
        F = _flux(config, edge.transmissibility, uK, uL)
    return F if i is None else float(F[i])


def _flux(config, tau, uK, uL):
    du = uL - uK
    dp = du @ config.A.entries
    mob = np.maximum(config.mean(uK, uL), 0.0)
    return -np.asarray(tau)[..., None] * (config.gamma * du + mob * dp)


def edge_fluxes(config: ModelConfig, mesh: Mesh, u) -> np.ndarray:
    """Fluxes from ``K`` to ``L`` on every interior edge, shape ``(n_interior, n)``."""
    v = _vals(u)
    return _flux(config, mesh.transmissibility, v[mesh.edge_K], v[mesh.edge_L])


def spatial_operator(config: ModelConfig, mesh: Mesh, u) -> np.ndarray:
    """``sum_{sigma in E_K} F_{i,K,sigma}`` per cell, shape ``(n_cells, n)``.

    Edge-major accumulation in a fixed order; each edge adds ``+F`` to ``K``
    and ``-F`` to ``L``.
    """
    v = _vals(u)
    F = edge_fluxes(config, mesh, v)
    out = np.zeros_like(v)
    np.add.at(out, mesh.edge_K, F)
    np.add.at(out, mesh.edge_L, -F)
    return out


def _time_term(mesh, dt, comb):
    return (mesh.measures / dt)[:, None] * comb


def residual_euler(config: ModelConfig, mesh: Mesh, dt: float, u1, u0) -> np.ndarray:
    u1 = _vals(u1)
    return _time_term(mesh, dt, u1 - _vals(u0)) + spatial_operator(config, mesh, u1)


def residual_bdf2(config: ModelConfig, mesh: Mesh, dt: float, uk, ukm1, ukm2) -> np.ndarray:
    uk, ukm1 = _vals(uk), _vals(ukm1)
    # 3/2 uk - 2 ukm1 + 1/2 ukm2 in difference form: exact zero on repeated states
    comb = 1.5 * (uk - ukm1) - 0.5 * (ukm1 - _vals(ukm2))
    return _time_term(mesh, dt, comb) + spatial_operator(config, mesh, uk)


def spatial_jacobian(config: ModelConfig, mesh: Mesh, u) -> sp.csr_matrix:
    """Analytic Jacobian of :func:`spatial_operator`.

    The derivative of the positive part is taken as 1 for positive mobility
    and 0 otherwise (including exactly 0).
    """
    v = _vals(u)
    n = v.shape[1]
    A = config.A.entries
    tau = mesh.transmissibility
    K, L = mesh.edge_K, mesh.edge_L
    uK, uL = v[K], v[L]
    dp = (uL - uK) @ A
    raw = config.mean(uK, uL)
    mob = np.maximum(raw, 0.0)
    active = (raw > 0).astype(float)
    dMK, dML = config.mean.partials(uK, uL)

    eye = np.eye(n)
    # dF/du_L and dF/du_K, blocks of shape (E, n, n)
    base = config.gamma * eye[None] + mob[:, :, None] * A[None]
    dF_dL = -tau[:, None, None] * (base + (active * dML * dp)[:, :, None] * eye[None])
    dF_dK = -tau[:, None, None] * (-base + (active * dMK * dp)[:, :, None] * eye[None])

    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()

    def blocks(rowcell, colcell):
        return (rowcell[:, None] * n + ii[None]).ravel(), (colcell[:, None] * n + jj[None]).ravel()

    rows, cols, vals = [], [], []
    for rc, cc, B in ((K, K, dF_dK), (K, L, dF_dL), (L, K, -dF_dK), (L, L, -dF_dL)):
        r, c = blocks(rc, cc)
        rows.append(r)
        cols.append(c)
        vals.append(B.reshape(len(rc), -1).ravel())
    N = mesh.n_cells * n
    J = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(N, N))
    return J.tocsr()


def _time_diag(mesh, dt, coeff, n):
    return sp.diags(np.repeat(coeff * mesh.measures / dt, n))


def jacobian_euler(config: ModelConfig, mesh: Mesh, dt: float, u1, u0=None) -> sp.csr_matrix:
    v = _vals(u1)
    return (_time_diag(mesh, dt, EULER_WEIGHTS[0], v.shape[1])
            + spatial_jacobian(config, mesh, v)).tocsr()


def jacobian_bdf2(config: ModelConfig, mesh: Mesh, dt: float, uk, ukm1=None, ukm2=None) -> sp.csr_matrix:
    """Jacobian of :func:`residual_bdf2` with respect to ``uk``."""
    v = _vals(uk)
    return (_time_diag(mesh, dt, BDF2_WEIGHTS[0], v.shape[1])
            + spatial_jacobian(config, mesh, v)).tocsr()
