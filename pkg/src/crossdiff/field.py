"""Piecewise-constant multi-species fields, discrete norms, mass and entropy."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EvaluationFailure, InvalidArgument
from .interaction import InteractionMatrix, entropy_density
from .mesh import Mesh

_GL_NODES = np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
_GL_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 9.0


@dataclass(frozen=True, eq=False)
class SpeciesField:
    """Cell values ``u_{i,K}`` stored as an ``(n_cells, n)`` array."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise DimensionMismatch(f"field values must be 2D (cells, species), got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def n_cells(self) -> int:
        return self.values.shape[0]

    def species(self, i: int) -> np.ndarray:
        return self.values[:, i]

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    @classmethod
    def constant(cls, mesh: Mesh, c) -> "SpeciesField":
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return cls(np.tile(c, (mesh.n_cells, 1)))


def _vals(u) -> np.ndarray:
    return u.values if isinstance(u, SpeciesField) else np.asarray(u, dtype=float)


def _check_cells(mesh, v):
    if v.shape[0] != mesh.n_cells:
        raise DimensionMismatch(f"field has {v.shape[0]} cells, mesh has {mesh.n_cells}")


def project_initial(mesh: Mesh, u0) -> SpeciesField:
    """Cell averages of the initial data by tensor 3-point Gauss-Legendre quadrature.

    ``u0`` is a sequence with one entry per species; each entry is a number or
    a callable taking one coordinate array per space dimension.
    """
    d = mesh.dimension
    if d == 1:
        ref = _GL_NODES[:, None]
        wts = _GL_WEIGHTS
    else:
        gx, gy = np.meshgrid(_GL_NODES, _GL_NODES, indexing="ij")
        ref = np.column_stack([gx.ravel(), gy.ravel()])
        wts = np.outer(_GL_WEIGHTS, _GL_WEIGHTS).ravel()
    wts = wts / wts.sum()
    # points: (n_cells, n_q, d)
    pts = mesh.centers[:, None, :] + mesh.halfwidths[:, None, :] * ref[None, :, :]
    coords = [pts[..., a] for a in range(d)]

    cols = []
    for i, f in enumerate(u0):
        if callable(f):
            with np.errstate(all="ignore"):
                vals = np.broadcast_to(np.asarray(f(*coords), dtype=float), pts.shape[:2])
        else:
            vals = np.full(pts.shape[:2], float(f))
        if not np.all(np.isfinite(vals)):
            raise EvaluationFailure(f"initial datum for species {i + 1} is not finite on the mesh")
        cols.append(vals @ wts)
    if not cols:
        raise InvalidArgument("need at least one species")
    return SpeciesField(np.column_stack(cols))


def _pointwise(v):
    # scalar field -> |v|; vector field -> Euclidean norm per row
    return np.abs(v) if v.ndim == 1 else np.sqrt(np.sum(v * v, axis=1))


def norm_0q(mesh: Mesh, field, q=2.0) -> float:
    """``(sum_K m(K) |v_K|^q)^(1/q)``; ``q = inf`` gives the max norm."""
    v = _vals(field)
    _check_cells(mesh, v)
    if q < 1:
        raise InvalidArgument(f"q must be >= 1, got {q}")
    a = _pointwise(v)
    if np.isinf(q):
        return float(a.max())
    return float(np.sum(mesh.measures * a**q) ** (1.0 / q))


def seminorm_1q(mesh: Mesh, field, q=2.0) -> float:
    """``(sum_{sigma int} m(sigma) d_sigma |D_sigma v / d_sigma|^q)^(1/q)``.

    Boundary edges have ``D v = 0`` and drop out.  ``q = inf`` gives
    ``max |D_sigma v| / d_sigma``.
    """
    v = _vals(field)
    _check_cells(mesh, v)
    if q < 1:
        raise InvalidArgument(f"q must be >= 1, got {q}")
    g = _pointwise(mesh.diff(v)) / mesh.edge_distance
    if np.isinf(q):
        return float(g.max()) if g.size else 0.0
    return float(np.sum(mesh.edge_measure * mesh.edge_distance * g**q) ** (1.0 / q))


def norm_1q(mesh: Mesh, field, q=2.0) -> float:
    a, b = norm_0q(mesh, field, q), seminorm_1q(mesh, field, q)
    if np.isinf(q):
        return max(a, b)
    return float((a**q + b**q) ** (1.0 / q))


def species_norm_sum(mesh: Mesh, field, q=2.0) -> float:
    """Sum of per-species norms; reporting convention only."""
    v = _vals(field)
    return sum(norm_0q(mesh, v[:, i], q) for i in range(v.shape[1]))


def weighted_field_norms(mesh: Mesh, A: InteractionMatrix, field):
    """``(||A^{1/2} u||_{0,2}, |A^{1/2} u|_{1,2})`` with Euclidean vector norms."""
    v = _vals(field)
    _check_cells(mesh, v)
    if v.ndim != 2 or v.shape[1] != A.n:
        raise DimensionMismatch(f"field species count does not match A (n={A.n})")
    w = v @ A.sqrt_entries
    return norm_0q(mesh, w, 2), seminorm_1q(mesh, w, 2)


def weighted_h1_seminorm_sq(mesh: Mesh, A: InteractionMatrix, field) -> float:
    """``|A^{1/2} u|_{1,2}^2 = sum_sigma tau_sigma (D u)^T A (D u)`` without a square root."""
    v = _vals(field)
    du = mesh.diff(v)
    return float(np.sum(mesh.transmissibility * np.einsum("ei,ij,ej->e", du, A.entries, du)))


def total_mass(mesh: Mesh, field) -> np.ndarray:
    v = _vals(field)
    _check_cells(mesh, v)
    return mesh.measures @ v if v.ndim == 2 else np.atleast_1d(mesh.measures @ v)


def rao_entropy_pair(mesh: Mesh, A: InteractionMatrix, u, v) -> float:
    """``H(u, v) = sum_K m(K) h(u_K, v_K)``."""
    uv, vv = _vals(u), _vals(v)
    _check_cells(mesh, uv)
    _check_cells(mesh, vv)
    if uv.shape != vv.shape:
        raise DimensionMismatch(f"fields differ in shape: {uv.shape} vs {vv.shape}")
    return float(np.sum(mesh.measures * entropy_density(A, uv, vv)))


def rao_entropy(mesh: Mesh, A: InteractionMatrix, u) -> float:
    return rao_entropy_pair(mesh, A, u, u)


def write_field_csv(path, mesh: Mesh, field):
    """One row per cell: id, center coordinates, u_1..u_n (17 significant digits)."""
    v = _vals(field)
    coord_names = ["x", "y"][: mesh.dimension]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell", *coord_names, *(f"u_{i + 1}" for i in range(v.shape[1]))])
        for k in range(mesh.n_cells):
            w.writerow([k, *(f"{c:.16e}" for c in mesh.centers[k]), *(f"{x:.16e}" for x in v[k])])


def read_field_csv(path) -> SpeciesField:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    first = next(i for i, h in enumerate(header) if h.startswith("u_"))
    return SpeciesField(np.array([[float(x) for x in r[first:]] for r in rows[1:]]))
