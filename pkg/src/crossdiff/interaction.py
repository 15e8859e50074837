"""Interaction matrix, weighted norms and the quadratic two-level entropy density.

The pair density ``h(u, v) = (5|u|_A^2 - 4(u, v)_A + |v|_A^2) / 4`` is the
Lyapunov functional of the BDF2 scheme; ``h(u, u)`` is the Rao entropy
density ``|u|_A^2 / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidArgument, NotPositiveDefinite, NotSymmetric

SYMMETRY_TOL = 1e-12
PD_RTOL = 1e-14
SQRT8 = np.sqrt(8.0)


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Symmetric (semi)definite interaction matrix with cached spectral data."""

    entries: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sqrt_entries: np.ndarray
    semidefinite_allowed: bool = False

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    def __repr__(self):
        return (f"InteractionMatrix(n={self.n}, lambda_min={self.lambda_min:.6g}, "
                f"lambda_max={self.lambda_max:.6g})")


def build_interaction(entries, allow_semidefinite=False) -> InteractionMatrix:
    """Validate ``entries`` and precompute its spectrum and square root.

    Matrices that are symmetric up to ``1e-12`` (absolute) are symmetrized.
    Positive definiteness requires ``lambda_min > 1e-14 * lambda_max``; with
    ``allow_semidefinite`` the test becomes ``lambda_min >= -1e-14 * lambda_max``
    and slightly negative eigenvalues are clamped to zero in the square root.
    """
    M = np.array(entries, dtype=float)
    if M.ndim == 1 and M.size == 1:
        M = M.reshape(1, 1)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise InvalidArgument(f"interaction matrix must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidArgument("interaction matrix has non-finite entries")
    asym = np.max(np.abs(M - M.T))
    if asym > SYMMETRY_TOL:
        raise NotSymmetric(f"interaction matrix asymmetry {asym:.3e} exceeds {SYMMETRY_TOL}")
    M = 0.5 * (M + M.T)

    lam, Q = np.linalg.eigh(M)
    lam_max = lam[-1]
    if lam_max <= 0:
        raise NotPositiveDefinite(f"largest eigenvalue {lam_max:.6g} is not positive")
    if allow_semidefinite:
        if lam[0] < -PD_RTOL * lam_max:
            raise NotPositiveDefinite(f"smallest eigenvalue {lam[0]:.6g} is negative")
    elif lam[0] <= PD_RTOL * lam_max:
        raise NotPositiveDefinite(
            f"smallest eigenvalue {lam[0]:.6g} is not positive (relative to {lam_max:.6g})")

    root = (Q * np.sqrt(np.clip(lam, 0.0, None))) @ Q.T
    root = 0.5 * (root + root.T)
    for arr in (M, lam, Q, root):
        arr.setflags(write=False)
    return InteractionMatrix(M, lam, Q, root, bool(allow_semidefinite))


def _check(A: InteractionMatrix, *vecs):
    out = []
    for v in vecs:
        v = np.asarray(v, dtype=float)
        if v.shape[-1:] != (A.n,):
            raise DimensionMismatch(f"expected trailing dimension {A.n}, got shape {v.shape}")
        out.append(v)
    return out


def _inner(A, u, v):
    # batched u^T A v over leading axes
    return np.einsum("...i,ij,...j->...", u, A.entries, v)


def weighted_norm_sq(A: InteractionMatrix, u):
    """``u^T A u``; vectorized over leading axes of ``u``."""
    (u,) = _check(A, u)
    return _inner(A, u, u)


def weighted_inner(A: InteractionMatrix, u, v):
    u, v = _check(A, u, v)
    return _inner(A, u, v)


def entropy_density(A: InteractionMatrix, u, v):
    """Two-level entropy density ``h(u, v)``."""
    u, v = _check(A, u, v)
    return 0.25 * (5.0 * _inner(A, u, u) - 4.0 * _inner(A, u, v) + _inner(A, v, v))


def bdf2_identity_parts(A: InteractionMatrix, u, v, w):
    """Both sides of the BDF2 G-stability identity.

    Returns ``(lhs, entropy_diff, remainder)`` with
    ``lhs = (3u/2 - 2v + w/2)^T A u``, ``entropy_diff = h(u, v) - h(v, w)`` and
    ``remainder = |u - 2v + w|_A^2 / 4``; algebraically ``lhs = entropy_diff + remainder``.
    """
    u, v, w = _check(A, u, v, w)
    lhs = _inner(A, 1.5 * u - 2.0 * v + 0.5 * w, u)
    entropy_diff = entropy_density(A, u, v) - entropy_density(A, v, w)
    d2 = u - 2.0 * v + w
    remainder = 0.25 * _inner(A, d2, d2)
    return lhs, entropy_diff, remainder


def entropy_sandwich_bounds(A: InteractionMatrix, u, v):
    """Spectral bounds ``(3 -+ sqrt 8)/4 * (|u|_A^2 + |v|_A^2)`` bracketing ``h(u, v)``."""
    u, v = _check(A, u, v)
    s = _inner(A, u, u) + _inner(A, v, v)
    return 0.25 * (3.0 - SQRT8) * s, 0.25 * (3.0 + SQRT8) * s


def apply_sqrt(A: InteractionMatrix, u):
    """Apply ``A^{1/2}`` to the trailing axis of ``u``."""
    (u,) = _check(A, u)
    return u @ A.sqrt_entries
