"""Symmetric eigenvalue utilities and the Loewner partial order.

Everything downstream (definiteness tests, penalty solver, spectral norms)
funnels through this module, so the contract is strict: inputs must be square,
finite, and symmetric up to roundoff; eigenvalues come back ascending with
orthonormal eigenvector columns.

The production decompositions are LAPACK's (``numpy.linalg.eigh``).  A cyclic
Jacobi implementation is kept alongside as an independent reference; tests
cross-check the two so a regression in either path is caught by the other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues ascending; eigenvectors as orthonormal columns."""

    values: np.ndarray
    vectors: np.ndarray


def check_symmetric(a, tol: float = 1e-10) -> np.ndarray:
    """Validate a square finite symmetric matrix and return its exact symmetrization.

    ``tol`` bounds the tolerated asymmetry relative to the largest entry.
    """
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix entries must be finite")
    scale = np.abs(arr).max(initial=1.0)
    gap = np.abs(arr - arr.T).max(initial=0.0)
    if gap > tol * scale:
        raise ValueError(f"matrix is not symmetric: max asymmetry {gap:.3e}")
    return (arr + arr.T) / 2.0


def eigh(a) -> EigenDecomposition:
    """Full symmetric eigendecomposition, eigenvalues ascending."""
    sym = check_symmetric(a)
    values, vectors = np.linalg.eigh(sym)
    return EigenDecomposition(values=values, vectors=vectors)


def lambda_max(a) -> tuple[float, np.ndarray]:
    """Largest eigenvalue with a unit eigenvector."""
    dec = eigh(a)
    return float(dec.values[-1]), dec.vectors[:, -1].copy()


def loewner_leq(a, b, tol: float = 0.0) -> bool:
    """Whether ``a`` precedes ``b`` in the Loewner order up to ``tol``."""
    value, _ = lambda_max(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    return value <= tol


def jacobi_eigh(a, tol: float = 1e-14, max_sweeps: int = 60) -> EigenDecomposition:
    """Cyclic Jacobi reference eigensolver.

    Sweeps over the strict upper triangle with classical 2x2 rotations until
    the off-diagonal Frobenius mass drops below ``tol`` times the matrix norm.
    Quadratically convergent near diagonal form; meant for modest sizes.
    """
    work = check_symmetric(a).copy()
    m = work.shape[0]
    vectors = np.eye(m)
    norm = np.linalg.norm(work)
    if norm == 0.0:
        return EigenDecomposition(values=np.zeros(m), vectors=vectors)
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(work**2) - np.sum(np.diag(work) ** 2), 0.0))
        if off <= tol * norm:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = work[p, q]
                if abs(apq) <= 0.25 * tol * norm / m:
                    continue
                theta = (work[q, q] - work[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta**2 + 1.0)) if theta != 0.0 else 1.0
                c = 1.0 / np.sqrt(t**2 + 1.0)
                s = t * c
                rot_p = c * work[:, p] - s * work[:, q]
                rot_q = s * work[:, p] + c * work[:, q]
                work[:, p], work[:, q] = rot_p, rot_q
                rot_p = c * work[p, :] - s * work[q, :]
                rot_q = s * work[p, :] + c * work[q, :]
                work[p, :], work[q, :] = rot_p, rot_q
                rot_p = c * vectors[:, p] - s * vectors[:, q]
                rot_q = s * vectors[:, p] + c * vectors[:, q]
                vectors[:, p], vectors[:, q] = rot_p, rot_q
    order = np.argsort(np.diag(work), kind="stable")
    return EigenDecomposition(values=np.diag(work)[order].copy(), vectors=vectors[:, order].copy())
