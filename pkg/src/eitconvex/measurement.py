"""Finite measurement operator built on the layered forward model.

Boundary data is observed through the first ``m`` functions of the orthonormal
trigonometric basis on the unit circle (``1/sqrt(pi)`` scaling), ordered
``sin, cos`` per angular mode.  In that basis the Galerkin matrix of the
Neumann-to-Dirichlet map is exactly diagonal, with the mode-``j`` eigenvalue
repeated for the sine and cosine columns, so column ``k`` (0-based) carries
mode ``k // 2 + 1`` and an odd truncation ends on a bare sine column.

The matrices returned here are plain dense symmetric arrays; symmetry is exact
by construction (diagonal assembly, mirrored noise) and validated on any data
read back from disk.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .forward import Geometry, ntd_curvature, ntd_spectrum
from .symlinalg import check_symmetric, lambda_max


class DimensionMismatch(ValueError):
    """Operand shapes incompatible with the measurement truncation."""


@dataclass(frozen=True)
class MeasurementModel:
    """Geometry plus truncation order ``m >= 1`` of the boundary basis."""

    geometry: Geometry
    m: int

    def __post_init__(self) -> None:
        if not isinstance(self.m, int) or isinstance(self.m, bool) or self.m < 1:
            raise DimensionMismatch(f"truncation order must be a positive integer, got {self.m!r}")

    @property
    def n_layers(self) -> int:
        return self.geometry.n_layers

    @property
    def n_modes(self) -> int:
        """Angular modes touched by the truncation: ceil(m / 2)."""
        return (self.m + 1) // 2

    def mode_of_column(self, k: int) -> int:
        if not 0 <= k < self.m:
            raise DimensionMismatch(f"column {k} outside 0..{self.m - 1}")
        return k // 2 + 1


def _column_values(model: MeasurementModel, per_mode: np.ndarray) -> np.ndarray:
    """Repeat per-mode values onto the sine/cosine columns and truncate to m."""
    return np.repeat(per_mode, 2, axis=-1)[..., : model.m]


def assemble_f(model: MeasurementModel, sigma) -> np.ndarray:
    """Galerkin measurement matrix ``F_m(sigma)``: diagonal, shape ``(m, m)``."""
    values = ntd_spectrum(model.geometry, sigma, model.n_modes)
    if values.ndim != 1:
        raise DimensionMismatch("assemble_f expects a single profile")
    return np.diag(_column_values(model, values))


def assemble_jacobian(model: MeasurementModel, sigma) -> np.ndarray:
    """Stack of layer derivatives ``dF/d sigma_i``, shape ``(n, m, m)``."""
    _, grads = ntd_spectrum(model.geometry, sigma, model.n_modes, gradients=True)
    if grads.ndim != 2:
        raise DimensionMismatch("assemble_jacobian expects a single profile")
    n = model.n_layers
    stack = np.zeros((n, model.m, model.m))
    cols = _column_values(model, grads.T)  # (n, m)
    idx = np.arange(model.m)
    stack[:, idx, idx] = cols
    return stack


def hessian_diagonal(model: MeasurementModel, sigma) -> np.ndarray:
    """Column second derivatives ``d^2 F_kk / d sigma_i d sigma_j``, shape ``(n, n, m)``.

    The assembled matrices are diagonal, so the full second-derivative
    object never needs to be materialized: entry ``[i, j, k]`` is the
    curvature of diagonal column ``k``.
    """
    _, _, d2 = ntd_curvature(model.geometry, sigma, model.n_modes)
    if d2.ndim != 3:
        raise DimensionMismatch("hessian_diagonal expects a single profile")
    return _column_values(model, np.moveaxis(d2, 0, -1))


def apply_jacobian(stack: np.ndarray, direction) -> np.ndarray:
    """Directional derivative ``F'(sigma) d`` from a precomputed stack."""
    d = np.asarray(direction, dtype=float)
    if d.shape != (stack.shape[0],):
        raise DimensionMismatch(f"direction shape {d.shape} does not match {stack.shape[0]} layers")
    return np.tensordot(d, stack, axes=1)


def frobenius_residual(model: MeasurementModel, sigma, y_hat) -> float:
    """Squared Frobenius distance ``||F_m(sigma) - Y||_F^2``."""
    y = np.asarray(y_hat, dtype=float)
    if y.shape != (model.m, model.m):
        raise DimensionMismatch(f"data shape {y.shape}, expected {(model.m, model.m)}")
    gap = assemble_f(model, sigma) - y
    return float(np.sum(gap * gap))


def residual_batch(model: MeasurementModel, sigmas, y_hat) -> np.ndarray:
    """Frobenius residuals for a batch of profiles, shape ``(...,)``.

    Exploits diagonality of the assembled matrices: only the diagonal of the
    gap varies with sigma, the off-diagonal mass of ``Y`` is a constant.
    """
    y = np.asarray(y_hat, dtype=float)
    if y.shape != (model.m, model.m):
        raise DimensionMismatch(f"data shape {y.shape}, expected {(model.m, model.m)}")
    values = ntd_spectrum(model.geometry, sigmas, model.n_modes)
    cols = _column_values(model, values)
    diag_gap = cols - np.diag(y)
    off_mass = float(np.sum(y * y) - np.sum(np.diag(y) ** 2))
    return np.sum(diag_gap**2, axis=-1) + off_mass


def spectral_noise(m: int, delta: float, rng: np.random.Generator) -> np.ndarray:
    """Symmetric perturbation with spectral norm exactly ``delta``."""
    if delta < 0.0:
        raise ValueError(f"noise level must be nonnegative, got {delta}")
    if delta == 0.0:
        return np.zeros((m, m))
    draw = rng.standard_normal((m, m))
    sym = (draw + draw.T) / 2.0
    top, _ = lambda_max(sym)
    bottom, _ = lambda_max(-sym)
    norm = max(abs(top), abs(bottom))
    if norm == 0.0:
        return np.zeros((m, m))
    return sym * (delta / norm)


def save_matrix_csv(path, matrix) -> None:
    """Write a symmetric matrix as plain full row-major CSV (shortest round-trip reprs)."""
    arr = check_symmetric(matrix)
    lines = [",".join(repr(float(x)) for x in row) for row in arr]
    Path(path).write_text("\n".join(lines) + "\n")


def load_matrix_csv(path) -> np.ndarray:
    """Read a matrix written by :func:`save_matrix_csv`; validates shape and symmetry."""
    rows = []
    for line in Path(path).read_text().strip().splitlines():
        rows.append([float(tok) for tok in line.split(",")])
    if not rows or any(len(r) != len(rows) for r in rows):
        raise DimensionMismatch(f"{path}: expected a square matrix")
    return check_symmetric(np.array(rows, dtype=float))
