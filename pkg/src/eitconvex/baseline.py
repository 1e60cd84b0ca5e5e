"""Nonconvex least-squares baseline: Levenberg-Marquardt with box clamping.

Minimizes the data-fitting functional ``||F(sigma) - Y||_F^2`` that the convex
program replaces.  For this measurement family the matrix is diagonal, so the
residual vector is the vector of diagonal gaps and the Frobenius objective is
its squared norm.  The landscape of this functional carries a dense field of
local minimizers (see :mod:`eitconvex.experiments`), which is the point of
keeping the baseline around: no global-optimality claim is made or implied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibration import Box
from .forward import DomainError
from .measurement import MeasurementModel, assemble_f, assemble_jacobian
from .reports import SolveReport

_POSITIVITY_FLOOR = 1e-8


@dataclass(frozen=True)
class LMOptions:
    """Damping schedule and stopping rules for :func:`lsq_solve`.

    ``box_mode`` selects what happens after a step: ``"clamp"`` projects the
    iterate back onto the box (or a small positivity floor when no box is
    given), ``"none"`` lets the iterate run free, in which case a step into
    nonpositive conductivities ends the solve with a divergence flag.
    """

    damping: float = 1e-3
    damping_up: float = 10.0
    damping_down: float = 10.0
    max_iterations: int = 200
    grad_tol: float = 1e-10
    box_mode: str = "clamp"

    def __post_init__(self) -> None:
        if not self.damping > 0.0:
            raise ValueError(f"damping must be positive, got {self.damping}")
        if self.damping_up <= 1.0 or self.damping_down <= 1.0:
            raise ValueError("damping factors must exceed 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.box_mode not in ("clamp", "none"):
            raise ValueError(f"box_mode must be 'clamp' or 'none', got {self.box_mode!r}")


def _residual(model: MeasurementModel, sigma: np.ndarray, y_diag: np.ndarray) -> np.ndarray:
    return np.diag(assemble_f(model, sigma)) - y_diag


def lsq_solve(
    model: MeasurementModel,
    y_hat,
    sigma0,
    opts: LMOptions = LMOptions(),
    box: Box | None = None,
) -> SolveReport:
    """Levenberg-Marquardt on the diagonal-gap residual from ``sigma0``.

    Accepted steps never increase the squared residual; the damping grows
    multiplicatively on rejection and shrinks on acceptance.  Stops when the
    gradient drops below ``opts.grad_tol``, the iteration budget runs out, or
    (in ``box_mode="none"``) the iterate leaves the admissible domain, which
    is reported as ``status="diverged"``.
    """
    sigma = np.asarray(sigma0, dtype=float).copy()
    if sigma.shape != (model.n_layers,):
        raise ValueError(f"sigma0 needs {model.n_layers} layers, got shape {sigma.shape}")
    if np.any(sigma <= 0.0):
        raise ValueError("sigma0 must be positive")
    y_diag = np.diag(np.asarray(y_hat, dtype=float))
    lo = np.full(sigma.shape, _POSITIVITY_FLOOR)
    hi = np.full(sigma.shape, np.inf)
    if box is not None:
        lo = np.maximum(lo, np.array(box.lower))
        hi = np.array(box.upper, dtype=float)

    residual = _residual(model, sigma, y_diag)
    cost = float(residual @ residual)
    damping = opts.damping
    status = "max-iterations"
    converged = False
    iterations = 0
    for _ in range(opts.max_iterations):
        jac = np.einsum("icc->ci", assemble_jacobian(model, sigma))
        grad = 2.0 * (jac.T @ residual)
        if float(np.abs(grad).max()) <= opts.grad_tol:
            converged = True
            status = "converged"
            break
        normal = jac.T @ jac
        step = np.linalg.solve(normal + damping * np.eye(normal.shape[0]), -(jac.T @ residual))
        trial = sigma + step
        if opts.box_mode == "clamp":
            trial = np.clip(trial, lo, hi)
        iterations += 1
        if np.any(trial <= 0.0):
            status = "diverged"
            break
        try:
            trial_residual = _residual(model, trial, y_diag)
        except DomainError:
            status = "diverged"
            break
        trial_cost = float(trial_residual @ trial_residual)
        if not np.isfinite(trial_cost):
            status = "diverged"
            break
        if trial_cost < cost:
            sigma = trial
            residual = trial_residual
            cost = trial_cost
            damping /= opts.damping_down
        else:
            damping *= opts.damping_up
    return SolveReport(
        sigma=tuple(float(v) for v in sigma),
        objective=cost,
        feasibility=None,
        iterations=iterations,
        backend="lsq",
        converged=converged,
        status=status,
    )
