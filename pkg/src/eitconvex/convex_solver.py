"""Convex semidefinite recovery program and its solvers.

The program is ``minimize c^T sigma`` over the box subject to
``F_m(sigma) <= Y + tau I`` in the Loewner order (``tau = 0`` for exact data,
``tau = delta`` for noise level ``delta``).  Monotone decrease of the
measurement map makes the upper box corner feasible whenever the data is
consistent, and with calibrated cost weights the noiseless minimizer is the
true profile.

The reference backend is a smoothed exact penalty: the hinge
``max(0, lambda_max(F(sigma) - Y - tau I))`` is smoothed by a log-sum-exp over
the constraint eigenvalues (temperature ``mu``), multiplied by a weight ``K``
at or above the exact-penalty threshold, and minimized by projected Newton
descent onto the box with a backtracking line search.  Continuation grows
``K`` tenfold while the iterate is infeasible and sharpens the hinge
(``mu /= 10``) only after a settled stage, until the feasibility residual
meets tolerance at the smoothing floor and the objective stalls.  The
noiseless optimum sits exactly on the semidefinite boundary, which is why the
penalty form is the default; a log-det barrier backend is available when a
strictly feasible start exists.

Pinned layers (degenerate box intervals) are eliminated from the decision
variables and reattached to the reported minimizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibration import Box, CalibrationCertificate, weighted_norm
from .measurement import MeasurementModel, assemble_f, assemble_jacobian, hessian_diagonal
from .reports import SolveReport
from .symlinalg import eigh, lambda_max

_MU_MIN = 1e-13
_K_MAX = 1e16


class InfeasibleStart(RuntimeError):
    """The monotone start (upper box corner) violates the data constraint."""


@dataclass(frozen=True)
class ConvexProblem:
    model: MeasurementModel
    y: np.ndarray
    box: Box
    cost: tuple[float, ...]
    slack: float = 0.0
    tol_feas: float = 1e-9
    tol_opt: float = 1e-6
    max_inner: int = 500
    max_stages: int = 32
    penalty0: float | None = None

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float)
        m = self.model.m
        if y.shape != (m, m):
            raise ValueError(f"data shape {y.shape}, expected {(m, m)}")
        object.__setattr__(self, "y", y)
        cost = tuple(float(c) for c in self.cost)
        object.__setattr__(self, "cost", cost)
        n = self.model.n_layers
        if len(cost) != n or any(c <= 0.0 for c in cost):
            raise ValueError("cost must be positive with one weight per layer")
        if self.box.n != n:
            raise ValueError(f"box has {self.box.n} layers, model {n}")
        if self.slack < 0.0:
            raise ValueError(f"slack must be nonnegative, got {self.slack}")


def penalty_start(cert: CalibrationCertificate, free: np.ndarray | None = None) -> float:
    """Penalty weight ``10 ||c||_1 (n-1) / lambda`` from a certificate.

    ``free`` restricts the cost sum to the active coordinates; pinned layers
    are eliminated from the program, so their weights only shift the objective
    by a constant and would inflate the penalty scale for no benefit.
    """
    c = np.array(cert.cost)
    if free is not None:
        c = c[free]
    return 10.0 * float(np.sum(np.abs(c))) * max(cert.n - 1, 1) / cert.lam


def constraint_matrix(problem: ConvexProblem, sigma) -> np.ndarray:
    return assemble_f(problem.model, sigma) - problem.y - problem.slack * np.eye(problem.model.m)


def feasibility_residual(problem: ConvexProblem, sigma) -> float:
    value, _ = lambda_max(constraint_matrix(problem, sigma))
    return value


def feasible_start(problem: ConvexProblem) -> tuple[np.ndarray, float]:
    """Upper box corner and its constraint residual; the monotone safe start.

    Raises :class:`InfeasibleStart` when even this corner violates the
    constraint, which signals data inconsistent with the box (for example
    deflated measurements).
    """
    sigma0 = np.array(problem.box.upper, dtype=float)
    residual = feasibility_residual(problem, sigma0)
    if residual > problem.tol_feas:
        raise InfeasibleStart(
            f"upper corner infeasible: lambda_max residual {residual:.3e} > {problem.tol_feas:.1e}"
        )
    return sigma0, residual


def _gap_scale(problem: ConvexProblem) -> np.ndarray:
    """Per-column normalizer: the range of each diagonal entry over the box.

    The penalty works on the congruence ``S (F - Y - tau I) S`` with
    ``S = diag(1/sqrt(range))``, which has the same feasible set but
    eigenvalue excursions of order one in every mode.  Without it the high
    modes, exponentially blind to the inner layers, sit within the smoothing
    width of zero across the whole box and exert phantom forces at every
    continuation stage.
    """
    top = np.diag(assemble_f(problem.model, problem.box.lower))
    bottom = np.diag(assemble_f(problem.model, problem.box.upper))
    return 1.0 / np.sqrt(top - bottom)


def _smoothed_penalty(gap: np.ndarray, mu: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Value and softmax eigenvalue weights of the smoothed hinge.

    ``mu * log(exp(0) + sum_i exp(lam_i / mu))`` evaluated stably; the hinge
    ``max(0, lam_max)`` is the ``mu -> 0`` limit.  Returns the eigenvector
    matrix as well so gradients can be assembled by the caller.
    """
    dec = eigh(gap)
    shift = max(0.0, float(dec.values[-1]))
    exps = np.exp((dec.values - shift) / mu)
    total = np.exp(-shift / mu) + float(np.sum(exps))
    value = shift + mu * np.log(total)
    weights = exps / total
    return value, weights, dec.vectors


def _penalty_state(problem, x_free, free, x_full, scale, K, mu):
    """Value, gradient, and Hessian of the smoothed penalty objective.

    The Hessian combines the second derivative of the eigenvalue
    log-sum-exp (softmax covariance plus divided-difference channel) with
    the weighted curvature of the measurement map.  Every term is positive
    semidefinite (the map's eigenvalues are convex in the layer values),
    so the regularized Newton direction always descends.
    """
    x_full[free] = x_free
    gap = constraint_matrix(problem, x_full) * np.outer(scale, scale)
    dec = eigh(gap)
    lam = dec.values
    shift = max(0.0, float(lam[-1]))
    exps = np.exp((lam - shift) / mu)
    total = np.exp(-shift / mu) + float(np.sum(exps))
    pen = shift + mu * np.log(total)
    w = exps / total
    cost = np.array(problem.cost)
    value = float(cost @ x_full) + K * pen
    stack = assemble_jacobian(problem.model, x_full)[free] * np.outer(scale, scale)
    # congruence onto the eigenbasis: A_k = V^T S F_k S V
    a = np.einsum("ji,kjl,lm->kim", dec.vectors, stack, dec.vectors, optimize=True)
    diag = np.einsum("kii->ki", a)
    grad = cost[free] + K * (diag @ w)
    # dw_i/dlam_j = (delta_ij w_i - w_i w_j) / mu, summed against A diagonals
    dw = (diag * w) @ diag.T
    dw -= np.outer(diag @ w, diag @ w)
    hess = dw / mu
    # off-diagonal channel: divided differences of the weights
    dl = lam[:, None] - lam[None, :]
    tie = np.abs(dl) <= 1e-12 * (1.0 + np.abs(lam)).max()
    gamma = np.where(tie, (w[:, None] + w[None, :]) / (2.0 * mu), (w[:, None] - w[None, :]) / np.where(tie, 1.0, dl))
    np.fill_diagonal(gamma, 0.0)
    hess += np.einsum("kij,ij,lij->kl", a, gamma, a, optimize=True)
    # curvature of the map itself: sum_i w_i v_i^T (d2 S F S /dx_k dx_l) v_i
    wdiag = (dec.vectors**2) @ w
    hess += (hessian_diagonal(problem.model, x_full) @ (wdiag * scale**2))[np.ix_(free, free)]
    return value, grad, K * hess, pen


def _penalty_hinge(problem, x_free, free, x_full, scale, mu):
    x_full[free] = x_free
    gap = constraint_matrix(problem, x_full) * np.outer(scale, scale)
    pen, _, _ = _smoothed_penalty(gap, mu)
    return pen


def _kkt_residual(x, grad, lo, hi) -> float:
    """Projected stationarity measure on the box."""
    res = np.abs(grad)
    at_lo = x <= lo + 1e-15 * (1.0 + np.abs(lo))
    at_hi = x >= hi - 1e-15 * (1.0 + np.abs(hi))
    res[at_lo] = np.abs(np.minimum(grad[at_lo], 0.0))
    res[at_hi] = np.abs(np.maximum(grad[at_hi], 0.0))
    return float(res.max(initial=0.0))


def _project_descent(problem, x_free, free, x_full, scale, K, mu, kkt_tol):
    """Projected Newton descent for one continuation stage.

    Steepest descent (scalar or coordinate-wise step) stalls here: near the
    semidefinite wall the penalty is a steep valley whose tangent is the
    direction the iterate still has to travel, and backtracked first-order
    steps are throttled to the smoothing width.  The curvature model from
    :func:`_penalty_state` is positive semidefinite, so the regularized
    Newton direction always descends; coordinates pressed onto their box
    bound are frozen out of the system first.
    """
    lo = np.array(problem.box.lower)[free]
    hi = np.array(problem.box.upper)[free]
    cfree = np.array(problem.cost)[free]
    span = float(np.max(hi - lo, initial=0.0))
    iters = 0
    stationary = False
    stalled = False
    for _ in range(problem.max_inner):
        _, grad, hess, pen = _penalty_state(problem, x_free, free, x_full, scale, K, mu)
        if _kkt_residual(x_free, grad, lo, hi) <= kkt_tol:
            stationary = True
            break
        edge = 1e-12 * (1.0 + np.abs(lo) + np.abs(hi))
        active = ((x_free <= lo + edge) & (grad > 0.0)) | ((x_free >= hi - edge) & (grad < 0.0))
        inner = ~active
        direction = np.zeros_like(x_free)
        if not np.any(inner):
            stationary = True
            break
        sub = hess[np.ix_(inner, inner)]
        # relative per-coordinate damping: a global scale would crush the
        # flat directions the stiff wall coordinates dwarf by many decades
        reg = 1e-12 * (1.0 + np.abs(np.diag(sub)))
        direction[inner] = np.linalg.solve(sub + np.diag(reg), -grad[inner])
        norm = float(np.linalg.norm(direction))
        if norm > span > 0.0:
            direction *= span / norm
        moved = False
        t = 1.0
        for _ in range(60):
            candidate = np.clip(x_free + t * direction, lo, hi)
            step = candidate - x_free
            slope = float(grad @ step)
            if slope < 0.0:
                # Armijo on the objective difference: the absolute objective
                # carries constants that swamp float resolution long before
                # the decrements this test has to see, so the cost change and
                # the hinge change are each formed without cancellation.
                trial_pen = _penalty_hinge(problem, candidate, free, x_full, scale, mu)
                diff = float(cfree @ step) + K * (trial_pen - pen)
                if diff <= 1e-4 * slope:
                    x_free = candidate
                    moved = True
                    break
            t *= 0.5
        iters += 1
        if not moved:
            stalled = True
            break
    return x_free, iters, stationary, stalled


def solve(problem: ConvexProblem, x0=None, backend: str = "penalty") -> SolveReport:
    """Minimize ``c^T sigma`` subject to box and semidefinite data constraint.

    ``x0`` optionally overrides the iterate start (it is clipped to the box);
    the feasibility of the monotone start is checked regardless, so
    :class:`InfeasibleStart` fires on inconsistent data no matter the seed
    point.  For exact data the minimizer is independent of ``x0`` up to
    solver tolerance.
    """
    if backend == "barrier":
        return _solve_barrier(problem, x0)
    if backend != "penalty":
        raise ValueError(f"unknown backend {backend!r}")
    corner, corner_residual = feasible_start(problem)
    lo = np.array(problem.box.lower)
    hi = np.array(problem.box.upper)
    free = np.nonzero(hi > lo)[0]
    x_full = lo.copy()
    start = corner if x0 is None else problem.box.clip(x0)
    if free.size == 0:
        residual = feasibility_residual(problem, x_full)
        return SolveReport(
            sigma=tuple(x_full),
            objective=float(np.array(problem.cost) @ x_full),
            feasibility=residual,
            iterations=0,
            backend="penalty",
            converged=residual <= problem.tol_feas,
            status="converged" if residual <= problem.tol_feas else "infeasible-pinned",
        )
    x_free = start[free].astype(float)
    cost = np.array(problem.cost)
    scale = _gap_scale(problem)
    K = problem.penalty0 if problem.penalty0 is not None else 1e3
    mu = 1e-2
    kkt_tol = 1e-8 * max(1.0, float(np.abs(cost[free]).max()))
    total_iters = 0
    prev_objective = None
    converged = False
    for _ in range(problem.max_stages):
        x_free, iters, stationary, stalled = _project_descent(
            problem, x_free, free, x_full, scale, K, mu, kkt_tol
        )
        total_iters += iters
        x_full[free] = x_free
        residual = feasibility_residual(problem, x_full)
        objective = float(cost @ x_full)
        # The stall test is only trusted at the smoothing floor and after a
        # stage that settled, meaning it reached stationarity or its line
        # search hit the objective resolution floor: a budget-capped stage can
        # leave macroscopic descent on the table while the objective barely
        # moves between caps.
        settled = stationary or stalled
        if residual <= problem.tol_feas and mu <= _MU_MIN and settled and prev_objective is not None:
            if abs(objective - prev_objective) <= problem.tol_opt * (1.0 + abs(objective)):
                converged = True
                break
        prev_objective = objective
        # Continuation must not outrun the iterate: while infeasible the weight
        # grows on the still-smooth landscape, and the hinge sharpens only
        # after a stage that settled (stationary, or at the line-search floor);
        # a stage that merely ran out of budget repeats unchanged.
        if residual > problem.tol_feas:
            K = min(K * 10.0, _K_MAX)
        elif stationary or stalled:
            mu = max(mu / 10.0, _MU_MIN)
    x_full[free] = x_free
    residual = feasibility_residual(problem, x_full)
    return SolveReport(
        sigma=tuple(float(v) for v in x_full),
        objective=float(cost @ x_full),
        feasibility=residual,
        iterations=total_iters,
        backend="penalty",
        converged=converged and residual <= problem.tol_feas,
        status="converged" if converged else "max-iterations",
    )


def _solve_barrier(problem: ConvexProblem, x0=None) -> SolveReport:
    """Log-det barrier backend; needs a strictly feasible interior start.

    Path-following on ``c^T x - nu log det(Y + tau I - F(x))
    - nu sum log((x-a)(b-x))`` with ``nu`` decreasing tenfold per stage and a
    damped Newton centering step.  Both Hessian pieces of the matrix barrier,
    ``Tr(S^-1 F_k S^-1 F_l)`` and ``Tr(S^-1 d2F)``, are positive semidefinite,
    and the line search rejects any step leaving the interior.
    """
    feasible_start(problem)
    lo = np.array(problem.box.lower)
    hi = np.array(problem.box.upper)
    free = np.nonzero(hi > lo)[0]
    if free.size == 0:
        return solve(problem, backend="penalty")
    x_full = lo.copy()
    cost = np.array(problem.cost)
    cfree = cost[free]
    span = hi[free] - lo[free]

    def interior_state(xf):
        if np.any(xf <= lo[free]) or np.any(xf >= hi[free]):
            return None
        x_full[free] = xf
        slack_mat = -constraint_matrix(problem, x_full)
        dec = eigh(slack_mat)
        if float(dec.values[0]) <= 0.0:
            return None
        return dec

    # candidate interior starts: the caller's seed, then the feasible upper
    # corner nudged inward by shrinking margins (monotonicity puts the strict
    # interior just inside that corner whenever the data has any slack)
    candidates = []
    if x0 is not None:
        seed = problem.box.clip(x0)[free].astype(float)
        candidates.append(np.clip(seed, lo[free] + 1e-9 * span, hi[free] - 1e-9 * span))
    candidates.extend(hi[free] - frac * span for frac in (1e-3, 1e-5, 1e-7, 1e-9))
    x_free = None
    for cand in candidates:
        if interior_state(cand) is not None:
            x_free = cand
            break
    if x_free is None:
        raise InfeasibleStart("barrier backend needs a strictly feasible interior start")

    def barrier_terms(xf, dec):
        # -logdet(S) - sum of box logs, without the linear cost: the linear
        # part enters line-search comparisons as a difference to dodge the
        # resolution loss of the absolute objective
        x_full[free] = xf
        logdet = float(np.sum(np.log(dec.values)))
        gap_lo = xf - lo[free]
        gap_hi = hi[free] - xf
        return -logdet - float(np.sum(np.log(gap_lo)) + np.sum(np.log(gap_hi)))

    def center_state(xf, nu, dec):
        x_full[free] = xf
        gap_lo = xf - lo[free]
        gap_hi = hi[free] - xf
        stack = assemble_jacobian(problem.model, x_full)[free]
        # B_k = V^T F_k V weighted by 1/sqrt(eigenvalues) on both sides
        b = np.einsum("ji,kjl,lm->kim", dec.vectors, stack, dec.vectors, optimize=True)
        root = np.sqrt(dec.values)
        bt = b / root[None, :, None] / root[None, None, :]
        grad = cfree + nu * np.einsum("kii->k", bt)
        grad += nu * (1.0 / gap_hi - 1.0 / gap_lo)
        hess = nu * np.einsum("kij,lij->kl", bt, bt, optimize=True)
        inv_diag = (dec.vectors**2) @ (1.0 / dec.values)
        hess += nu * (hessian_diagonal(problem.model, x_full) @ inv_diag)[np.ix_(free, free)]
        hess += nu * np.diag(1.0 / gap_lo**2 + 1.0 / gap_hi**2)
        return grad, hess

    # bias of the central path endpoint scales with nu, and near the boundary
    # optimum the centering system degenerates, so the floor stays moderate
    nu = 1.0
    total_iters = 0
    settled = False
    for _ in range(10):
        settled = False
        for _ in range(problem.max_inner):
            dec = interior_state(x_free)
            grad, hess = center_state(x_free, nu, dec)
            if float(np.abs(grad).max()) <= 1e-6 * (1.0 + float(np.abs(cfree).max())):
                settled = True
                break
            reg = 1e-12 * (1.0 + np.abs(np.diag(hess)))
            direction = np.linalg.solve(hess + np.diag(reg), -grad)
            base = barrier_terms(x_free, dec)
            moved = False
            t = 1.0
            for _ in range(60):
                candidate = x_free + t * direction
                step = candidate - x_free
                slope = float(grad @ step)
                cand_dec = interior_state(candidate)
                if cand_dec is not None and slope < 0.0:
                    diff = float(cfree @ step) + nu * (barrier_terms(candidate, cand_dec) - base)
                    if diff <= 1e-4 * slope:
                        x_free = candidate
                        moved = True
                        break
                t *= 0.5
            total_iters += 1
            if not moved:
                settled = True
                break
        nu /= 10.0
        if nu < 1e-9:
            break
    x_full[free] = x_free
    residual = feasibility_residual(problem, x_full)
    converged = settled and residual <= problem.tol_feas
    return SolveReport(
        sigma=tuple(float(v) for v in x_full),
        objective=float(cost @ x_full),
        feasibility=residual,
        iterations=total_iters,
        backend="barrier",
        converged=converged,
        status="converged" if converged else "max-iterations",
    )


@dataclass(frozen=True)
class BoundCheck:
    """Noise-bound verdict: ``lhs = ||sigma* - sigma_hat||_{c,inf}`` vs ``rhs = 2(n-1)delta/lambda``."""

    lhs: float
    rhs: float
    holds: bool
    report: SolveReport


def noise_bound_check(
    problem: ConvexProblem,
    delta: float,
    cert: CalibrationCertificate,
    sigma_hat,
    tol: float = 1e-8,
) -> BoundCheck:
    """Solve at noise level ``delta`` and compare against the certified bound.

    Validates the advertised preconditions: the problem's slack equals
    ``delta``, its cost is the certificate's, and the data lies within
    ``delta`` of the exact measurements in spectral norm.
    """
    if problem.slack != delta:
        raise ValueError(f"problem slack {problem.slack} must equal delta {delta}")
    if tuple(problem.cost) != tuple(cert.cost):
        raise ValueError("problem cost differs from the certificate cost")
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    gap = np.asarray(problem.y, dtype=float) - assemble_f(problem.model, sigma_hat)
    top, _ = lambda_max(gap)
    bottom, _ = lambda_max(-gap)
    data_norm = max(abs(top), abs(bottom))
    if data_norm > delta * (1.0 + 1e-9) + 1e-12:
        raise ValueError(f"data is {data_norm:.3e} from F(sigma_hat), beyond delta={delta:.3e}")
    report = solve(problem)
    lhs = weighted_norm(cert, np.array(report.sigma) - sigma_hat)
    rhs = 2.0 * cert.C * delta / cert.lam
    return BoundCheck(lhs=lhs, rhs=rhs, holds=lhs <= rhs + tol, report=report)
