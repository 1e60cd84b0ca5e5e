"""Solver result record shared by the convex and least-squares backends."""

from __future__ import annotations

import json
from dataclasses import dataclass


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one solve.

    ``objective`` is the backend's own merit value (linear cost for the convex
    program, squared residual for least squares).  ``feasibility`` is the
    semidefinite constraint residual and is ``None`` for unconstrained
    backends.  ``converged`` implies the backend's stopping criterion was met;
    ``status`` carries the human-readable reason otherwise.
    """

    sigma: tuple[float, ...]
    objective: float
    feasibility: float | None
    iterations: int
    backend: str
    converged: bool
    status: str = "converged"


def report_to_dict(report: SolveReport) -> dict:
    return {
        "sigma": list(report.sigma),
        "objective": report.objective,
        "feasibility": report.feasibility,
        "iterations": report.iterations,
        "backend": report.backend,
        "converged": report.converged,
        "status": report.status,
    }


def report_from_dict(data: dict) -> SolveReport:
    return SolveReport(
        sigma=tuple(float(x) for x in data["sigma"]),
        objective=float(data["objective"]),
        feasibility=None if data["feasibility"] is None else float(data["feasibility"]),
        iterations=int(data["iterations"]),
        backend=str(data["backend"]),
        converged=bool(data["converged"]),
        status=str(data["status"]),
    )


def report_json_line(report: SolveReport) -> str:
    """One-line JSON form for JSONL experiment logs."""
    return json.dumps(report_to_dict(report), separators=(",", ":"))
