"""Request handlers shared by the HTTP app and the in-process CLI dispatch.

Each handler turns a validated schema into core-library calls and wraps the
outcome back into a response model.  Domain failures propagate as the core
exceptions; the transport layers translate them (HTTP status codes on the
service side, exit codes on the command line).
"""
from __future__ import annotations

import math
from dataclasses import asdict

import numpy as np

from ..baseline import LMOptions
from ..calibration import (
    Box,
    CalibrationCertificate,
    SampleSpec,
    calibrate,
    certificate_from_dict,
    certificate_to_dict,
    load_certificate,
    sample_box,
    verify_certificate,
)
from ..convex_solver import ConvexProblem, solve
from ..experiments import (
    SuiteResult,
    basins_grid,
    landscape_grid,
    noise_bound_trials,
    run_property_suites,
)
from ..forward import Geometry, ntd_spectrum
from ..measurement import DimensionMismatch, MeasurementModel, assemble_f, spectral_noise
from ..render import config_hash
from ..symlinalg import check_symmetric
from .schemas import (
    BasinsResponse,
    CalibrateResponse,
    ExperimentConfig,
    ForwardRequest,
    ForwardResponse,
    LandscapeResponse,
    NoiseTrialModel,
    PropertiesResponse,
    ReportModel,
    SolveRequest,
    SolveResponse,
    SuiteModel,
    VerificationModel,
)

FIGURE_M = 6
RECOVERY_M = 20


def hash_of(config: ExperimentConfig) -> str:
    """Experiment identity: every config field except artifact placement and parallelism."""
    return config_hash(config.model_dump(mode="json", exclude={"out_dir", "workers"}))


def build_model(config: ExperimentConfig, default_m: int) -> MeasurementModel:
    geometry = Geometry(config.radii)
    return MeasurementModel(geometry, config.m if config.m is not None else default_m)


def free_layers(config: ExperimentConfig) -> list[int]:
    """Zero-based indices of layers not pinned by the config."""
    return [i for i in range(config.n_layers) if (i + 1) not in config.pinned]


def resolve_box(config: ExperimentConfig) -> Box:
    """Explicit box bounds if given, else pins plus the default free interval."""
    if config.box_lower is not None:
        return Box(lower=config.box_lower, upper=config.box_upper)
    lower = []
    upper = []
    for layer in range(1, config.n_layers + 1):
        if layer in config.pinned:
            lower.append(config.pinned[layer])
            upper.append(config.pinned[layer])
        else:
            lower.append(config.free_lower)
            upper.append(config.free_upper)
    return Box(lower=tuple(lower), upper=tuple(upper))


def _free_pair(config: ExperimentConfig) -> tuple[int, int]:
    free = free_layers(config)
    if len(free) != 2:
        raise ValueError(f"grid experiments need exactly 2 free layers, config has {len(free)}")
    return free[0], free[1]


def _axes(config: ExperimentConfig, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    (lo1, hi1), (lo2, hi2) = config.grid_range
    return np.linspace(lo1, hi1, resolution), np.linspace(lo2, hi2, resolution)


def handle_forward(request: ForwardRequest) -> ForwardResponse:
    geometry = Geometry(request.radii)
    model = MeasurementModel(geometry, request.m)
    matrix = assemble_f(model, request.sigma)
    values = ntd_spectrum(geometry, request.sigma, model.n_modes)
    return ForwardResponse(matrix=matrix.tolist(), eigenvalues=[float(v) for v in values])


def handle_landscape(config: ExperimentConfig) -> LandscapeResponse:
    model = build_model(config, FIGURE_M)
    pair = _free_pair(config)
    axis1, axis2 = _axes(config, config.landscape_resolution)
    y_hat = assemble_f(model, config.sigma_hat)
    result = landscape_grid(
        model,
        y_hat,
        config.sigma_hat,
        pair,
        axis1,
        axis2,
        threshold=config.residual_threshold,
    )
    return LandscapeResponse(
        config_hash=hash_of(config),
        axis1=result.axis1.tolist(),
        axis2=result.axis2.tolist(),
        values=result.values.tolist(),
        free_layers=(pair[0] + 1, pair[1] + 1),
        minima_total=result.minima_total,
        minima_above=result.minima_above,
        threshold=result.threshold,
    )


def handle_basins(config: ExperimentConfig) -> BasinsResponse:
    model = build_model(config, FIGURE_M)
    pair = _free_pair(config)
    axis1, axis2 = _axes(config, config.basins_resolution)
    y_hat = assemble_f(model, config.sigma_hat)
    opts = LMOptions(box_mode=config.lm_box_mode, max_iterations=config.lm_max_iterations)
    result = basins_grid(
        model,
        y_hat,
        config.sigma_hat,
        pair,
        axis1,
        axis2,
        opts=opts,
        good_threshold=config.good_threshold,
        bad_threshold=config.bad_threshold,
        workers=config.workers,
    )
    return BasinsResponse(
        config_hash=hash_of(config),
        axis1=result.axis1.tolist(),
        axis2=result.axis2.tolist(),
        errors=result.errors.tolist(),
        free_layers=(pair[0] + 1, pair[1] + 1),
        n_good=result.n_good,
        n_bad=result.n_bad,
        n_diverged=result.n_diverged,
        fraction_bad=result.fraction_bad,
    )


def handle_calibrate(config: ExperimentConfig) -> CalibrateResponse:
    model = build_model(config, RECOVERY_M)
    box = resolve_box(config)
    spec = SampleSpec(grid=config.grid_samples, random=config.random_samples, seed=config.seed)
    cert = calibrate(model, box, spec, epsilon=config.epsilon)
    fresh = SampleSpec(
        grid=2 * config.grid_samples,
        random=config.random_samples,
        seed=config.seed + 1,
    )
    verification = verify_certificate(cert, model, sample_box(box, fresh))
    return CalibrateResponse(
        config_hash=hash_of(config),
        certificate=certificate_to_dict(cert),
        verification=VerificationModel(
            min_definiteness=verification.min_definiteness,
            lambda_claimed=verification.lambda_claimed,
            violations=verification.violations,
            lambda_upheld=verification.lambda_upheld,
            ok=verification.ok,
        ),
    )


def _load_cert(request: SolveRequest) -> CalibrationCertificate | None:
    if request.certificate is not None:
        return certificate_from_dict(request.certificate)
    if request.config.certificate_path is not None:
        return load_certificate(request.config.certificate_path)
    return None


def _parse_inline_matrix(text: str) -> np.ndarray:
    rows = [[float(tok) for tok in line.split(",")] for line in text.strip().splitlines()]
    if not rows or any(len(r) != len(rows) for r in rows):
        raise DimensionMismatch("inline data is not a square matrix")
    return check_symmetric(np.array(rows, dtype=float))


def _report_model(report) -> ReportModel:
    return ReportModel(
        sigma=report.sigma,
        objective=report.objective,
        feasibility=report.feasibility,
        iterations=report.iterations,
        backend=report.backend,
        converged=report.converged,
        status=report.status,
    )


def handle_solve(request: SolveRequest) -> SolveResponse:
    config = request.config
    model = build_model(config, RECOVERY_M)
    cert = _load_cert(request)
    cost_source = "certificate" if cert is not None else "uniform"
    box = cert.box if cert is not None else resolve_box(config)
    cost = cert.cost if cert is not None else tuple(1.0 for _ in range(config.n_layers))
    sigma_hat = np.asarray(config.sigma_hat, dtype=float)

    if request.trials is not None and request.delta > 0.0:
        if cert is None:
            raise ValueError("noise trials need a calibration certificate for the bound")
        rows = noise_bound_trials(
            model,
            cert,
            sigma_hat,
            deltas=(request.delta,),
            trials=request.trials,
            seed=config.seed,
            workers=config.workers,
        )
        models = [NoiseTrialModel(**asdict(row)) for row in rows]
        return SolveResponse(
            config_hash=hash_of(config),
            mode="trials",
            cost_source=cost_source,
            rows=models,
            all_hold=all(r.holds for r in rows),
        )

    if request.y_source == "inline":
        y = _parse_inline_matrix(request.y_csv)
    else:
        y = assemble_f(model, sigma_hat)
        if request.delta > 0.0:
            rng = np.random.default_rng(config.seed)
            y = y + spectral_noise(model.m, request.delta, rng)
    problem = ConvexProblem(model=model, y=y, box=box, cost=cost, slack=request.delta)
    report = solve(problem, backend=config.backend)
    gap = np.asarray(report.sigma) - sigma_hat
    weighted = None
    if cert is not None:
        weighted = float(np.max(np.abs(gap) * np.asarray(cert.cost)))
    return SolveResponse(
        config_hash=hash_of(config),
        mode="single",
        cost_source=cost_source,
        report=_report_model(report),
        error_weighted=weighted,
        error_euclidean=float(np.linalg.norm(gap)),
    )


def _suite_model(suite: SuiteResult) -> SuiteModel:
    worst = None if not math.isfinite(suite.worst) else suite.worst
    return SuiteModel(
        name=suite.name,
        trials=suite.trials,
        failures=suite.failures,
        worst=worst,
        skipped=suite.skipped,
        note=suite.note,
        passed=suite.passed,
    )


def handle_properties(config: ExperimentConfig, jacobian_transform=None) -> PropertiesResponse:
    model = build_model(config, RECOVERY_M)
    cost = None
    if config.certificate_path is not None:
        cost = load_certificate(config.certificate_path).cost
    suites = run_property_suites(
        model,
        seed=config.seed,
        trials=config.property_trials,
        cost=cost,
        jacobian_transform=jacobian_transform,
    )
    return PropertiesResponse(
        config_hash=hash_of(config),
        suites=[_suite_model(s) for s in suites],
        all_pass=all(s.passed for s in suites),
    )
