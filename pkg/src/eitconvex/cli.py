"""Command-line harness for the experiment suite.

By default every subcommand dispatches in process through the same handlers
the HTTP service exposes; ``--server URL`` routes the identical request
through a running service instead, and artifacts are always written client
side so both transports produce the same files.

Exit codes: 0 success, 2 infeasible program or missing definiteness,
3 property or certified-bound failure, 1 other errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx
import numpy as np

from .calibration import NoDefiniteness
from .convex_solver import InfeasibleStart
from .forward import DomainError
from .measurement import DimensionMismatch
from .render import grid_rows, heatmap_svg, write_grid_csv, write_jsonl
from .service import handlers
from .service.schemas import (
    BasinsResponse,
    CalibrateResponse,
    ExperimentConfig,
    LandscapeResponse,
    PropertiesResponse,
    SolveRequest,
    SolveResponse,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_PROPERTY = 3


def _exception_for(detail: dict) -> Exception:
    message = detail.get("message", "request rejected")
    code = detail.get("error")
    if code == "no-definiteness":
        return NoDefiniteness(message, int(detail.get("layer", 0)))
    if code == "infeasible":
        return InfeasibleStart(message)
    return ValueError(message)


class Client:
    """Dispatches requests in process or against a service URL."""

    def __init__(self, server: str | None):
        self.server = server.rstrip("/") if server else None

    def _post(self, route: str, payload: dict) -> dict:
        response = httpx.post(self.server + route, json=payload, timeout=600.0)
        if response.status_code == 422:
            raise _exception_for(response.json().get("detail", {}))
        response.raise_for_status()
        return response.json()

    def landscape(self, config: ExperimentConfig) -> LandscapeResponse:
        if self.server is None:
            return handlers.handle_landscape(config)
        return LandscapeResponse(**self._post("/landscape", config.model_dump(mode="json")))

    def basins(self, config: ExperimentConfig) -> BasinsResponse:
        if self.server is None:
            return handlers.handle_basins(config)
        return BasinsResponse(**self._post("/basins", config.model_dump(mode="json")))

    def calibrate(self, config: ExperimentConfig) -> CalibrateResponse:
        if self.server is None:
            return handlers.handle_calibrate(config)
        return CalibrateResponse(**self._post("/calibrate", config.model_dump(mode="json")))

    def solve(self, request: SolveRequest) -> SolveResponse:
        if self.server is None:
            return handlers.handle_solve(request)
        return SolveResponse(**self._post("/solve", request.model_dump(mode="json")))

    def properties(self, config: ExperimentConfig) -> PropertiesResponse:
        if self.server is None:
            return handlers.handle_properties(config)
        return PropertiesResponse(**self._post("/properties", config.model_dump(mode="json")))


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file plus flag overrides; flags win."""
    data: dict = {}
    if args.config:
        data = json.loads(Path(args.config).read_text())
    if args.m is not None:
        data["m"] = args.m
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["out_dir"] = args.out
    if getattr(args, "delta", None) is not None:
        data["deltas"] = (args.delta,)
    return ExperimentConfig(**data)


def _out_dir(config: ExperimentConfig) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_landscape(args: argparse.Namespace) -> int:
    config = load_config(args)
    response = Client(args.server).landscape(config)
    out = _out_dir(config)
    values = np.array(response.values)
    labels = (f"sigma_{response.free_layers[0]}", f"sigma_{response.free_layers[1]}")
    write_grid_csv(
        out / "landscape.csv",
        (*labels, "residual"),
        grid_rows(response.axis1, response.axis2, values),
        response.config_hash,
    )
    heatmap_svg(
        out / "landscape.svg",
        values,
        extent=(response.axis1[0], response.axis1[-1], response.axis2[0], response.axis2[-1]),
        clip=config.clip_residual,
        axis_labels=labels,
        title="least-squares residual",
    )
    print(f"strict local minima: {response.minima_total} (above {response.threshold:g}: {response.minima_above})")
    print(f"wrote {out / 'landscape.csv'} and {out / 'landscape.svg'}")
    return EXIT_OK


def cmd_basins(args: argparse.Namespace) -> int:
    config = load_config(args)
    response = Client(args.server).basins(config)
    out = _out_dir(config)
    errors = np.array(response.errors)
    labels = (f"sigma_{response.free_layers[0]}", f"sigma_{response.free_layers[1]}")
    write_grid_csv(
        out / "basins.csv",
        (*labels, "error"),
        grid_rows(response.axis1, response.axis2, errors),
        response.config_hash,
    )
    heatmap_svg(
        out / "basins.svg",
        errors,
        extent=(response.axis1[0], response.axis1[-1], response.axis2[0], response.axis2[-1]),
        clip=config.clip_error,
        axis_labels=labels,
        title="final-iterate error",
    )
    total = errors.size
    print(
        f"initializations: {total}, good {response.n_good}, bad {response.n_bad} "
        f"(fraction {response.fraction_bad:.4f}), diverged {response.n_diverged}"
    )
    print(f"wrote {out / 'basins.csv'} and {out / 'basins.svg'}")
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    config = load_config(args)
    response = Client(args.server).calibrate(config)
    out = _out_dir(config)
    cert_path = out / "certificate.json"
    cert_path.write_text(json.dumps(response.certificate, indent=2) + "\n")
    ver = response.verification
    print(f"lambda = {response.certificate['lambda']:.12e}, cost = {response.certificate['c']}")
    print(
        f"verification: min definiteness {ver.min_definiteness:.6e}, "
        f"violations {list(ver.violations)}, lambda upheld {ver.lambda_upheld}"
    )
    print(f"wrote {cert_path}")
    if not ver.ok:
        print("certificate failed fresh-grid verification", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    config = load_config(args)
    certificate = None
    if args.certificate:
        certificate = json.loads(Path(args.certificate).read_text())
    elif config.certificate_path:
        certificate = json.loads(Path(config.certificate_path).read_text())
    request = SolveRequest(
        config=config,
        delta=args.delta if args.delta is not None else 0.0,
        y_source="inline" if args.y else "exact",
        y_csv=Path(args.y).read_text() if args.y else None,
        certificate=certificate,
        trials=args.trials,
    )
    response = Client(args.server).solve(request)
    out = _out_dir(config)
    if response.mode == "trials":
        rows = [row.model_dump(mode="json") for row in response.rows]
        write_jsonl(out / "noise_trials.jsonl", rows)
        held = sum(1 for row in response.rows if row.holds)
        print(f"bound held in {held}/{len(response.rows)} trials (cost from {response.cost_source})")
        print(f"wrote {out / 'noise_trials.jsonl'}")
        return EXIT_OK if response.all_hold else EXIT_PROPERTY
    report = response.report
    write_jsonl(out / "solve_report.jsonl", [report.model_dump(mode="json")])
    print(json.dumps(report.model_dump(mode="json"), sort_keys=True))
    print(f"cost from {response.cost_source}")
    if response.error_euclidean is not None:
        print(f"recovery error (euclidean): {response.error_euclidean:.6e}")
    if response.error_weighted is not None:
        print(f"recovery error (weighted max): {response.error_weighted:.6e}")
    print(f"wrote {out / 'solve_report.jsonl'}")
    if not report.converged:
        print(f"solver stopped without convergence: {report.status}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_properties(args: argparse.Namespace) -> int:
    config = load_config(args)
    response = Client(args.server).properties(config)
    out = _out_dir(config)
    write_jsonl(out / "properties.jsonl", [s.model_dump(mode="json") for s in response.suites])
    for suite in response.suites:
        if suite.skipped:
            print(f"{suite.name}: skipped ({suite.note})")
        else:
            verdict = "pass" if suite.passed else "FAIL"
            print(f"{suite.name}: {verdict} ({suite.failures}/{suite.trials} failures, worst {suite.worst:.3e})")
    print(f"wrote {out / 'properties.jsonl'}")
    return EXIT_OK if response.all_pass else EXIT_PROPERTY


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config; flags override its fields")
    common.add_argument("--server", help="service URL; default runs in process")
    common.add_argument("--m", type=int, help="measurement count override")
    common.add_argument("--seed", type=int, help="seed override")
    common.add_argument("--out", help="output directory override")

    parser = argparse.ArgumentParser(
        prog="eitconvex",
        description="Layered-disk conductivity experiments: landscapes, basins, calibration, recovery.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("landscape", parents=[common], help="sample the least-squares residual surface")
    p.set_defaults(func=cmd_landscape)

    p = sub.add_parser("basins", parents=[common], help="map final-iterate errors of the baseline")
    p.set_defaults(func=cmd_basins)

    p = sub.add_parser("calibrate", parents=[common], help="compute and verify cost weights")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("solve", parents=[common], help="run the convex recovery")
    p.add_argument("--delta", type=float, help="noise level (slack of the constraint)")
    p.add_argument("--trials", type=int, help="Monte-Carlo trials at --delta")
    p.add_argument("--y", help="measurement CSV (row-major symmetric matrix)")
    p.add_argument("--certificate", help="calibration certificate JSON for the cost")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("properties", parents=[common], help="run randomized property suites")
    p.set_defaults(func=cmd_properties)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NoDefiniteness as exc:
        print(f"no definiteness: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InfeasibleStart as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DomainError, DimensionMismatch, ValueError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except httpx.HTTPError as exc:
        print(f"server error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
