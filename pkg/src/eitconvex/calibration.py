"""Offline calibration of cost weights and the stability constant.

The convex recovery program needs a cost vector that makes the feasible-set
minimum sit at the true profile, and a constant that turns measurement error
into a conductivity error bound.  Both come from definiteness properties of
the measurement derivative over the admissible box, checked on a finite sample
set: layer weights ``delta_j`` are built by a backward induction over layers
(outermost weight 1), each step choosing the largest ratio from a halving
schedule that keeps a signed derivative direction from being negative
semidefinite on every sample.  The certificate records the weights, the cost
``c = 1 / delta``, the definiteness constant ``lambda`` realized on the
samples, and the sampling descriptor, and can be re-verified on a fresh,
finer sample set at any time.

Certificates serialize to JSON with shortest round-trip float representations,
so a saved certificate reloads bit-exactly.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .measurement import MeasurementModel, apply_jacobian, assemble_jacobian
from .symlinalg import lambda_max


class NoDefiniteness(RuntimeError):
    """Required derivative definiteness not attained on the sample set."""

    def __init__(self, message: str, layer: int):
        super().__init__(message)
        self.layer = layer


@dataclass(frozen=True)
class Box:
    """Per-layer admissible interval ``[lower_i, upper_i]``; equal bounds pin a layer."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if len(lower) != len(upper) or not lower:
            raise ValueError("box needs matching nonempty lower and upper tuples")
        for a, b in zip(lower, upper):
            if not (np.isfinite(a) and np.isfinite(b)) or a <= 0.0 or b < a:
                raise ValueError(f"invalid layer interval [{a}, {b}]")

    @property
    def n(self) -> int:
        return len(self.lower)

    def pinned(self) -> tuple[int, ...]:
        """0-based indices of layers with degenerate intervals."""
        return tuple(i for i, (a, b) in enumerate(zip(self.lower, self.upper)) if a == b)

    def clip(self, sigma) -> np.ndarray:
        return np.clip(np.asarray(sigma, dtype=float), self.lower, self.upper)

    def contains(self, sigma, tol: float = 0.0) -> bool:
        s = np.asarray(sigma, dtype=float)
        return bool(np.all(s >= np.array(self.lower) - tol) and np.all(s <= np.array(self.upper) + tol))


@dataclass(frozen=True)
class SampleSpec:
    """Sampling descriptor: per-axis grid count and/or seeded uniform draws."""

    grid: int = 3
    random: int = 0
    seed: int = 0
    cap: int = 200_000

    def __post_init__(self) -> None:
        if self.grid < 0 or (self.grid == 1) or self.random < 0:
            raise ValueError("grid count must be 0 or >= 2, random count >= 0")
        if self.grid == 0 and self.random == 0:
            raise ValueError("sample spec selects no points")


@dataclass(frozen=True)
class DirectionVectors:
    """Indicator directions for layer ``j`` (1-based) in an ``n``-layer profile.

    Layer indices increase toward the center, so ``e_minus`` marks the layers
    outside layer j (indices below j) and ``e_plus`` the layers inside it
    (indices above j); ``e_prime = 1 - e = e_plus + e_minus``.
    """

    e: np.ndarray
    e_prime: np.ndarray
    e_plus: np.ndarray
    e_minus: np.ndarray


def directions(n: int, j: int) -> DirectionVectors:
    if not 1 <= j <= n:
        raise ValueError(f"layer {j} outside 1..{n}")
    e = np.zeros(n)
    e[j - 1] = 1.0
    e_plus = np.zeros(n)
    e_plus[j:] = 1.0
    e_minus = np.zeros(n)
    e_minus[: j - 1] = 1.0
    return DirectionVectors(e=e, e_prime=e_plus + e_minus, e_plus=e_plus, e_minus=e_minus)


def axis_points(lo: float, hi: float, count: int) -> np.ndarray:
    """Uniform axis with exact endpoint and power-of-two refinement behavior.

    Computed as ``lo + k * (hi - lo) / (count - 1)`` so that doubling the
    interval count reproduces the coarse nodes bit-exactly.
    """
    if count < 2:
        raise ValueError(f"axis needs at least 2 points, got {count}")
    step = (hi - lo) / (count - 1)
    pts = lo + step * np.arange(count, dtype=float)
    pts[-1] = hi
    return pts


def sample_box(box: Box, spec: SampleSpec) -> np.ndarray:
    """Deterministic sample profiles in the box, shape ``(N, n)``.

    Grid points come first in row-major axis order (corners included), then
    the seeded uniform draws.  Degenerate axes contribute their single value.
    """
    rows = []
    if spec.grid:
        axes = [
            np.array([a]) if a == b else axis_points(a, b, spec.grid)
            for a, b in zip(box.lower, box.upper)
        ]
        count = 1
        for pts in axes:
            count *= len(pts)
        if count > spec.cap:
            raise ValueError(f"grid sample count {count} exceeds cap {spec.cap}")
        rows.extend(np.array(combo) for combo in itertools.product(*axes))
    if spec.random:
        rng = np.random.default_rng(spec.seed)
        draws = rng.uniform(box.lower, box.upper, size=(spec.random, box.n))
        rows.extend(draws)
    return np.array(rows)


def definiteness(stack: np.ndarray, direction) -> float:
    """Largest eigenvalue of ``-F'(sigma) d`` from a precomputed Jacobian stack."""
    value, _ = lambda_max(-apply_jacobian(stack, direction))
    return value


def jacobian_stacks(model: MeasurementModel, samples: np.ndarray) -> list[np.ndarray]:
    return [assemble_jacobian(model, s) for s in samples]


def default_margin(stacks: list[np.ndarray]) -> float:
    """Definiteness floor: 1e-6 times the largest all-ones directional derivative norm."""
    ones_scale = max(float(np.linalg.norm(np.sum(st, axis=0))) for st in stacks)
    return 1e-6 * ones_scale


_SCHEDULE_STEPS = 40


def find_delta(
    model: MeasurementModel,
    samples: np.ndarray,
    j: int,
    C: float,
    w_plus: float,
    epsilon: float,
    stacks: list[np.ndarray] | None = None,
) -> float:
    """Largest ratio ``delta' in (0, C]`` keeping the layer-``j`` test direction definite.

    The direction is ``e_j - delta' e_j^- - w_plus e_j^+``; passing means
    ``lambda_max(-F'(sigma) d) >= epsilon`` on every sample.  Decreasing
    ``delta'`` only helps (the direction grows componentwise and the
    derivative is direction-monotone), so the halving schedule
    ``C, C/2, C/4, ...`` is scanned for the first pass and the result is
    refined by one bisection step against the last failing value.  For the
    outermost layer ``j = 1`` the outer block is empty, the ratio multiplies
    nothing, and ``C`` is returned directly.
    """
    n = model.n_layers
    if j == 1:
        return C
    if stacks is None:
        stacks = jacobian_stacks(model, samples)
    vecs = directions(n, j)

    def passes(ratio: float) -> bool:
        d = vecs.e - ratio * vecs.e_minus - w_plus * vecs.e_plus
        return min(definiteness(st, d) for st in stacks) >= epsilon

    if not passes(0.0):
        # Even the ratio -> 0 limit lacks definiteness; no schedule value can help.
        raise NoDefiniteness(f"layer {j}: m too small or margin too large", layer=j)
    ratio = C
    for _ in range(_SCHEDULE_STEPS):
        if passes(ratio):
            if ratio == C:
                return ratio
            mid = 1.5 * ratio  # midpoint of [ratio, 2 ratio], the last failing bracket
            return mid if passes(mid) else ratio
        ratio /= 2.0
    raise NoDefiniteness(f"layer {j}: m too small or margin too large", layer=j)


@dataclass(frozen=True)
class CalibrationCertificate:
    """Frozen output of :func:`calibrate`; sufficient to re-verify from scratch."""

    deltas: tuple[float, ...]
    cost: tuple[float, ...]
    lam: float
    C: float
    m: int
    box: Box
    sample_spec: SampleSpec
    epsilon: float

    @property
    def n(self) -> int:
        return len(self.deltas)


def weighted_norm(cert: CalibrationCertificate, v) -> float:
    """Weighted max norm ``max_j c_j |v_j|`` with the certificate's cost weights."""
    arr = np.asarray(v, dtype=float)
    if arr.shape != (cert.n,):
        raise ValueError(f"vector shape {arr.shape} does not match {cert.n} layers")
    return float(np.max(np.abs(arr) * np.array(cert.cost)))


def _lambda_on_stacks(
    n: int, C: float, deltas: np.ndarray, stacks: list[np.ndarray]
) -> tuple[float, int, np.ndarray]:
    """Definiteness constant min over samples and layers; also per-sample minima.

    Returns ``(lambda, worst_layer, per_sample_min)`` where the direction for
    layer j is ``D((n-1) e_j' - e_j)`` with ``D = diag(deltas)``.
    """
    worst = np.inf
    worst_layer = 1
    per_sample = np.full(len(stacks), np.inf)
    for j in range(1, n + 1):
        vecs = directions(n, j)
        d = deltas * (C * vecs.e_prime - vecs.e)
        for idx, st in enumerate(stacks):
            value, _ = lambda_max(apply_jacobian(st, d))
            per_sample[idx] = min(per_sample[idx], value)
            if value < worst:
                worst = value
                worst_layer = j
    return float(worst), worst_layer, per_sample


def calibrate(
    model: MeasurementModel,
    box: Box,
    spec: SampleSpec = SampleSpec(),
    epsilon: float | None = None,
) -> CalibrationCertificate:
    """Build cost weights and the stability constant on a sampled box.

    Backward induction from the innermost layer: ``delta_n = 1`` and
    ``delta_{j-1} = delta_j * delta'_j / C`` with ``delta'_j`` from
    :func:`find_delta`, so the weights are nonincreasing toward the boundary
    layer and ``C``-related ratios between adjacent layers are certified.
    """
    n = model.n_layers
    if box.n != n:
        raise ValueError(f"box has {box.n} layers, model {n}")
    samples = sample_box(box, spec)
    stacks = jacobian_stacks(model, samples)
    margin = default_margin(stacks) if epsilon is None else float(epsilon)
    C = float(n - 1)
    deltas = np.ones(n)
    for j in range(n, 1, -1):
        ratio = find_delta(
            model, samples, j, C, w_plus=C / deltas[j - 1], epsilon=margin, stacks=stacks
        )
        deltas[j - 2] = deltas[j - 1] * ratio / C
    lam, worst_layer, _ = _lambda_on_stacks(n, C, deltas, stacks)
    if lam <= 0.0:
        raise NoDefiniteness(
            f"definiteness constant nonpositive ({lam:.3e}) at layer {worst_layer}",
            layer=worst_layer,
        )
    return CalibrationCertificate(
        deltas=tuple(float(d) for d in deltas),
        cost=tuple(float(1.0 / d) for d in deltas),
        lam=lam,
        C=C,
        m=model.m,
        box=box,
        sample_spec=spec,
        epsilon=margin,
    )


@dataclass(frozen=True)
class VerificationReport:
    """Re-check of a certificate on a fresh sample set."""

    min_definiteness: float
    lambda_claimed: float
    violations: tuple[int, ...]
    lambda_upheld: bool

    @property
    def ok(self) -> bool:
        return not self.violations and self.lambda_upheld


def verify_certificate(
    cert: CalibrationCertificate,
    model: MeasurementModel,
    samples: np.ndarray,
    tol: float = 1e-12,
) -> VerificationReport:
    """Evaluate the certified definiteness on fresh samples.

    A sample violates if its definiteness minimum is nonpositive; the claimed
    ``lambda`` is upheld if no fresh sample drops more than ``tol`` below it.
    The claim is a min over the calibration samples, so finer sample sets may
    legitimately tighten it; ``lambda_upheld`` reports that honestly.
    """
    if model.m != cert.m:
        raise ValueError(f"certificate was built at m={cert.m}, model has m={model.m}")
    stacks = jacobian_stacks(model, samples)
    _, _, per_sample = _lambda_on_stacks(cert.n, cert.C, np.array(cert.deltas), stacks)
    violations = tuple(int(i) for i in np.nonzero(per_sample <= 0.0)[0])
    min_def = float(per_sample.min())
    return VerificationReport(
        min_definiteness=min_def,
        lambda_claimed=cert.lam,
        violations=violations,
        lambda_upheld=min_def >= cert.lam - tol,
    )


def certificate_to_dict(cert: CalibrationCertificate) -> dict:
    return {
        "deltas": list(cert.deltas),
        "c": list(cert.cost),
        "lambda": cert.lam,
        "C": cert.C,
        "m": cert.m,
        "box": {"lower": list(cert.box.lower), "upper": list(cert.box.upper)},
        "sample_spec": {
            "grid": cert.sample_spec.grid,
            "random": cert.sample_spec.random,
            "seed": cert.sample_spec.seed,
        },
        "epsilon": cert.epsilon,
    }


def certificate_from_dict(data: dict) -> CalibrationCertificate:
    return CalibrationCertificate(
        deltas=tuple(float(x) for x in data["deltas"]),
        cost=tuple(float(x) for x in data["c"]),
        lam=float(data["lambda"]),
        C=float(data["C"]),
        m=int(data["m"]),
        box=Box(lower=tuple(data["box"]["lower"]), upper=tuple(data["box"]["upper"])),
        sample_spec=SampleSpec(
            grid=int(data["sample_spec"]["grid"]),
            random=int(data["sample_spec"]["random"]),
            seed=int(data["sample_spec"]["seed"]),
        ),
        epsilon=float(data["epsilon"]),
    )


def save_certificate(path, cert: CalibrationCertificate) -> None:
    Path(path).write_text(json.dumps(certificate_to_dict(cert), indent=2) + "\n")


def load_certificate(path) -> CalibrationCertificate:
    return certificate_from_dict(json.loads(Path(path).read_text()))
