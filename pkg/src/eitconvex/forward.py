"""Forward model for radially layered conductivities on the unit disk.

The conductivity is piecewise constant on ``n`` concentric annular layers
separated by radii ``1 > rho_1 > ... > rho_{n-1} > 0`` (layer 1 touches the
boundary, layer ``n`` is the central disk).  For such profiles the
Neumann-to-Dirichlet map diagonalizes over trigonometric boundary modes, and
the eigenvalue of angular mode ``j`` is obtained from a harmonic ansatz
``alpha_i r^j + beta_i r^{-j}`` per layer, matched across interfaces by
continuity of the potential and of the radial flux.

The production path propagates a single reflection coefficient
``B = (beta / alpha) * r^{-2j}`` outward from the center.  Each interface maps
``B`` through a Moebius-type update and each annulus crossing multiplies it by
``(rho_in / rho_out)^{2j} < 1``, so the recursion is overflow-free for every
mode order and keeps ``|B| < 1`` throughout.  Gradients with respect to the
layer values are propagated alongside as tangents of the same recursion.

All computational routines broadcast over leading batch axes of the
conductivity array; scalar wrappers provide the single-profile interface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """Geometry, conductivity, or mode order outside the admissible domain."""


@dataclass(frozen=True)
class Geometry:
    """Concentric layer geometry: interface radii, strictly decreasing in (0, 1).

    An empty radius tuple describes the homogeneous disk (one layer).
    """

    radii: tuple[float, ...]

    def __post_init__(self) -> None:
        radii = tuple(float(r) for r in self.radii)
        object.__setattr__(self, "radii", radii)
        for r in radii:
            if not math.isfinite(r) or not 0.0 < r < 1.0:
                raise DomainError(f"interface radius {r} outside (0, 1)")
        if any(a <= b for a, b in zip(radii, radii[1:])):
            raise DomainError(f"interface radii must be strictly decreasing, got {radii}")

    @property
    def n_layers(self) -> int:
        return len(self.radii) + 1


def _check_mode(mode: int) -> int:
    if not isinstance(mode, (int, np.integer)) or isinstance(mode, bool) or mode < 1:
        raise DomainError(f"mode order must be a positive integer, got {mode!r}")
    return int(mode)


def _as_sigma(geometry: Geometry, sigma) -> np.ndarray:
    arr = np.asarray(sigma, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] != geometry.n_layers:
        raise DomainError(
            f"conductivity needs {geometry.n_layers} layer values, got shape {arr.shape}"
        )
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise DomainError("layer conductivities must be finite and positive")
    return arr


def _spectrum(radii: tuple[float, ...], sig: np.ndarray, modes: np.ndarray, grad: bool):
    """Reflection recursion over all interfaces, vectorized over batch and mode axes.

    ``sig`` has shape ``(..., n)``, ``modes`` shape ``(M,)``; returns eigenvalues of
    shape ``(..., M)`` and, when ``grad`` is set, tangents of shape ``(..., M, n)``.
    """
    n = sig.shape[-1]
    batch = sig.shape[:-1]
    B = np.zeros(batch + (modes.size,))
    dB = np.zeros(batch + (modes.size, n)) if grad else None
    for i in range(n - 1, 0, -1):
        # Interface at radii[i-1], inner layer index i, outer layer index i-1 (0-based).
        s_in = sig[..., i]
        s_out = sig[..., i - 1]
        kappa = (s_in / s_out)[..., None]
        p = 1.0 + B
        q = kappa * (1.0 - B)
        denom = p + q
        B_new = (p - q) / denom
        if grad:
            dkappa = np.zeros(batch + (n,))
            dkappa[..., i] = 1.0 / s_out
            dkappa[..., i - 1] = -s_in / s_out**2
            dk = dkappa[..., None, :]
            dq = dk * (1.0 - B)[..., None] - kappa[..., None] * dB
            dB = ((dB - dq) * denom[..., None] - (p - q)[..., None] * (dB + dq)) / (
                denom**2
            )[..., None]
        B = B_new
        r_out = radii[i - 2] if i >= 2 else 1.0
        f = (radii[i - 1] / r_out) ** (2.0 * modes)
        B = B * f
        if grad:
            dB = dB * f[..., None]
    s1 = sig[..., 0]
    g = modes * s1[..., None] * (1.0 - B)
    lam = (1.0 + B) / g
    if not grad:
        return lam, None
    e0 = np.zeros(n)
    e0[0] = 1.0
    dg = modes[:, None] * (e0 * (1.0 - B)[..., None] - s1[..., None, None] * dB)
    dlam = (dB * g[..., None] - (1.0 + B)[..., None] * dg) / (g**2)[..., None]
    return lam, dlam


def _spectrum_curvature(radii: tuple[float, ...], sig: np.ndarray, modes: np.ndarray):
    """Reflection recursion with first and second layer tangents.

    Kept separate from :func:`_spectrum` so the plain and gradient paths stay
    byte-for-byte stable; this variant additionally propagates the symmetric
    second-derivative stack, shape ``(..., M, n, n)``.
    """
    n = sig.shape[-1]
    batch = sig.shape[:-1]
    B = np.zeros(batch + (modes.size,))
    dB = np.zeros(batch + (modes.size, n))
    d2B = np.zeros(batch + (modes.size, n, n))
    for i in range(n - 1, 0, -1):
        s_in = sig[..., i]
        s_out = sig[..., i - 1]
        k0 = s_in / s_out
        dkappa = np.zeros(batch + (n,))
        dkappa[..., i] = 1.0 / s_out
        dkappa[..., i - 1] = -s_in / s_out**2
        d2kappa = np.zeros(batch + (n, n))
        d2kappa[..., i, i - 1] = -1.0 / s_out**2
        d2kappa[..., i - 1, i] = -1.0 / s_out**2
        d2kappa[..., i - 1, i - 1] = 2.0 * s_in / s_out**3
        kap = k0[..., None]
        one_m = (1.0 - B)[..., None]
        dk = dkappa[..., None, :]
        d2k = d2kappa[..., None, :, :]
        N = 1.0 + B - k0[..., None] * (1.0 - B)
        D = 1.0 + B + k0[..., None] * (1.0 - B)
        dN = (1.0 + kap) * dB - one_m * dk
        dD = (1.0 - kap) * dB + one_m * dk
        cross = dk[..., :, None] * dB[..., None, :] + dB[..., :, None] * dk[..., None, :]
        kmat = k0[..., None, None, None]
        one_mm = (1.0 - B)[..., None, None]
        d2N = (1.0 + kmat) * d2B + cross - one_mm * d2k
        d2D = (1.0 - kmat) * d2B - cross + one_mm * d2k
        Dm = D[..., None]
        Dmm = D[..., None, None]
        Nmm = N[..., None, None]
        sym = dN[..., :, None] * dD[..., None, :] + dD[..., :, None] * dN[..., None, :]
        d2B = d2N / Dmm - sym / Dmm**2 - Nmm * d2D / Dmm**2 + 2.0 * Nmm * (
            dD[..., :, None] * dD[..., None, :]
        ) / Dmm**3
        dB = (dN * Dm - N[..., None] * dD) / Dm**2
        B = N / D
        r_out = radii[i - 2] if i >= 2 else 1.0
        f = (radii[i - 1] / r_out) ** (2.0 * modes)
        B = B * f
        dB = dB * f[..., None]
        d2B = d2B * f[..., None, None]
    s1 = sig[..., 0]
    a = 1.0 / (modes * s1[..., None])
    da = -1.0 / (modes * s1[..., None] ** 2)
    d2a = 2.0 / (modes * s1[..., None] ** 3)
    h = (1.0 + B) / (1.0 - B)
    h1 = 2.0 / (1.0 - B) ** 2
    h2 = 4.0 / (1.0 - B) ** 3
    lam = a * h
    e0 = np.zeros(n)
    e0[0] = 1.0
    dlam = (da * h)[..., None] * e0 + a[..., None] * h1[..., None] * dB
    mix = e0[:, None] * dB[..., None, :] + dB[..., :, None] * e0[None, :]
    d2lam = (
        (d2a * h)[..., None, None] * np.outer(e0, e0)
        + (da * h1)[..., None, None] * mix
        + a[..., None, None] * (h2[..., None, None] * dB[..., :, None] * dB[..., None, :] + h1[..., None, None] * d2B)
    )
    return lam, dlam, d2lam


def ntd_curvature(geometry: Geometry, sigma, n_modes: int):
    """Eigenvalues with first and second derivatives in the layer values.

    Returns ``(lam, dlam, d2lam)`` with the mode axis before the layer axes;
    the second-derivative stack is symmetric in its two trailing axes.
    """
    if n_modes < 1:
        raise DomainError(f"need at least one mode, got {n_modes}")
    sig = _as_sigma(geometry, sigma)
    modes = np.arange(1, n_modes + 1, dtype=float)
    return _spectrum_curvature(geometry.radii, sig, modes)


def ntd_spectrum(geometry: Geometry, sigma, n_modes: int, gradients: bool = False):
    """Eigenvalues of modes ``1..n_modes``; optionally layer gradients alongside.

    ``sigma`` may carry leading batch axes; the mode axis is appended last and,
    for gradients, the layer axis after it.
    """
    if n_modes < 1:
        raise DomainError(f"need at least one mode, got {n_modes}")
    sig = _as_sigma(geometry, sigma)
    modes = np.arange(1, n_modes + 1, dtype=float)
    lam, dlam = _spectrum(geometry.radii, sig, modes, gradients)
    return (lam, dlam) if gradients else lam


def ntd_eigenvalue(geometry: Geometry, sigma, mode: int) -> float:
    """Neumann-to-Dirichlet eigenvalue of angular mode ``j >= 1``."""
    j = _check_mode(mode)
    sig = _as_sigma(geometry, sigma)
    if sig.ndim != 1:
        raise DomainError("ntd_eigenvalue expects a single profile; use ntd_spectrum for batches")
    lam, _ = _spectrum(geometry.radii, sig, np.array([float(j)]), grad=False)
    return float(lam[0])


def ntd_gradient(geometry: Geometry, sigma, mode: int) -> np.ndarray:
    """Gradient of the mode-``j`` eigenvalue with respect to the layer values."""
    j = _check_mode(mode)
    sig = _as_sigma(geometry, sigma)
    if sig.ndim != 1:
        raise DomainError("ntd_gradient expects a single profile")
    _, dlam = _spectrum(geometry.radii, sig, np.array([float(j)]), grad=True)
    return dlam[0].copy()


@dataclass(frozen=True)
class LayerCoefficients:
    """Harmonic ansatz coefficients ``alpha_i r^j + beta_i r^{-j}`` per layer.

    The tuple is determined up to one global factor; ``scale`` carries that
    freedom explicitly and the innermost pair is pinned to ``(1, 0)`` so the
    central solution stays bounded.  Intended for inspection and testing at
    moderate mode orders (the absolute coefficients involve ``rho^{-j}``).
    """

    mode: int
    alphas: tuple[float, ...]
    betas: tuple[float, ...]
    scale: float = 1.0

    def eigenvalue(self, sigma1: float) -> float:
        """Boundary eigenvalue implied by the outermost pair; scale-invariant."""
        a1, b1 = self.alphas[0], self.betas[0]
        return (a1 + b1) / (self.mode * sigma1 * (a1 - b1))


def layer_coefficients(geometry: Geometry, sigma, mode: int) -> LayerCoefficients:
    """Absolute ansatz coefficients via direct interface matching.

    Organized differently from the reflection recursion on purpose: this path
    works with unnormalized pairs and serves as an independent consistency
    check (interface continuity can be verified on the result directly).
    """
    j = _check_mode(mode)
    sig = _as_sigma(geometry, sigma)
    if sig.ndim != 1:
        raise DomainError("layer_coefficients expects a single profile")
    n = geometry.n_layers
    alphas = [0.0] * n
    betas = [0.0] * n
    alphas[n - 1] = 1.0
    betas[n - 1] = 0.0
    for i in range(n - 2, -1, -1):
        rho = geometry.radii[i]
        rj = rho**j
        a_in, b_in = alphas[i + 1], betas[i + 1]
        value = a_in * rj + b_in / rj
        flux = (sig[i + 1] / sig[i]) * (a_in * rj - b_in / rj)
        alphas[i] = (value + flux) / (2.0 * rj)
        betas[i] = (value - flux) * rj / 2.0
    return LayerCoefficients(mode=j, alphas=tuple(alphas), betas=tuple(betas))
