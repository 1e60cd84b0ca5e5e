"""Forward map: closed-form agreement, derivatives, and domain validation."""
from __future__ import annotations

import numpy as np
import pytest

from eitconvex.forward import (
    DomainError,
    Geometry,
    layer_coefficients,
    ntd_curvature,
    ntd_eigenvalue,
    ntd_gradient,
    ntd_spectrum,
)

from _oracles import homogeneous_eigenvalue, two_interface_eigenvalue


class TestHomogeneous:
    def test_uniform_disk_any_layer_split(self):
        splits = [(), (0.5,), (0.5, 0.25), (0.8, 0.5, 0.2), (0.9, 0.7, 0.5, 0.3)]
        for radii in splits:
            geometry = Geometry(radii)
            n = geometry.n_layers
            for s in (0.5, 1.0, 2.0):
                sigma = (s,) * n
                for j in (1, 2, 5, 17, 50):
                    got = ntd_eigenvalue(geometry, sigma, j)
                    assert got == pytest.approx(homogeneous_eigenvalue(s, j), abs=1e-12)

    def test_spectrum_matches_scalar_calls(self, benchmark_geometry):
        sigma = (1.0, 1.3, 0.7)
        values = ntd_spectrum(benchmark_geometry, sigma, 6)
        for j in range(1, 7):
            assert values[j - 1] == pytest.approx(ntd_eigenvalue(benchmark_geometry, sigma, j), abs=1e-15)


class TestTwoInterfaceClosedForm:
    def test_matches_explicit_coefficients(self, benchmark_geometry):
        rng = np.random.default_rng(42)
        for _ in range(20):
            mid, inner = rng.uniform(0.5, 2.0, 2)
            for j in range(1, 11):
                expected = two_interface_eigenvalue(0.5, 0.25, mid, inner, j)
                got = ntd_eigenvalue(benchmark_geometry, (1.0, mid, inner), j)
                assert got == pytest.approx(expected, abs=1e-12)

    def test_layer_coefficients_reproduce_eigenvalue(self, benchmark_geometry):
        sigma = (1.0, 1.4, 0.6)
        for j in (1, 2, 3, 8):
            coeffs = layer_coefficients(benchmark_geometry, sigma, j)
            alpha = coeffs.alphas[0]
            beta = coeffs.betas[0]
            lam = (alpha + beta) / (j * (alpha - beta))
            assert lam == pytest.approx(ntd_eigenvalue(benchmark_geometry, sigma, j), rel=1e-12)


class TestDerivatives:
    def test_gradient_against_central_differences(self, benchmark_geometry):
        rng = np.random.default_rng(3)
        h = 1e-6
        for _ in range(10):
            sigma = rng.uniform(0.5, 2.0, 3)
            for j in (1, 3, 7):
                grad = ntd_gradient(benchmark_geometry, sigma, j)
                for i in range(3):
                    step = np.zeros(3)
                    step[i] = h
                    fd = (
                        ntd_eigenvalue(benchmark_geometry, sigma + step, j)
                        - ntd_eigenvalue(benchmark_geometry, sigma - step, j)
                    ) / (2 * h)
                    assert grad[i] == pytest.approx(fd, rel=1e-5, abs=1e-10)

    def test_gradient_strictly_negative(self, benchmark_geometry):
        rng = np.random.default_rng(11)
        for _ in range(50):
            sigma = rng.uniform(0.3, 3.0, 3)
            for j in (1, 2, 5):
                assert (ntd_gradient(benchmark_geometry, sigma, j) < 0.0).all()

    def test_curvature_against_gradient_differences(self, benchmark_geometry):
        sigma = np.array([1.0, 1.2, 0.8])
        values, grads, hessians = ntd_curvature(benchmark_geometry, sigma, 3)
        spectrum = ntd_spectrum(benchmark_geometry, sigma, 3)
        assert np.allclose(values, spectrum, atol=1e-15)
        h = 1e-6
        for j in range(3):
            for i in range(3):
                step = np.zeros(3)
                step[i] = h
                fd = (
                    ntd_gradient(benchmark_geometry, sigma + step, j + 1)
                    - ntd_gradient(benchmark_geometry, sigma - step, j + 1)
                ) / (2 * h)
                assert np.allclose(hessians[j][:, i], fd, rtol=1e-5, atol=1e-10)
            assert np.allclose(grads[j], ntd_gradient(benchmark_geometry, sigma, j + 1), atol=1e-15)

    def test_eigenvalue_convex_along_segment(self, benchmark_geometry):
        rng = np.random.default_rng(7)
        for _ in range(25):
            a = rng.uniform(0.4, 2.5, 3)
            b = rng.uniform(0.4, 2.5, 3)
            for j in (1, 2, 4):
                mid = ntd_eigenvalue(benchmark_geometry, 0.5 * (a + b), j)
                chord = 0.5 * (
                    ntd_eigenvalue(benchmark_geometry, a, j) + ntd_eigenvalue(benchmark_geometry, b, j)
                )
                assert mid <= chord + 1e-12


class TestValidation:
    def test_interface_radii_must_be_interior(self):
        with pytest.raises(DomainError):
            Geometry((1.0, 0.5))
        with pytest.raises(DomainError):
            Geometry((0.5, 0.0))

    def test_interface_radii_must_decrease(self):
        with pytest.raises(DomainError):
            Geometry((0.25, 0.5))
        with pytest.raises(DomainError):
            Geometry((0.5, 0.5))

    def test_sigma_must_be_positive_and_sized(self, benchmark_geometry):
        with pytest.raises(DomainError):
            ntd_eigenvalue(benchmark_geometry, (1.0, -1.0, 1.0), 1)
        with pytest.raises(DomainError):
            ntd_eigenvalue(benchmark_geometry, (1.0, 1.0), 1)

    def test_mode_must_be_positive_integer(self, benchmark_geometry):
        with pytest.raises(DomainError):
            ntd_eigenvalue(benchmark_geometry, (1.0, 1.0, 1.0), 0)

    def test_overflow_free_at_high_modes(self, benchmark_geometry):
        value = ntd_eigenvalue(benchmark_geometry, (1.0, 2.0, 0.5), 400)
        assert np.isfinite(value) and value > 0.0
