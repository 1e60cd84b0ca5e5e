"""Levenberg-Marquardt baseline behavior, including its failure modes."""

from __future__ import annotations

import numpy as np
import pytest

from eitconvex.baseline import LMOptions, lsq_solve
from eitconvex.measurement import assemble_f, frobenius_residual

BAD_INIT = np.array([1.0, 2.4727272727272727, 0.1])


class TestConvergence:
    def test_start_at_truth_stops_immediately(self, model20, y_exact20, truth):
        report = lsq_solve(model20, y_exact20, truth)
        assert report.converged
        assert report.iterations == 0
        np.testing.assert_array_equal(report.sigma, truth)

    def test_near_truth_converges_tightly(self, model20, y_exact20, truth):
        report = lsq_solve(model20, y_exact20, truth + np.array([0.02, -0.03, 0.01]))
        assert report.converged
        assert np.max(np.abs(np.array(report.sigma) - truth)) <= 1e-6

    def test_objective_never_increases(self, model20, y_exact20):
        rng = np.random.default_rng(17)
        for _ in range(5):
            sigma0 = rng.uniform(0.3, 3.0, size=3)
            initial = frobenius_residual(model20, sigma0, y_exact20)
            report = lsq_solve(model20, y_exact20, sigma0)
            assert report.objective <= initial + 1e-15

    def test_report_metadata(self, model20, y_exact20, truth):
        report = lsq_solve(model20, y_exact20, truth)
        assert report.backend == "lsq"
        assert report.status == "converged"


class TestBoxModes:
    def test_unconstrained_diverges_from_overshoot_corner(self, model20, y_exact20, truth):
        # Large middle / tiny inner starts drive the inner conductivity
        # nonpositive on the first full steps when nothing clamps them.
        report = lsq_solve(
            model20, y_exact20, BAD_INIT, opts=LMOptions(box_mode="none")
        )
        assert not report.converged
        assert report.status == "diverged"
        assert np.linalg.norm(np.array(report.sigma) - truth) > 0.1
        assert np.all(np.isfinite(report.sigma))
        assert np.isfinite(report.objective)

    def test_clamp_rescues_same_start(self, model20, y_exact20, truth):
        report = lsq_solve(model20, y_exact20, BAD_INIT)
        assert report.converged
        assert np.linalg.norm(np.array(report.sigma) - truth) <= 1e-6

    def test_clamp_respects_explicit_box(self, model20, y_exact20, pinned_box):
        report = lsq_solve(model20, y_exact20, BAD_INIT, box=pinned_box)
        assert pinned_box.contains(report.sigma, tol=1e-12)

    def test_budget_exhaustion(self, model20, y_exact20):
        report = lsq_solve(
            model20,
            y_exact20,
            np.array([2.9, 2.9, 0.3]),
            opts=LMOptions(max_iterations=2),
        )
        assert not report.converged
        assert report.status == "max-iterations"
        assert report.iterations == 2


class TestValidation:
    def test_options_rejected(self):
        with pytest.raises(ValueError):
            LMOptions(damping=0.0)
        with pytest.raises(ValueError):
            LMOptions(damping_up=1.0)
        with pytest.raises(ValueError):
            LMOptions(max_iterations=0)
        with pytest.raises(ValueError):
            LMOptions(box_mode="project")

    def test_sigma0_shape_and_sign(self, model20, y_exact20):
        with pytest.raises(ValueError):
            lsq_solve(model20, y_exact20, np.ones(2))
        with pytest.raises(ValueError):
            lsq_solve(model20, y_exact20, np.array([1.0, -1.0, 1.0]))

    def test_objective_matches_frobenius(self, model20, y_exact20):
        sigma0 = np.array([1.5, 0.7, 1.2])
        report = lsq_solve(model20, y_exact20, sigma0, opts=LMOptions(max_iterations=1))
        direct = frobenius_residual(model20, report.sigma, y_exact20)
        assert report.objective == pytest.approx(direct, rel=1e-12)
