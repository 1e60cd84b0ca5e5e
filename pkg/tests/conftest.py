"""Shared fixtures: the two-interface benchmark disk and its certificates."""
from __future__ import annotations

import numpy as np
import pytest

from eitconvex.calibration import Box, SampleSpec, calibrate
from eitconvex.forward import Geometry
from eitconvex.measurement import MeasurementModel, assemble_f


@pytest.fixture(scope="session")
def benchmark_geometry() -> Geometry:
    return Geometry((0.5, 0.25))


@pytest.fixture(scope="session")
def model20(benchmark_geometry) -> MeasurementModel:
    return MeasurementModel(benchmark_geometry, 20)


@pytest.fixture(scope="session")
def model6(benchmark_geometry) -> MeasurementModel:
    return MeasurementModel(benchmark_geometry, 6)


@pytest.fixture(scope="session")
def pinned_box() -> Box:
    return Box(lower=(1.0, 0.5, 0.5), upper=(1.0, 2.0, 2.0))


@pytest.fixture(scope="session")
def free_box() -> Box:
    return Box(lower=(0.5, 0.5, 0.5), upper=(2.0, 2.0, 2.0))


@pytest.fixture(scope="session")
def cert_pinned(model20, pinned_box):
    return calibrate(model20, pinned_box, SampleSpec(grid=3, random=0, seed=0))


@pytest.fixture(scope="session")
def cert_free(model20, free_box):
    return calibrate(model20, free_box, SampleSpec(grid=3, random=0, seed=0), epsilon=1e-6)


@pytest.fixture(scope="session")
def truth() -> np.ndarray:
    return np.array([1.0, 1.0, 1.0])


@pytest.fixture(scope="session")
def y_exact20(model20, truth) -> np.ndarray:
    return assemble_f(model20, truth)


@pytest.fixture(scope="session")
def y_exact6(model6, truth) -> np.ndarray:
    return assemble_f(model6, truth)
