import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from inventro.abstraction import build_grid, build_input_grid, synthesize_invariant_controller
from inventro.determinizer import band_partition, determinize, partition_from_choice
from inventro.system import builtin_linear2d, builtin_pendulum

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

COARSE_ETA = 0.57142


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def linear():
    return builtin_linear2d()


@pytest.fixture(scope="session")
def coarse(linear):
    """Stretched 3x7 grid, full controller and the column partition with inputs 1, 0, -1."""
    grid = build_grid(linear.safe_set, COARSE_ETA)
    inputs = build_input_grid(linear.input_range, 0.005)
    ctrl = synthesize_invariant_controller(linear, grid, inputs)
    part = band_partition(ctrl, [1.0, 0.0, -1.0], linear)
    return grid, inputs, ctrl, part


@pytest.fixture(scope="session")
def coarse_lattice(linear):
    grid = build_grid(linear.safe_set, COARSE_ETA, mode="lattice")
    inputs = build_input_grid(linear.input_range, 0.005)
    ctrl = synthesize_invariant_controller(linear, grid, inputs)
    part = partition_from_choice(ctrl, determinize(ctrl, "maxfreq"), linear)
    return grid, inputs, ctrl, part


@pytest.fixture(scope="session")
def small_linear(linear):
    """A 10x20 grid: big enough to be interesting, small enough for brute force."""
    grid = build_grid(linear.safe_set, 0.2)
    inputs = build_input_grid(linear.input_range, 0.25)
    ctrl = synthesize_invariant_controller(linear, grid, inputs)
    return grid, inputs, ctrl


@pytest.fixture(scope="session")
def pendulum_small():
    sys = builtin_pendulum(1.0, 1.0, 0.5)
    model = sys.to_model()
    grid = build_grid(model.safe_set, 2e-3)
    inputs = build_input_grid(model.input_range, 0.2)
    ctrl = synthesize_invariant_controller(model, grid, inputs)
    return sys, model, grid, inputs, ctrl
