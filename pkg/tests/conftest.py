import os

import numpy as np
import pytest

from leopnt.cells import GridParams, build_cell_grid
from leopnt.constellation import ConstellationConfig, ShellConfig, propagate_arrays
from leopnt.schedule import TimingParams

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SCENARIO_DIR = os.path.join(REPO_ROOT, "scenarios")


def desk_grid_params():
    return GridParams(cell_diameter_km=160.0, lat_max_deg=4.0, min_elevation_deg=12.0)


def desk_constellation():
    return ConstellationConfig(shells=(
        ShellConfig(altitude_km=860, inclination_deg=20, n_planes=10, sats_per_plane=20),
        ShellConfig(altitude_km=900, inclination_deg=25, n_planes=10, sats_per_plane=20,
                    phase_offset_deg=7.3),
    ))


@pytest.fixture(scope="session")
def small_grid():
    # ~1,600 cells; cheap enough for per-test geometry work
    return build_cell_grid(GridParams(cell_diameter_km=500.0, lat_max_deg=30.0))


@pytest.fixture(scope="session")
def desk_grid():
    return build_cell_grid(desk_grid_params())


@pytest.fixture(scope="session")
def desk_config():
    return desk_constellation()


@pytest.fixture(scope="session")
def desk_sv_positions(desk_config):
    pos, _ = propagate_arrays(desk_config, 0.0, 6371.0)
    return pos


@pytest.fixture(scope="session")
def timing():
    return TimingParams()


@pytest.fixture(scope="session")
def desk_schedules(desk_grid, desk_config, timing):
    """One greedy schedule and twenty seeded randomized schedules, shared by
    the scheduler, cost, and acceptance tests (building them is the bulk of
    the suite's runtime)."""
    from leopnt.scheduler import SchedulerConfig, greedy_schedule, randomized_schedule

    greedy = greedy_schedule(desk_grid, desk_config, timing, SchedulerConfig())
    randomized = [
        randomized_schedule(desk_grid, desk_config, timing,
                            SchedulerConfig(mode="randomized", rng_seed=seed))
        for seed in range(20)
    ]
    return {"greedy": greedy, "randomized": randomized}
