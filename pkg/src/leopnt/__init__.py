"""Scheduling and opportunity-cost engine for ranging bursts piggybacked
on a broadband LEO constellation's downlink."""

from .cells import CellGrid, GridParams, build_cell_grid, hex_area, service_area, sweep_time
from .constellation import (
    ConstellationConfig,
    LineOfSight,
    ShellConfig,
    SvState,
    flight_time_s,
    propagate,
    select_diverse,
    visible_svs,
)
from .costs import CostParams, cost_report
from .cubes import RxCube, TxCube
from .feasibility import FeasibilityReport, check_feasibility
from .population import DensityGrid, ParParams, par_pipeline
from .schedule import Assignment, BitLayout, GnssSchedule, TimingParams
from .scheduler import (
    SchedulerConfig,
    ScheduleStats,
    complexity_bound,
    greedy_schedule,
    randomized_schedule,
)

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "BitLayout",
    "CellGrid",
    "ConstellationConfig",
    "CostParams",
    "DensityGrid",
    "FeasibilityReport",
    "GnssSchedule",
    "GridParams",
    "LineOfSight",
    "ParParams",
    "RxCube",
    "SchedulerConfig",
    "ScheduleStats",
    "ShellConfig",
    "SvState",
    "TimingParams",
    "TxCube",
    "build_cell_grid",
    "check_feasibility",
    "complexity_bound",
    "cost_report",
    "flight_time_s",
    "greedy_schedule",
    "hex_area",
    "par_pipeline",
    "propagate",
    "randomized_schedule",
    "select_diverse",
    "service_area",
    "sweep_time",
    "visible_svs",
]
