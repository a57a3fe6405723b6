"""Dissipative dynamics of the Kitaev chain under bath-temperature quenches."""

from .analysis import (
    FitError,
    FitResult,
    NotReachedError,
    ScalingReport,
    classify_decay,
    crossover_time,
    fit_exponential,
    fit_power_law,
    fit_shifted_power_law,
    peak_time,
    theory_exponent,
    transition_time_offcritical,
)
from .bath import BOSONIC, FERMIONIC, T_CAP, BathSpec, occupation, rates, thermal_occupation
from .chain import ChainParams, build_grid, gap_info, spectrum
from .dynamics import IntegrationError, TimeSeries, excitation_density, thermal_density
from .schedules import LINEAR, RAMP_RELAX, SUDDEN, QuenchSchedule, SweepSpec
from .simulate import log_times, relaxation_after_ramp, simulate, tau_sweep

__version__ = "0.1.0"
