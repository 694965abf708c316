"""Adiabatic and counterdiabatic preparation of long-lived singlet order in a
two-spin NMR system: models, propagation, pulse compilation and analysis."""

from .dynamics import DriveMode, FidelityMode, InitialState, evolve, sweep
from .model import AlphaMode, DriveSchedule, SpinSystem

__version__ = "0.1.0"

__all__ = [
    "AlphaMode",
    "DriveMode",
    "DriveSchedule",
    "FidelityMode",
    "InitialState",
    "SpinSystem",
    "evolve",
    "sweep",
]
