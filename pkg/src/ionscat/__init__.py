"""Coupled-channel scattering engine for ultracold Li + Ba+ collisions."""

from .basis import enumerate_case_a, enumerate_case_e, frame_transform
from .landau_zener import double_path, fclz_network, lz_probability
from .observables import (
    langevin_rate_density,
    langevin_rate_thermal,
    mcqs_cross_sections,
    t_eff,
    thermal_rate,
)
from .potentials import default_surface, load_surface
from .propagator import Grid, fcqs_problem, mcqs_problem, solve_block

__version__ = "0.1.0"

__all__ = [
    "enumerate_case_a",
    "enumerate_case_e",
    "frame_transform",
    "double_path",
    "fclz_network",
    "lz_probability",
    "langevin_rate_density",
    "langevin_rate_thermal",
    "mcqs_cross_sections",
    "t_eff",
    "thermal_rate",
    "default_surface",
    "load_surface",
    "Grid",
    "fcqs_problem",
    "mcqs_problem",
    "solve_block",
]
