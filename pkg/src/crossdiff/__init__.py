"""Entropy-dissipating BDF2 finite-volume solver for population cross-diffusion systems."""

from .config import RunConfig, load_config, parse_config, render_config
from .field import SpeciesField, project_initial, rao_entropy_pair, total_mass
from .interaction import InteractionMatrix, build_interaction, entropy_density
from .mesh import Mesh, build_graded_interval_mesh, build_interval_mesh, build_rect_mesh
from .scheme import MeanFunction, ModelConfig, residual_bdf2, residual_euler
from .solver import SolverConfig, TimeStepper, Trajectory, newton_solve, run, simulate

__version__ = "0.1.0"

__all__ = [
    "InteractionMatrix", "MeanFunction", "Mesh", "ModelConfig", "RunConfig", "SolverConfig",
    "SpeciesField", "TimeStepper", "Trajectory", "build_graded_interval_mesh",
    "build_interaction", "build_interval_mesh", "build_rect_mesh", "entropy_density",
    "load_config", "newton_solve", "parse_config", "project_initial", "rao_entropy_pair",
    "render_config", "residual_bdf2", "residual_euler", "run", "simulate", "total_mass",
]
