"""Linear stability of a spherical tumor under a periodic nutrient supply."""
from .base_state import BaseState, mu_star_2d, mu_star_3d, solve_base_state
from .errors import (AdmissibilityError, ConvergenceError, DomainError, GridError,
                     NoConvergence, SingularMatrixError, StabilityError, TrajectoryError,
                     TumorStabError)
from .mode_dynamics import classify, h_n, log_multiplier, mu_star_from_multiplier
from .periodic_orbit import ModelParams, NutrientProfile, find_periodic_radius
from .perturbation import (BoundaryPerturbation, evolve_boundary, evolve_mode,
                           find_limiting_center, mode1_center)
from .special_fn import p0, pn, pn_table

__version__ = "0.1.0"
