"""Kinetic slab solver: linearized collision operator, mild-form transport
iteration, and boundary singularity analysis of velocity moments."""

__version__ = "0.1.0"

from .cross_section import CrossSectionModel, hard_sphere, evaluate_B, check_grad_cutoff
from .velocity_grid import VelocityGrid, make_grid, refine
from .collision_operator import (
    AngularQuadrature,
    LinearizedOperator,
    assemble_operator,
    apply_K,
    apply_L,
    compute_nu,
    norm_Linf_weighted,
    norm_star,
    smoothing_report,
)
from .special_functions import (
    E1Result,
    EULER_GAMMA,
    e1_bounds,
    e1_series,
    exp_integral_E1,
    exp_integral_En,
    h_kernel,
)
from .slab_solver import (
    BoundaryData,
    DistributionField,
    SlabConfig,
    holder_probe,
    make_x_grid,
    maxwellian_boundary,
    mild_step,
    solve,
    temperature_step_boundary,
)
from .moments import (
    MomentIndex,
    SingularityReport,
    analyze_singularity,
    d_moment_dx,
    fit_log_singularity,
    half_moments,
    macroscopic_variables,
    moment,
    phi_alpha,
    singular_coefficient,
    singular_term_I,
)
from .config import ConfigError, RunConfig, load_config

__all__ = [
    "CrossSectionModel", "hard_sphere", "evaluate_B", "check_grad_cutoff",
    "VelocityGrid", "make_grid", "refine",
    "AngularQuadrature", "LinearizedOperator", "assemble_operator",
    "apply_K", "apply_L", "compute_nu", "norm_Linf_weighted", "norm_star",
    "smoothing_report",
    "E1Result", "EULER_GAMMA", "e1_bounds", "e1_series",
    "exp_integral_E1", "exp_integral_En", "h_kernel",
    "BoundaryData", "DistributionField", "SlabConfig", "holder_probe",
    "make_x_grid", "maxwellian_boundary", "mild_step", "solve",
    "temperature_step_boundary",
    "MomentIndex", "SingularityReport", "analyze_singularity", "d_moment_dx",
    "fit_log_singularity", "half_moments", "macroscopic_variables", "moment",
    "phi_alpha", "singular_coefficient", "singular_term_I",
    "ConfigError", "RunConfig", "load_config",
]
