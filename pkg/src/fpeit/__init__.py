"""Forward Dirichlet solver for the 2-D electrical impedance equation on the
unit disk, built on formal powers of pseudoanalytic function theory."""

from .conductivity import (
    AnalyticSeparable,
    ConductivityField,
    GeometricScene,
    DiskShape,
    AnnulusShape,
    PolygonShape,
    LimitCase,
    PiecewiseSeparable,
    build_piecewise,
    constant_field,
    eval_radial_piecewise,
    evaluate,
    load_conductivity_csv,
    radial_rings_field,
    sample_piecewise,
    scene_from_dict,
)
from .errors import DomainError, FpeitError, NumericalError, ValidationError
from .pseudoanalytic import (
    CharacteristicCoefficients,
    GeneratingPair,
    GeneratingSequence,
    RadialMesh,
    adjoint,
    build_sequence,
    characteristic_coefficients,
    fg_derivative,
    fg_integral,
    pair_from_p,
    radial_mesh,
    successor_residual,
    successor_residual_mesh,
    vekua_residual,
)
from .formal_powers import (
    FormalPowerTable,
    build_table,
    degree_zero,
    formal_power_fields,
    pseudoanalyticity_check,
    write_powers_csv,
)
from .boundary_solver import (
    BoundarySystem,
    FitResult,
    OrthonormalBasis,
    SolveResult,
    boundary_system,
    error_norm,
    fit_coefficients,
    inner_product,
    orthonormalize,
    reconstruct_interior,
    solve_dirichlet,
    upsample_periodic_linear,
)
from .verification import (
    ExactCase,
    constant_case,
    divergence_residual,
    interior_points,
    lorentzian_case,
    shifted_cubic,
    sinusoidal_case,
)
from .presets import PRESET_NAMES, RunConfig, config_from_dict, load_config

__version__ = "0.1.0"
