"""Incompressible-flow solvers and a numerical identity-checking harness."""

__version__ = "0.1.0"

from .errors import (
    BlowUpError,
    CFLError,
    ConfigError,
    ConstraintError,
    DegenerateGridError,
    FieldMismatchError,
    FormatError,
    NsverifyError,
    SolvabilityError,
)
from .grid import GridSpec
from .fields import (
    ScalarField,
    TensorField,
    VectorField,
    boundary_flux,
    boundary_weighted_flux,
    convective_term,
    curl,
    divergence,
    energy,
    gradient,
    l2_norm,
    laplacian,
    velocity_gradient,
    volume_integral,
)
from .spectral import (
    DealiasPolicy,
    SpectralField,
    dealias_product,
    leray_project,
    solve_poisson_periodic,
)
from .solvers import (
    AnsatzSpec,
    BoundaryDatum,
    ForcingSpec,
    SampleDiagnostics,
    SolverConfig,
    Trajectory,
    run_nse,
    sample_ansatz,
    solve_reduced,
    step_nse_mac,
    step_nse_spectral,
)
from .claims import (
    IdentityReport,
    UniquenessReport,
    check_compatibility,
    check_decay,
    check_eigenweighted_energy,
    check_energy_balance,
    check_tangential,
    check_theorem2_identities,
    convective_residual,
    run_uniqueness_experiment,
)
from .scenarios import Scenario
from .config import parse_config

__all__ = [
    "AnsatzSpec",
    "BlowUpError",
    "BoundaryDatum",
    "CFLError",
    "ConfigError",
    "ConstraintError",
    "DealiasPolicy",
    "DegenerateGridError",
    "FieldMismatchError",
    "ForcingSpec",
    "FormatError",
    "GridSpec",
    "IdentityReport",
    "NsverifyError",
    "SampleDiagnostics",
    "ScalarField",
    "Scenario",
    "SolvabilityError",
    "SolverConfig",
    "SpectralField",
    "TensorField",
    "Trajectory",
    "UniquenessReport",
    "VectorField",
    "boundary_flux",
    "boundary_weighted_flux",
    "check_compatibility",
    "check_decay",
    "check_eigenweighted_energy",
    "check_energy_balance",
    "check_tangential",
    "check_theorem2_identities",
    "convective_residual",
    "convective_term",
    "curl",
    "dealias_product",
    "divergence",
    "energy",
    "gradient",
    "l2_norm",
    "laplacian",
    "leray_project",
    "parse_config",
    "run_nse",
    "run_uniqueness_experiment",
    "sample_ansatz",
    "solve_poisson_periodic",
    "solve_reduced",
    "step_nse_mac",
    "step_nse_spectral",
    "velocity_gradient",
    "volume_integral",
]
