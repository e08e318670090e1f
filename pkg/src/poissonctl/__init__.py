"""Optimal control of the Poisson equation on 2-D triangulated domains.

The package solves source-control problems for -Laplace(u) = f with
homogeneous Dirichlet conditions: minimize an integral cost J(f) over
controls obeying a convex integral budget.  It provides the P1 finite
element machinery, a catalog of constraint functionals with their
convex conjugates and linear-minimization oracles, a conditional
gradient driver, first-order optimality reports, and geometric
diagnostics for the optimal sets (level sets, perimeter, convexity,
singular-gradient integrals).
"""

from .mesh import (
    Mesh,
    MeshQuality,
    generate_disk,
    generate_annulus,
    generate_disk_with_hole,
    generate_rectangle,
    load_mesh,
    quality,
    save_mesh,
)
from .poisson import (
    Control,
    ScalarField,
    assemble_stiffness,
    control_mass,
    gradient,
    integrate,
    interpolate,
    load_atoms,
    load_field,
    load_vector,
    lumped_mass,
    mass_matrix,
    pairing,
    resolvent,
    save_atoms,
    save_field,
    solve_dirichlet,
)
from .constraints import (
    ConstraintSpec,
    Interval,
    atom_penalty,
    constraint_value,
    find_threshold,
    is_admissible,
    linearized_oracle,
    mass_level,
    psi,
    psi_star,
    psi_star_subdiff,
    recession,
)
from .problems import (
    CostSpec,
    adjoint,
    coefficient_field,
    cost,
    dj_ds,
    dj_dz,
)
from .optimizer import (
    IterationRecord,
    OptimizerConfig,
    combine,
    fw_gap,
    run,
    stop_check,
    uniform_control,
)
from .kkt import (
    BANG_TOL,
    KKTReport,
    extract_bang_set,
    format_report,
    kkt_report,
)
from .analysis import (
    LevelSetGeometry,
    annulus_exact_gradient,
    annulus_exact_state,
    convexity_score,
    level_set,
    radial_oracle,
    regularity_integral,
    segment_distances,
    sublevel_areas,
    sublevel_volume,
)
from .errors import (
    CapacityError,
    ConfigError,
    ConstraintError,
    DegenerateProblemError,
    GeometryError,
    MeshFormatError,
    PoissonctlError,
    SolverError,
)

__version__ = "0.1.0"

__all__ = [
    "Mesh",
    "MeshQuality",
    "generate_disk",
    "generate_annulus",
    "generate_disk_with_hole",
    "generate_rectangle",
    "load_mesh",
    "quality",
    "save_mesh",
    "Control",
    "ScalarField",
    "assemble_stiffness",
    "control_mass",
    "gradient",
    "integrate",
    "interpolate",
    "load_atoms",
    "load_field",
    "load_vector",
    "lumped_mass",
    "mass_matrix",
    "pairing",
    "resolvent",
    "save_atoms",
    "save_field",
    "solve_dirichlet",
    "ConstraintSpec",
    "Interval",
    "atom_penalty",
    "constraint_value",
    "find_threshold",
    "is_admissible",
    "linearized_oracle",
    "mass_level",
    "psi",
    "psi_star",
    "psi_star_subdiff",
    "recession",
    "CostSpec",
    "adjoint",
    "coefficient_field",
    "cost",
    "dj_ds",
    "dj_dz",
    "IterationRecord",
    "OptimizerConfig",
    "combine",
    "fw_gap",
    "run",
    "stop_check",
    "uniform_control",
    "BANG_TOL",
    "KKTReport",
    "extract_bang_set",
    "format_report",
    "kkt_report",
    "LevelSetGeometry",
    "annulus_exact_gradient",
    "annulus_exact_state",
    "convexity_score",
    "level_set",
    "radial_oracle",
    "regularity_integral",
    "segment_distances",
    "sublevel_areas",
    "sublevel_volume",
    "CapacityError",
    "ConfigError",
    "ConstraintError",
    "DegenerateProblemError",
    "GeometryError",
    "MeshFormatError",
    "PoissonctlError",
    "SolverError",
    "__version__",
]
