"""Parameter-robust preconditioners for four-field Biot poroelasticity."""

from dotenv import load_dotenv

from .assembly import (
    BlockSystem,
    BlockVector,
    apply_A_pointwise,
    assemble_A,
    assemble_bulk_coupling,
    assemble_div,
    assemble_elasticity_system,
    assemble_m_vector,
    assemble_pressure_block,
    assemble_sigma_aux,
    assemble_sigma_riesz,
    assemble_skw,
    assemble_system,
)
from .config import (
    ConfigManager,
    LoggingConfig,
    RunConfig,
    SolverConfig,
    SweepConfig,
    VerifyConfig,
    configure_logging,
    get_config,
    get_config_manager,
    load_config,
)
from .exceptions import (
    BiotPrecondError,
    ConfigurationError,
    DimensionMismatchError,
    ExportError,
    InvalidArgumentError,
    InvalidStateError,
    NegativeCurvatureError,
    NotPositiveDefiniteError,
    ParameterError,
)
from .experiments import (
    CellResult,
    ExperimentRunner,
    SweepPoint,
    run_case1,
    run_case2,
    run_case3,
    run_case4,
)
from .krylov import KrylovReport, pcg, pminres, seeded_random_vector
from .mesh import (
    BoundaryTags,
    TriMesh,
    build_unit_square_mesh,
    classify_boundary,
    edge_normal,
)
from .models import (
    BoundaryMode,
    CaseKind,
    IterationRecord,
    KappaProfile,
    ParameterSet,
    ResidualMeasure,
    SpaceKind,
    TableFormat,
    VerificationRecord,
)
from .precond import (
    BlockPrecond,
    RankOneData,
    apply_block_precond,
    apply_stress_precond_clamped,
    build_block_precond,
    build_rank_one,
    condition_estimate,
)
from .reporting import emit_table, emit_verification_table
from .spaces import (
    BiotSpaces,
    DofMap,
    StressBasisTable,
    bdm1_edge_moments,
    build_biot_spaces,
    build_space,
    build_stress_basis,
    interpolate_identity,
)
from .sparsela import SymFactor, dense_sym_geig, ldlt_factor, ldlt_solve, spmv
from .verify import (
    check_elasticity_stability,
    check_infsup,
    check_spectral_equivalence_clamped,
    check_spectral_equivalence_nonclamped,
    run_verification,
)

# Load environment variables from .env file
load_dotenv()

__version__ = "0.1.0"

__all__ = [
    # Mesh and spaces
    "TriMesh",
    "BoundaryTags",
    "build_unit_square_mesh",
    "classify_boundary",
    "edge_normal",
    "DofMap",
    "StressBasisTable",
    "BiotSpaces",
    "build_space",
    "build_stress_basis",
    "build_biot_spaces",
    "bdm1_edge_moments",
    "interpolate_identity",
    # Assembly
    "BlockVector",
    "BlockSystem",
    "apply_A_pointwise",
    "assemble_A",
    "assemble_sigma_riesz",
    "assemble_sigma_aux",
    "assemble_m_vector",
    "assemble_bulk_coupling",
    "assemble_div",
    "assemble_skw",
    "assemble_pressure_block",
    "assemble_system",
    "assemble_elasticity_system",
    # Linear algebra
    "SymFactor",
    "spmv",
    "ldlt_factor",
    "ldlt_solve",
    "dense_sym_geig",
    # Preconditioners
    "RankOneData",
    "BlockPrecond",
    "build_rank_one",
    "apply_stress_precond_clamped",
    "apply_block_precond",
    "build_block_precond",
    "condition_estimate",
    # Krylov
    "KrylovReport",
    "pcg",
    "pminres",
    "seeded_random_vector",
    # Verification
    "check_spectral_equivalence_nonclamped",
    "check_spectral_equivalence_clamped",
    "check_infsup",
    "check_elasticity_stability",
    "run_verification",
    # Experiments and reporting
    "SweepPoint",
    "CellResult",
    "ExperimentRunner",
    "run_case1",
    "run_case2",
    "run_case3",
    "run_case4",
    "emit_table",
    "emit_verification_table",
    # Models
    "BoundaryMode",
    "SpaceKind",
    "KappaProfile",
    "CaseKind",
    "TableFormat",
    "ResidualMeasure",
    "ParameterSet",
    "IterationRecord",
    "VerificationRecord",
    # Configuration
    "ConfigManager",
    "RunConfig",
    "SolverConfig",
    "SweepConfig",
    "VerifyConfig",
    "LoggingConfig",
    "configure_logging",
    "get_config",
    "get_config_manager",
    "load_config",
    # Exceptions
    "BiotPrecondError",
    "InvalidArgumentError",
    "InvalidStateError",
    "DimensionMismatchError",
    "ParameterError",
    "NotPositiveDefiniteError",
    "NegativeCurvatureError",
    "ConfigurationError",
    "ExportError",
]
