"""Floquet bands, coupling matrices and spectral-edge checks for Anderson models with indefinite single-site potentials."""

from .config import ExperimentConfig, load_config, parse_config
from .coupling import (
    CouplingMatrix,
    ThresholdScan,
    analyse_coupling,
    classify_definiteness,
    coupling_matrix,
    lambda_threshold_scan,
)
from .eigen import EigenDecomposition, eig_hermitian, eig_smallest_k, eigvalsh, tridiagonalize
from .errors import (
    AndersonEdgeError,
    BumpOutsideCell,
    ConfigError,
    ConvergenceFailure,
    DegenerateMinimum,
    FlatBandSuspected,
    GapTooSmall,
    MissingUpstream,
    NotApplicable,
    NotDefiniteAtZero,
    NotFixedSign,
    SandwichViolation,
    TopologyChange,
)
from .floquet import (
    BandStructure,
    MinimaSet,
    QuadraticModel,
    bloch_eigenfunction,
    compute_band_structure,
    find_band_minima,
    quadratic_model,
    track_minima_in_lambda,
)
from .operators import AndersonModel, CellGrid, PeriodicModel, assemble_bloch_hamiltonian, assemble_dirichlet_box
from .potential import (
    DisorderConfiguration,
    PeriodicBackground,
    SingleSite,
    build_single_site,
    enumerate_periodic_configs,
    sample_random_config,
)
from .verifier import (
    ProjectionCheck,
    VerificationReport,
    box_sampling_check,
    monotone_case_oracle,
    projection_positivity_check,
    supercell_min_energy,
    verify_min_location,
)

__version__ = "0.1.0"
