"""Desk-scale spectral toolkit for 1D Dirac operators linearized around Soler solitary waves."""

from .closed_forms import (
    ConstantsReport,
    ModelParams,
    Spinor,
    constants,
    derived_params,
    energy_density,
    g_profile,
    g_prime,
    hat_psi,
    M_prime,
    potential_M,
    potential_W,
    q_matrix,
    resonance_state,
    solitary_wave,
    soliton_scalar,
    trial_state,
)
from .discretization import (
    DiscreteOperator,
    Grid,
    GridSpinor,
    assemble_A,
    assemble_Lmu,
    assemble_schrodinger,
    build_grid,
    dump_matrix,
    sample_solitary_wave,
    sample_staggered,
    suspect_margin,
)
from .errors import (
    AssumptionViolationError,
    BlowUpError,
    CompressionRankError,
    ConsistencyError,
    DegenerateEigenvalueError,
    DiracGapError,
    InsufficientDataError,
    MatchingSingularityError,
    ParameterDomainError,
    RankDeficiencyError,
    ReconstructionError,
    SolverFailure,
)
from .experiments import MuRecord, RateFit, SweepRecord, fit_rate, selftest, sweep_mu, sweep_p
from .spectral import (
    MinMaxReport,
    SpectrumReport,
    classify_parity,
    detect_eps_threshold,
    E_delta,
    energy_drop_check,
    gamma_bound,
    gap_eigs,
    hellmann_feynman,
    lambda_minus_ratio,
    minmax_projectors,
)
from .threshold import (
    MatrixPotential,
    ThresholdReport,
    ThresholdSolution,
    classify_threshold,
    count_sign_changes,
    gauge_symmetrize,
    kneser_check,
    kneser_sup,
    load_potential_csv,
    pauli_decompose,
    shoot_threshold,
    sigma1_conjugate,
    simplicity_check,
    threshold_report,
    wronskian_check,
)

__version__ = "0.1.0"
