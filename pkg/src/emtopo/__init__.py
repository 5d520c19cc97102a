"""Bloch bands, material-symmetry classes, W-weighted Berry curvature, Chern
numbers and spectral time evolution for linear lossless periodic media."""

from .errors import (
    AmbiguousClass,
    CutoffMismatch,
    DegenerateGap,
    DimensionMismatch,
    EmptySet,
    EmtopoError,
    IndefiniteWeight,
    MalformedCoefficients,
    NonHermitianField,
    NotConverged,
    NotRealField,
    QuadratureUnderResolved,
    SingularBasis,
    SingularLink,
    SolverFailure,
)
from .lattice import KGrid, KPath, Lattice, PlaneWaveSet, bz_grid, bz_path, plane_wave_set, reciprocal_basis
from .weights import (
    CAZClass,
    MaterialWeights,
    MediaType,
    SymmetryReport,
    ValidationReport,
    WeightBlocks,
    assemble_weights,
    classify,
    decompose_weights,
    detect_symmetries,
    load_weights,
    save_weights,
    validate_weights,
)
from .operator import (
    FiberOperator,
    FiberSpectrum,
    MaxwellTypeContract,
    assemble_fiber,
    eigensolve,
    frequency_projector,
    helmholtz_split,
    positive_frequency_projector,
    validate_contract,
    weighted_inner,
)
from .evolution import (
    FiberPair,
    FiberState,
    PairField,
    SourceTerm,
    equivalence_harness,
    evolve,
    evolve_with_source,
    phase_locking_check,
    real_roundtrip,
)
from .topology import (
    BandSelection,
    BerryCurvature,
    ChernResult,
    GridSpectra,
    berry_curvature,
    chern_number,
    classification_consistency,
    detect_gaps,
    ground_state_dispersion_check,
    select_bands,
    solve_grid,
)

__version__ = "0.1.0"
