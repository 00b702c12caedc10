"""Fast solvers for Toeplitz-plus-diagonal systems from fractional NLS stepping."""

from .blocksys import (
    BlockSystem,
    DiagonalNonneg,
    apply_R,
    assemble_rhs,
    block_to_complex,
    complex_to_block,
)
from .fracdiff import FracCoeffs, coefficients, tail_bounds
from .krylov import SolveReport, arnoldi_ritz, gmres
from .licd import (
    ConservationReport,
    EvolveResult,
    GridSpec,
    SolverConfig,
    WaveState,
    energy,
    evolve,
    licd_step,
    mass,
    startup_step,
)
from .nass_iter import (
    ExtentMethod,
    InnerSolveConfig,
    NassParams,
    estimate_contraction,
    lambda_extents,
    nass_solve,
    optimal_omega,
    sigma_bound,
)
from .precond import (
    CnasPrecond,
    InnerSolveError,
    NassPrecond,
    apply_cnas,
    apply_nass,
    build_cnas,
    build_nass,
)
from .structured import (
    CirculantKind,
    CirculantSym,
    ToeplitzSym,
    circulant_shifted_block_solve,
    strang_circulant,
    toeplitz_from_coeffs,
    toeplitz_matvec,
    variant_circulant,
)

__version__ = "0.1.0"
