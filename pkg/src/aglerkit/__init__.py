"""Test-function Schur-Agler classes: admissible kernels, Agler decompositions and realizations."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .agler import (
    AglerDecomposition,
    DecompositionProblem,
    SeparationEvidence,
    solve_decomposition,
    target_kernel,
    verify_decomposition,
)
from .errors import *  # noqa: F401,F403
from .kernels import (
    CheckReport,
    FiniteKernel,
    InterpolationProblem,
    admissibility_check,
    constrained_np_check,
    dbr_pick_matrix,
    generic_dual_check,
    multiplier_norm_bound,
)
from .linalg import (
    PsdReport,
    kolmogorov_factor,
    nearest_psd,
    psd_check,
    unitary_completion,
)
from .realize import (
    Colligation,
    Polynomial,
    TransferReport,
    lurking_isometry,
    rho_eval,
    transfer_eval,
    verify_colligation,
    von_neumann_test,
)
from .testfns import (
    QuantumMeasure,
    TestFamily,
    TestFunction,
    antipodal_measure,
    cayley_to_schur,
    sample_extreme_measure,
    solve_barycentric,
    weak_independence_check,
)
