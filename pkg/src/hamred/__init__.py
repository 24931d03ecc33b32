"""hamred: structure-preserving model order reduction for Hamiltonian systems.

Offline symplectic basis generation from snapshots, online reduced
Hamiltonian simulation, dynamical low-rank evolution, and conservation
diagnostics.
"""

from .basis import (
    BasisReport,
    SnapshotMatrix,
    assemble_snapshots,
    complex_svd_basis,
    cotangent_lift,
    greedy_symplectic_basis,
    pod_basis,
    projection_error,
    psd_svd_like_basis,
)
from .dlr import (
    DlrResult,
    DlrState,
    coefficient_gram,
    dlr_initialize,
    dlr_integrate,
    dlr_step,
    dlr_velocity,
    tangent_project,
)
from .integrators import (
    Trajectory,
    hamiltonian_series,
    implicit_midpoint_step,
    integrate,
    stormer_verlet_step,
)
from .models import (
    HamiltonianModel,
    ParameterSet,
    build_model,
    eval_dissipation,
    eval_gradient,
    eval_hamiltonian,
    registered_models,
)
from .rom import (
    DiagnosticsRecord,
    ReducedModel,
    diagnostics,
    dissipative_reduce,
    galerkin_reduce,
    noncanonical_reduce,
    pod_galerkin_reduce,
    reduced_initial_condition,
    simulate_rom,
)
from .symplectic import (
    SvdLikeFactors,
    SymplecticBasis,
    is_symplectic,
    poisson_matrix,
    random_symplectic,
    sr_insert,
    svd_like,
    symplectic_inverse,
    symplectic_project,
    weighted_symplectic_singular_values,
)

__version__ = "0.1.0"
