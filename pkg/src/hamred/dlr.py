"""Dynamical low-rank reduced basis evolution for batches of parameters.

The approximation R(t) = A(t) Z(t) keeps A(t) on the manifold of
ortho-symplectic 2n x 2k matrices while the coefficient columns Z_j(t)
follow the reduced canonical flow of their parameter.  Each step splits
into a per-parameter implicit-midpoint substep for Z (basis frozen) and a
Cayley retraction of the basis along the projected velocity field.
"""

from dataclasses import dataclass

import numpy as np

from .basis import complex_svd_basis, SnapshotMatrix
from .errors import (
    InvalidDimensionError,
    RankDegeneracyError,
    StructureViolationError,
    ValidationError,
)
from .integrators import implicit_midpoint_step, integrate
from .symplectic import (
    apply_structure,
    poisson_matrix,
    symplectic_gram,
)


@dataclass(frozen=True)
class DlrState:
    """Time-dependent pair (A, Z): ortho-symplectic basis and coefficients."""

    A: np.ndarray
    Z: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        Z = np.asarray(self.Z, dtype=float)
        if A.ndim != 2 or A.shape[0] % 2 or A.shape[1] % 2:
            raise InvalidDimensionError(f"basis must be 2n x 2k, got {A.shape}")
        if Z.ndim != 2 or Z.shape[0] != A.shape[1]:
            raise InvalidDimensionError(
                f"coefficients {Z.shape} do not match basis width {A.shape[1]}"
            )
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Z", Z)

    @property
    def k(self):
        return self.A.shape[1] // 2

    @property
    def n_params(self):
        return self.Z.shape[1]

    def reconstruct(self):
        return self.A @ self.Z

    def structure_residuals(self):
        """(symplecticity, orthonormality) max-norm residuals of the basis."""
        k = self.k
        sym = float(np.max(np.abs(symplectic_gram(self.A) - poisson_matrix(k))))
        orth = float(np.max(np.abs(self.A.T @ self.A - np.eye(2 * k))))
        return sym, orth


def coefficient_gram(Z):
    """S_Z = Z Z^T + J_2k Z Z^T J_2k^T with its smallest eigenvalue.

    S_Z is symmetric positive semidefinite; it is invertible exactly when
    the columns of [Z, J Z] span R^{2k} (the uniqueness condition of the
    low-rank representation).
    """
    Z = np.asarray(Z, dtype=float)
    G = Z @ Z.T
    Jk = poisson_matrix(G.shape[0] // 2)
    S = G + Jk @ G @ Jk.T
    S = 0.5 * (S + S.T)
    smallest = float(np.linalg.eigvalsh(S)[0]) if S.size else 0.0
    return S, smallest


def _rank_tol(S, k, rank_tol):
    if rank_tol is not None:
        return rank_tol
    return 1e-10 * float(np.trace(S)) / max(2 * k, 1)


def tangent_project(A, Z, Y, rank_tol=None):
    """Project full-space velocities Y onto the tangent space of the rank-2k
    ortho-symplectic manifold at (A, Z):

        (I - A A^T) (Y Z^T + J Y Z^T J_2k^T) S_Z^{-1} Z + A A^T Y.
    """
    A = np.asarray(A, dtype=float)
    Z = np.asarray(Z, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (A.shape[0], Z.shape[1]):
        raise InvalidDimensionError(
            f"velocities {Y.shape} do not match basis/coefficients "
            f"({A.shape[0]} x {Z.shape[1]})"
        )
    S = _checked_gram(Z, A.shape[1] // 2, rank_tol)
    XA = _velocity_solve(A, Z, Y, S)
    return XA @ Z + A @ (A.T @ Y)


def _checked_gram(Z, k, rank_tol):
    S, smallest = coefficient_gram(Z)
    tol = _rank_tol(S, k, rank_tol)
    if smallest <= tol:
        raise RankDegeneracyError(
            f"coefficient Gram matrix is singular (min eig {smallest:.3e} <= "
            f"{tol:.3e}); lower the basis rank or perturb the coefficients"
        )
    return S


def _velocity_solve(A, Z, Y, S):
    YZt = Y @ Z.T
    W = YZt + _sandwich(YZt)
    W = W - A @ (A.T @ W)
    return np.linalg.solve(S.T, W.T).T


def _basis_velocity(A, Z, Y, rank_tol=None):
    """dA = (I - A A^T)(Y Z^T + J Y Z^T J_2k^T) S_Z^{-1}.

    A square basis spans the whole space, so the orthogonal-complement
    factor vanishes identically and no Gram solve is needed.
    """
    if A.shape[0] == A.shape[1]:
        return np.zeros_like(A)
    S = _checked_gram(Z, A.shape[1] // 2, rank_tol)
    return _velocity_solve(A, Z, Y, S)


def _sandwich(M):
    """J_2n M J_2k^T for a 2n x 2k matrix M."""
    k = M.shape[1] // 2
    return apply_structure(M) @ poisson_matrix(k).T


def dlr_velocity(state, model, params):
    """Evolution fields (dA, dZ) at a DLR state.

    dZ_j is the reduced canonical flow J_2k A^T grad H(A Z_j, mu_j); dA is
    the projected remainder, tangent to the ortho-symplectic manifold
    (dA^T A = 0 and dA J_2k = J_2n dA).
    """
    A, Z = state.A, state.Z
    if len(params) != state.n_params:
        raise ValidationError(
            f"{len(params)} parameters for {state.n_params} coefficient columns"
        )
    lifted = A @ Z
    Y = np.empty_like(lifted)
    dZ = np.empty_like(Z)
    for j, mu in enumerate(params):
        grad = model.gradient(lifted[:, j], mu)
        Y[:, j] = apply_structure(grad)
        dZ[:, j] = apply_structure(A.T @ grad)
    dA = _basis_velocity(A, Z, Y)
    return dA, dZ


def _cayley_apply(dA, A, dt):
    """cay(dt * (dA A^T - A dA^T)) @ A via the low-rank Woodbury identity.

    The generator is skew-symmetric and commutes with J, so the transform
    is ortho-symplectic and the update stays on the manifold.
    """
    U = 0.5 * dt * np.hstack([dA, -A])
    V = np.hstack([A, dA])
    B = A + U @ (V.T @ A)
    core = np.eye(U.shape[1]) - V.T @ U
    return B + U @ np.linalg.solve(core, V.T @ B)


def dlr_step(state, model, params, dt, rank_tol=None, newton_tol=None,
             max_iter=50):
    """One splitting step: implicit midpoint on Z with the basis frozen,
    then a Cayley retraction of the basis along dA at the midpoint state."""
    A, Z = state.A, state.Z
    if dt == 0.0:
        return DlrState(A=A.copy(), Z=Z.copy(), t=state.t)
    k = state.k
    Jk = poisson_matrix(k)

    Z_new = np.empty_like(Z)
    for j, mu in enumerate(params):
        def field(z, mu=mu):
            return Jk @ (A.T @ model.gradient(A @ z, mu))

        jac = None
        if model.hessian is not None:
            def jac(z, mu=mu):
                return Jk @ (A.T @ model.hessian(A @ z, mu) @ A)

        Z_new[:, j] = implicit_midpoint_step(
            field, Z[:, j], dt, newton_tol=newton_tol, max_iter=max_iter,
            jacobian=jac,
        )

    Z_mid = 0.5 * (Z + Z_new)
    lifted = A @ Z_mid
    Y = np.empty_like(lifted)
    for j, mu in enumerate(params):
        Y[:, j] = apply_structure(model.gradient(lifted[:, j], mu))
    dA = _basis_velocity(A, Z_mid, Y, rank_tol)
    A_new = _cayley_apply(dA, A, dt)
    return DlrState(A=A_new, Z=Z_new, t=state.t + dt)


@dataclass(frozen=True)
class DlrResult:
    """Output of a DLR integration."""

    times: np.ndarray
    states: list
    reconstructions: np.ndarray        # (2n, p, N)
    reconstruction_errors: np.ndarray  # (p, N), vs FOM trajectories
    symplectic_drift: np.ndarray
    orthonormality_drift: np.ndarray


def dlr_initialize(model, params, k):
    """Initial (A0, Z0) from the complex SVD of the initial states."""
    Y0 = np.column_stack([model.initial_state(mu) for mu in params.samples])
    prov = [(np.atleast_1d(mu), float(params.time_grid[0]))
            for mu in params.samples]
    report = complex_svd_basis(SnapshotMatrix(data=Y0, provenance=prov), k)
    A0 = report.basis.matrix
    return A0, A0.T @ Y0


def dlr_integrate(A0, Z0, model, params, time_grid=None, rank_tol=None,
                  compare_fom=True, newton_tol=None):
    """Evolve (A, Z) over the time grid and report per-parameter
    reconstruction errors against the full model."""
    if time_grid is None:
        time_grid = params.time_grid
    grid = np.asarray(time_grid, dtype=float).ravel()
    if grid.size < 1 or (grid.size > 1 and np.any(np.diff(grid) <= 0.0)):
        raise ValidationError("time grid must be strictly increasing")
    A0 = np.asarray(A0, dtype=float)
    scale = max(1.0, float(np.sum(A0 * A0)))
    k = A0.shape[1] // 2
    sym = np.max(np.abs(symplectic_gram(A0) - poisson_matrix(k)))
    orth = np.max(np.abs(A0.T @ A0 - np.eye(2 * k)))
    if max(sym, orth) > 1e-8 * scale:
        raise StructureViolationError(
            f"initial basis is not ortho-symplectic (residual {max(sym, orth):.3e})"
        )

    state = DlrState(A=A0, Z=np.asarray(Z0, dtype=float), t=float(grid[0]))
    if A0.shape[1] < A0.shape[0]:
        _checked_gram(state.Z, k, rank_tol)

    p = state.n_params
    states = [state]
    recon = np.empty((A0.shape[0], p, grid.size))
    recon[:, :, 0] = state.reconstruct()
    sym_drift = np.empty(grid.size)
    orth_drift = np.empty(grid.size)
    sym_drift[0], orth_drift[0] = state.structure_residuals()

    for i, dt in enumerate(np.diff(grid)):
        state = dlr_step(state, model, list(params.samples), float(dt),
                         rank_tol=rank_tol, newton_tol=newton_tol)
        states.append(state)
        recon[:, :, i + 1] = state.reconstruct()
        sym_drift[i + 1], orth_drift[i + 1] = state.structure_residuals()

    errors = np.full((p, grid.size), np.nan)
    if compare_fom:
        for j, mu in enumerate(params.samples):
            fom = integrate(model, model.initial_state(mu), mu, grid)
            errors[j] = np.linalg.norm(recon[:, j, :] - fom.states, axis=0)
    return DlrResult(
        times=grid,
        states=states,
        reconstructions=recon,
        reconstruction_errors=errors,
        symplectic_drift=sym_drift,
        orthonormality_drift=orth_drift,
    )
