"""Online reduced models via symplectic Galerkin projection.

A reduced model carries its own low-dimensional dynamics as a
HamiltonianModel, so ``integrate`` applies unchanged.  Canonical models
reduce to canonical ones (z' = J_2k grad H_RB with H_RB(z) = H(Az)),
dissipative models keep a projected forcing term, and non-canonical models
reduce through the congruence W = U^T J U.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    InvalidDimensionError,
    StructureViolationError,
    UnsupportedModelError,
    ValidationError,
    VerticalStructureError,
)
from .integrators import Trajectory, integrate
from .models import HamiltonianModel
from .symplectic import (
    SymplecticBasis,
    is_symplectic,
    symplectic_inverse,
)


@dataclass(frozen=True)
class ReducedModel:
    """A reduced basis together with the reduced dynamics it induces."""

    basis: np.ndarray
    dynamics: HamiltonianModel
    full_model: HamiltonianModel
    vertical_dissipation: Optional[object] = None

    @property
    def kind(self):
        return self.dynamics.kind

    @property
    def reduced_hamiltonian(self):
        return self.dynamics.hamiltonian

    @property
    def reduced_gradient(self):
        return self.dynamics.gradient

    @property
    def reduced_dissipation(self):
        return self.vertical_dissipation

    @property
    def reduced_structure(self):
        return self.dynamics.structure

    def lift(self, Z):
        """Reconstruct full states A z from reduced coefficients."""
        return self.basis @ Z


def _coerce_symplectic(A, tol=1e-8):
    mat = A.matrix if isinstance(A, SymplecticBasis) else np.asarray(A, dtype=float)
    scale = max(1.0, float(np.sum(mat * mat)))
    if not is_symplectic(mat, tol=tol * scale):
        raise StructureViolationError("reduction basis is not symplectic")
    return mat


def reduced_initial_condition(A, y0):
    """z0 = A^+ y0 (equals A^T y0 for ortho-symplectic A)."""
    if isinstance(A, SymplecticBasis) and A.orthonormal:
        return A.matrix.T @ np.asarray(y0, dtype=float)
    mat = A.matrix if isinstance(A, SymplecticBasis) else np.asarray(A, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    if y0.size != mat.shape[0]:
        raise InvalidDimensionError(
            f"state length {y0.size} does not match basis rows {mat.shape[0]}"
        )
    return symplectic_inverse(mat) @ y0


def _reduced_parts(model, A):
    """H, gradient and Hessian pulled back through y = A z."""

    def hamiltonian(z, mu):
        return model.hamiltonian(A @ z, mu)

    def gradient(z, mu):
        return A.T @ model.gradient(A @ z, mu)

    hessian = None
    if model.hessian is not None:
        def hessian(z, mu):
            return A.T @ model.hessian(A @ z, mu) @ A

    return hamiltonian, gradient, hessian


def galerkin_reduce(model, A, tol=1e-8):
    """Symplectic Galerkin projection of a canonical model onto range(A):
    z' = J_2k A^T grad H(Az), z(0) = A^+ y0."""
    if model.kind != "canonical":
        raise UnsupportedModelError(
            f"galerkin_reduce expects a canonical model, got '{model.kind}'"
        )
    mat = _coerce_symplectic(A, tol)
    hamiltonian, gradient, hessian = _reduced_parts(model, mat)
    dynamics = HamiltonianModel(
        name=f"{model.name}[rom k={mat.shape[1] // 2}]",
        dim=mat.shape[1],
        kind="canonical",
        hamiltonian=hamiltonian,
        gradient=gradient,
        hessian=hessian,
        linear_field=model.linear_field,
        param_dim=model.param_dim,
    )
    return ReducedModel(basis=mat, dynamics=dynamics, full_model=model)


def dissipative_reduce(model, A, require_vertical=True, tol=1e-8,
                       vertical_tol=1e-10):
    """Symplectic Galerkin projection of a dissipative model:
    z' = J_2k grad H_RB(z) + A^+ X_F(Az) with
    A^+ X_F = (-A_qs^T f_H, A_qr^T f_H).

    With require_vertical the A_qs block must vanish (cotangent-lift
    structure), which makes the projected forcing a vertical field and the
    reduced energy non-increasing.
    """
    if model.kind != "dissipative":
        raise UnsupportedModelError(
            f"dissipative_reduce expects a dissipative model, got '{model.kind}'"
        )
    mat = _coerce_symplectic(A, tol)
    n, k = model.n, mat.shape[1] // 2
    A_qs = mat[:n, k:]
    if require_vertical:
        block_norm = float(np.max(np.abs(A_qs))) if A_qs.size else 0.0
        if block_norm > vertical_tol:
            raise VerticalStructureError(block_norm, vertical_tol)
    A_plus = symplectic_inverse(mat)
    hamiltonian, gradient, hessian = _reduced_parts(model, mat)

    def forcing(z, mu):
        f_h = model.dissipation(mat @ z, mu)
        return A_plus @ np.concatenate([np.zeros(n), f_h])

    def vertical_dissipation(z, mu):
        # vertical block of the projected forcing (the whole of it when
        # A_qs = 0)
        return mat[:n, :k].T @ model.dissipation(mat @ z, mu)

    dynamics = HamiltonianModel(
        name=f"{model.name}[rom k={k}]",
        dim=2 * k,
        kind="dissipative",
        hamiltonian=hamiltonian,
        gradient=gradient,
        hessian=hessian,
        forcing=forcing,
        linear_field=model.linear_field,
        param_dim=model.param_dim,
    )
    return ReducedModel(
        basis=mat, dynamics=dynamics, full_model=model,
        vertical_dissipation=vertical_dissipation if require_vertical else None,
    )


def noncanonical_reduce(model, U, tol=1e-10):
    """Structure-preserving reduction of a non-canonical model through an
    orthonormal basis U: W = U^T J U (skew), z' = W U^T grad H(Uz)."""
    if model.kind != "noncanonical":
        raise UnsupportedModelError(
            f"noncanonical_reduce expects a noncanonical model, got '{model.kind}'"
        )
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[0] != model.dim:
        raise InvalidDimensionError(f"basis shape {U.shape} does not match model")
    m = U.shape[1]
    resid = float(np.max(np.abs(U.T @ U - np.eye(m))))
    if resid > tol * max(1.0, float(np.sum(U * U))):
        raise StructureViolationError(
            f"basis is not orthonormal: max|U^T U - I| = {resid:.3e}"
        )
    Wraw = U.T @ (model.structure @ U)
    W = 0.5 * (Wraw - Wraw.T)   # exactly skew as assembled

    def hamiltonian(z, mu):
        return model.hamiltonian(U @ z, mu)

    def gradient(z, mu):
        return U.T @ model.gradient(U @ z, mu)

    hessian = None
    if model.hessian is not None:
        def hessian(z, mu):
            return U.T @ model.hessian(U @ z, mu) @ U

    dynamics = HamiltonianModel(
        name=f"{model.name}[rom m={m}]",
        dim=m,
        kind="noncanonical",
        hamiltonian=hamiltonian,
        gradient=gradient,
        hessian=hessian,
        structure=W,
        linear_field=model.linear_field,
        param_dim=model.param_dim,
    )
    return ReducedModel(basis=U, dynamics=dynamics, full_model=model)


def pod_galerkin_reduce(model, U):
    """Plain (non-symplectic) Galerkin baseline: z' = U^T field(Uz).

    Does not preserve the Hamiltonian; used only for stability
    comparisons against the symplectic reductions.
    """
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[0] != model.dim:
        raise InvalidDimensionError(f"basis shape {U.shape} does not match model")

    def field_override(z, mu):
        return U.T @ model.field(U @ z, mu)

    def hamiltonian(z, mu):
        return model.hamiltonian(U @ z, mu)

    def gradient(z, mu):
        return U.T @ model.gradient(U @ z, mu)

    hessian = None
    if model.hessian is not None:
        def hessian(z, mu):
            return U.T @ model.hessian(U @ z, mu) @ U

    dynamics = HamiltonianModel(
        name=f"{model.name}[pod m={U.shape[1]}]",
        dim=U.shape[1],
        kind="projected",
        hamiltonian=hamiltonian,
        gradient=gradient,
        hessian=hessian,
        field_override=field_override,
        linear_field=model.linear_field,
        param_dim=model.param_dim,
    )
    return ReducedModel(basis=U, dynamics=dynamics, full_model=model)


def simulate_rom(rm, z0, mu, time_grid, scheme="midpoint", **kwargs):
    """Integrate the reduced dynamics (online stage)."""
    return integrate(rm.dynamics, z0, mu, time_grid, scheme=scheme, **kwargs)


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Per-instant comparison of a full and a reduced trajectory."""

    times: np.ndarray
    state_error: np.ndarray
    hamiltonian_fom: np.ndarray
    hamiltonian_rom: np.ndarray
    hamiltonian_gap: np.ndarray

    @property
    def gap_drift(self):
        """Max deviation of |H(y) - H_RB(z)| from its initial value."""
        return float(np.max(np.abs(self.hamiltonian_gap - self.hamiltonian_gap[0])))


def diagnostics(fom, rom, A, model):
    """Assemble the error and energy series for a (FOM, ROM) trajectory pair
    sharing one time grid."""
    if fom.times.size != rom.times.size or not np.allclose(
        fom.times, rom.times, rtol=0.0, atol=1e-12 * (1.0 + abs(fom.times[-1]))
    ):
        raise ValidationError("diagnostics requires matching time grids")
    mat = A.matrix if isinstance(A, SymplecticBasis) else np.asarray(A, dtype=float)
    lifted = mat @ rom.states
    mu = fom.parameter
    state_error = np.linalg.norm(fom.states - lifted, axis=0)
    h_fom = np.array([model.hamiltonian(fom.states[:, i], mu)
                      for i in range(fom.times.size)])
    h_rom = np.array([model.hamiltonian(lifted[:, i], mu)
                      for i in range(fom.times.size)])
    return DiagnosticsRecord(
        times=fom.times,
        state_error=state_error,
        hamiltonian_fom=h_fom,
        hamiltonian_rom=h_rom,
        hamiltonian_gap=np.abs(h_fom - h_rom),
    )
