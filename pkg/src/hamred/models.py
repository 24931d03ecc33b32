"""Full-order Hamiltonian models used for snapshot generation and ROM tests.

All PDE models discretize a 1D wave-type equation on [0, 1] with periodic
boundary conditions and n grid points; the grid spacing is folded into the
stiffness matrix so the Hamiltonian is a plain sum over components.  The
state is y = (q, p) with q the displacement values and p the velocities;
the scalar parameter mu is the wave speed, defaulting to the range
[0.5, 2].
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    InvalidDimensionError,
    NonFiniteStateError,
    UnknownModelError,
    ValidationError,
)
from .rng import derive_rng
from .symplectic import apply_structure

DEFAULT_MU_RANGE = (0.5, 2.0)


@dataclass(frozen=True)
class HamiltonianModel:
    """A finite-dimensional Hamiltonian system with optional dissipation or a
    non-canonical (constant, invertible, skew) structure matrix.

    kind is one of "canonical", "dissipative", "noncanonical" or
    "projected"; the last tags reduced systems that carry an explicit
    velocity field and no structure (POD-Galerkin baseline).
    """

    name: str
    dim: int
    kind: str
    hamiltonian: Callable
    gradient: Callable
    dissipation: Optional[Callable] = None          # f_H block, length n
    structure: Optional[np.ndarray] = None          # constant skew J (noncanonical)
    separable: bool = False
    param_dim: int = 1
    hessian: Optional[Callable] = None
    forcing: Optional[Callable] = None              # general extra field, length 2n
    field_override: Optional[Callable] = None       # full RHS (projected kind)
    linear_field: bool = False
    initial_state: Optional[Callable] = None
    config: dict = field(default_factory=dict)

    @property
    def n(self):
        if self.dim % 2:
            raise InvalidDimensionError(f"model dimension {self.dim} is odd")
        return self.dim // 2

    def check_state(self, y):
        y = np.asarray(y, dtype=float).ravel()
        if y.size != self.dim:
            raise InvalidDimensionError(
                f"state length {y.size} does not match model dimension {self.dim}"
            )
        if not np.isfinite(y).all():
            raise NonFiniteStateError("state contains NaN or Inf")
        return y

    def field(self, y, mu):
        """Right-hand side of the evolution equation."""
        if self.field_override is not None:
            return self.field_override(y, mu)
        grad = self.gradient(y, mu)
        if self.kind == "noncanonical":
            rhs = self.structure @ grad
        else:
            rhs = apply_structure(grad)
        if self.dissipation is not None:
            f_h = self.dissipation(y, mu)
            rhs = rhs + np.concatenate([np.zeros(self.n), f_h])
        if self.forcing is not None:
            rhs = rhs + self.forcing(y, mu)
        return rhs

    def field_jacobian(self, y, mu):
        """Jacobian of `field`; analytic when a Hessian is available,
        finite differences otherwise."""
        if self.hessian is not None and self.field_override is None \
                and self.forcing is None:
            H = self.hessian(y, mu)
            if self.kind == "noncanonical":
                jac = self.structure @ H
            else:
                jac = apply_structure(H)
            if self.dissipation is not None:
                jac = jac + _fd_jacobian(
                    lambda s: np.concatenate(
                        [np.zeros(self.n), self.dissipation(s, mu)]
                    ),
                    np.asarray(y, dtype=float),
                )
            return jac
        return _fd_jacobian(lambda s: self.field(s, mu), np.asarray(y, dtype=float))

    def field_matrix(self, mu):
        """Constant system matrix M with field(y) = M y (linear models only)."""
        if not self.linear_field:
            raise ValidationError(f"model '{self.name}' has no constant field matrix")
        return self.field_jacobian(np.zeros(self.dim), mu)


def _fd_jacobian(fun, y, step=None):
    if step is None:
        step = 1e-6 * (1.0 + np.linalg.norm(y))
    m = y.size
    f0 = fun(y)
    jac = np.empty((f0.size, m))
    for i in range(m):
        e = np.zeros(m)
        e[i] = step
        jac[:, i] = (fun(y + e) - fun(y - e)) / (2.0 * step)
    return jac


def eval_hamiltonian(model, y, mu):
    y = model.check_state(y)
    return float(model.hamiltonian(y, mu))


def eval_gradient(model, y, mu):
    y = model.check_state(y)
    return model.gradient(y, mu)


def eval_dissipation(model, y, mu):
    """Dissipative vertical field (0_n, f_H); zero for conservative models."""
    y = model.check_state(y)
    if model.dissipation is None:
        return np.zeros(model.dim)
    return np.concatenate([np.zeros(model.n), model.dissipation(y, mu)])


@dataclass(frozen=True)
class ParameterSet:
    """Sampled parameter vectors and the shared time grid."""

    samples: list
    time_grid: np.ndarray

    def __post_init__(self):
        samples = [np.atleast_1d(np.asarray(m, dtype=float)) for m in self.samples]
        if not samples:
            raise ValidationError("parameter set must contain at least one sample")
        grid = np.asarray(self.time_grid, dtype=float).ravel()
        if grid.size < 1 or np.any(np.diff(grid) <= 0.0):
            raise ValidationError("time grid must be strictly increasing")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "time_grid", grid)

    @property
    def n_samples(self):
        return len(self.samples)


def stiffness_matrix(n):
    """Periodic second-difference matrix divided by dx^2 (positive
    semidefinite; constant vectors span its kernel)."""
    dx = 1.0 / n
    L = 2.0 * np.eye(n) - np.roll(np.eye(n), 1, axis=0) - np.roll(np.eye(n), -1, axis=0)
    return L / dx**2


def _mu_scalar(mu):
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if mu.size != 1:
        raise ValidationError(f"wave models take a scalar parameter, got size {mu.size}")
    return float(mu[0])


def _gaussian_ic(n, width_scale=0.1, center=0.5):
    """Right-moving Gaussian bump: q0 = g, p0 = -mu g' (d'Alembert), with a
    parameter-dependent width so the initial states span a nontrivial
    manifold over the parameter range."""
    x = np.arange(n) / n

    def initial_state(mu):
        mu = _mu_scalar(mu)
        width = width_scale / np.sqrt(mu)
        q = np.exp(-0.5 * ((x - center) / width) ** 2)
        p = mu * (x - center) / width**2 * q
        return np.concatenate([q, p])

    return initial_state


def _build_linear_wave(n, config):
    L = stiffness_matrix(n)

    def hamiltonian(y, mu):
        mu = _mu_scalar(mu)
        q, p = y[:n], y[n:]
        return 0.5 * (p @ p) + 0.5 * mu**2 * (q @ (L @ q))

    def gradient(y, mu):
        mu = _mu_scalar(mu)
        return np.concatenate([mu**2 * (L @ y[:n]), y[n:]])

    def hessian(y, mu):
        mu = _mu_scalar(mu)
        H = np.zeros((2 * n, 2 * n))
        H[:n, :n] = mu**2 * L
        H[n:, n:] = np.eye(n)
        return H

    return dict(
        hamiltonian=hamiltonian,
        gradient=gradient,
        hessian=hessian,
        separable=True,
        linear_field=True,
        initial_state=_gaussian_ic(n, config.get("ic_width", 0.1),
                                   config.get("ic_center", 0.5)),
    )


def _build_nonlinear_wave(n, config):
    base = _build_linear_wave(n, config)
    L = stiffness_matrix(n)
    h = 1.0 / n

    def hamiltonian(y, mu):
        mu = _mu_scalar(mu)
        q, p = y[:n], y[n:]
        return (0.5 * (p @ p) + 0.5 * mu**2 * (q @ (L @ q))
                + h * np.sum(1.0 - np.cos(q)))

    def gradient(y, mu):
        mu = _mu_scalar(mu)
        return np.concatenate([mu**2 * (L @ y[:n]) + h * np.sin(y[:n]), y[n:]])

    def hessian(y, mu):
        mu = _mu_scalar(mu)
        H = np.zeros((2 * n, 2 * n))
        H[:n, :n] = mu**2 * L + h * np.diag(np.cos(y[:n]))
        H[n:, n:] = np.eye(n)
        return H

    base.update(hamiltonian=hamiltonian, gradient=gradient, hessian=hessian,
               linear_field=False)
    return base


def _build_damped_wave(n, config):
    base = _build_linear_wave(n, config)
    c = float(config.get("damping", 0.1))
    if c < 0.0:
        raise ValidationError("damping coefficient must be nonnegative")

    def dissipation(y, mu):
        return -c * y[n:]

    base.update(dissipation=dissipation)
    return base


def congruence_factor(n, seed):
    """Well-conditioned random factor K used to twist the canonical structure
    into J_struct = K J_2n K^T.  Deterministic in (n, seed)."""
    rng = derive_rng(seed, "noncanonical-congruence")
    G = rng.standard_normal((2 * n, 2 * n))
    return np.eye(2 * n) + 0.3 * G / np.linalg.norm(G, 2)


def _build_noncanonical_wave(n, config):
    base = _build_linear_wave(n, config)
    K = congruence_factor(n, int(config.get("seed", 0)))
    J_struct = K @ apply_structure(K.T)
    J_struct = 0.5 * (J_struct - J_struct.T)
    base.update(structure=J_struct, separable=False)
    return base


_REGISTRY = {
    "linear_wave": ("canonical", _build_linear_wave),
    "nonlinear_wave": ("canonical", _build_nonlinear_wave),
    "damped_wave": ("dissipative", _build_damped_wave),
    "noncanonical_wave": ("noncanonical", _build_noncanonical_wave),
}


def registered_models():
    return sorted(_REGISTRY)


def build_model(spec):
    """Build a registered model from a configuration mapping.

    Required keys: name, n.  Optional keys depend on the model (damping,
    ic_width, ic_center, seed).
    """
    if "name" not in spec:
        raise UnknownModelError("model configuration is missing the 'name' field")
    name = spec["name"]
    if name not in _REGISTRY:
        raise UnknownModelError(
            f"unknown model '{name}'; registered: {', '.join(registered_models())}"
        )
    n = int(spec.get("n", 0))
    if n < 3:
        raise InvalidDimensionError(f"wave models need n >= 3 grid points, got {n}")
    kind, builder = _REGISTRY[name]
    parts = builder(n, dict(spec))
    return HamiltonianModel(name=name, dim=2 * n, kind=kind, config=dict(spec), **parts)
