"""Time integration of full and reduced Hamiltonian models.

The implicit midpoint rule is the workhorse: it is symplectic, conserves
quadratic invariants exactly (up to solver tolerance) and handles the
dissipative and non-canonical model kinds.  Stormer-Verlet is available
for separable canonical models.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    InvalidDimensionError,
    NonFiniteStateError,
    StepFailureError,
    UnsupportedModelError,
    ValidationError,
)
from .models import _fd_jacobian


@dataclass(frozen=True)
class Trajectory:
    """Solution samples: one state column per time instant."""

    times: np.ndarray
    states: np.ndarray
    parameter: np.ndarray = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).ravel()
        states = np.asarray(self.states, dtype=float)
        if states.ndim != 2 or states.shape[1] != times.size:
            raise InvalidDimensionError(
                f"states {states.shape} do not match {times.size} time instants"
            )
        if not np.isfinite(states).all():
            raise NonFiniteStateError("trajectory contains non-finite states")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def n_steps(self):
        return self.times.size


def implicit_midpoint_step(field, y, dt, newton_tol=None, max_iter=50, jacobian=None):
    """One implicit midpoint step: solve y' = y + dt * field((y + y') / 2).

    Starts with fixed-point iteration and falls back to Newton (with the
    supplied Jacobian, or a finite-difference one) when the iteration
    stalls or diverges.  Raises StepFailureError carrying the last residual
    norm when no solver converges within `max_iter` iterations.
    """
    y = np.asarray(y, dtype=float).ravel()
    if dt == 0.0:
        return y.copy()
    if newton_tol is None:
        newton_tol = 1e-12 * (1.0 + np.linalg.norm(y))

    if jacobian is None:
        y_new, resid = _midpoint_fixed_point(field, y, dt, newton_tol, max_iter)
        if y_new is not None:
            return y_new
        jacobian = lambda s: _fd_jacobian(field, s)  # noqa: E731
    return _midpoint_newton(field, jacobian, y, dt, newton_tol, max_iter)


def _midpoint_fixed_point(field, y, dt, tol, max_iter):
    y_new = y + dt * field(y)
    if not np.isfinite(y_new).all():
        return None, np.inf
    last = np.inf
    for _ in range(min(max_iter, 12)):
        proposal = y + dt * field(0.5 * (y + y_new))
        resid = np.linalg.norm(proposal - y_new)
        y_new = proposal
        if not np.isfinite(resid) or resid > 4.0 * last:
            return None, resid
        if resid <= tol:
            return y_new, resid
        last = resid
    return None, last


def _midpoint_newton(field, jacobian, y, dt, tol, max_iter):
    y_new = y.copy()
    resid_norm = np.inf
    for _ in range(max_iter):
        y_mid = 0.5 * (y + y_new)
        resid = y_new - y - dt * field(y_mid)
        resid_norm = np.linalg.norm(resid)
        if not np.isfinite(resid_norm):
            raise StepFailureError("implicit midpoint residual is non-finite")
        if resid_norm <= tol:
            return y_new
        G = np.eye(y.size) - 0.5 * dt * jacobian(y_mid)
        y_new = y_new - np.linalg.solve(G, resid)
    # accept near-converged steps: one extra residual evaluation
    y_mid = 0.5 * (y + y_new)
    resid_norm = float(np.linalg.norm(y_new - y - dt * field(y_mid)))
    if resid_norm <= 100.0 * tol:
        return y_new
    raise StepFailureError(
        f"implicit midpoint did not converge in {max_iter} iterations",
        residual=resid_norm,
    )


def stormer_verlet_step(model, y, dt, mu):
    """Kick-drift-kick update for separable canonical models."""
    if not (model.separable and model.kind == "canonical"):
        raise UnsupportedModelError(
            "Stormer-Verlet requires a separable canonical model"
        )
    y = model.check_state(y)
    n = model.n
    q, p = y[:n].copy(), y[n:].copy()
    p -= 0.5 * dt * model.gradient(np.concatenate([q, p]), mu)[:n]
    q += dt * model.gradient(np.concatenate([q, p]), mu)[n:]
    p -= 0.5 * dt * model.gradient(np.concatenate([q, p]), mu)[:n]
    return np.concatenate([q, p])


SCHEMES = ("midpoint", "stormer_verlet")


def integrate(model, y0, mu, time_grid, scheme="midpoint", newton_tol=None,
              max_iter=50):
    """Integrate `model` from y0 over `time_grid`, sampling every instant.

    Dissipative and non-canonical models require the midpoint scheme;
    separable canonical models may use either.  Linear models with a
    uniform grid go through a factored midpoint propagator (one LU for the
    whole trajectory).
    """
    if scheme not in SCHEMES:
        raise ValidationError(f"unknown scheme '{scheme}'; choose from {SCHEMES}")
    y0 = model.check_state(y0)
    grid = np.asarray(time_grid, dtype=float).ravel()
    if grid.size < 1 or (grid.size > 1 and np.any(np.diff(grid) <= 0.0)):
        raise ValidationError("time grid must be strictly increasing")
    if scheme == "stormer_verlet" and not (
        model.separable and model.kind == "canonical"
    ):
        raise UnsupportedModelError(
            f"scheme 'stormer_verlet' is incompatible with model kind "
            f"'{model.kind}' (separable={model.separable})"
        )

    states = np.empty((model.dim, grid.size))
    states[:, 0] = y0
    if grid.size == 1:
        return Trajectory(times=grid, states=states, parameter=np.atleast_1d(mu))

    steps = np.diff(grid)
    uniform = np.max(np.abs(steps - steps[0])) <= 1e-12 * abs(steps[0])
    if scheme == "midpoint" and model.linear_field and uniform:
        _propagate_linear_midpoint(model, mu, states, steps[0])
    else:
        if model.hessian is not None or model.linear_field:
            jac_mu = lambda s: model.field_jacobian(s, mu)  # noqa: E731
        else:
            jac_mu = None
        y = y0
        for i, dt in enumerate(steps):
            try:
                if scheme == "midpoint":
                    y = implicit_midpoint_step(
                        lambda s: model.field(s, mu), y, dt,
                        newton_tol=newton_tol, max_iter=max_iter, jacobian=jac_mu,
                    )
                else:
                    y = stormer_verlet_step(model, y, dt, mu)
            except StepFailureError as exc:
                raise StepFailureError(
                    f"step to t={grid[i + 1]:g} failed: {exc}", residual=exc.residual
                ) from exc
            if not np.isfinite(y).all():
                raise NonFiniteStateError(f"state became non-finite at t={grid[i+1]:g}")
            states[:, i + 1] = y
    return Trajectory(times=grid, states=states, parameter=np.atleast_1d(mu))


def _propagate_linear_midpoint(model, mu, states, dt):
    M = model.field_matrix(mu)
    eye = np.eye(model.dim)
    lu = scipy.linalg.lu_factor(eye - 0.5 * dt * M)
    plus = eye + 0.5 * dt * M
    for i in range(states.shape[1] - 1):
        states[:, i + 1] = scipy.linalg.lu_solve(lu, plus @ states[:, i])


def hamiltonian_series(model, trajectory, mu=None):
    """H(y(t_i)) along a trajectory (convenience for diagnostics/CSV)."""
    if mu is None:
        mu = trajectory.parameter
    return np.array(
        [model.hamiltonian(trajectory.states[:, i], mu)
         for i in range(trajectory.n_steps)]
    )
