"""Tests for the dynamical low-rank reduced basis method."""

import numpy as np
import pytest

from hamred.dlr import (
    DlrState,
    coefficient_gram,
    dlr_initialize,
    dlr_integrate,
    dlr_step,
    dlr_velocity,
    tangent_project,
)
from hamred.errors import RankDegeneracyError
from hamred.basis import assemble_snapshots, complex_svd_basis
from hamred.integrators import integrate
from hamred.models import HamiltonianModel, ParameterSet, build_model
from hamred.rng import derive_rng
from hamred.rom import galerkin_reduce, reduced_initial_condition, simulate_rom
from hamred.symplectic import poisson_matrix, random_symplectic


@pytest.fixture(scope="module")
def wave_dlr():
    model = build_model({"name": "linear_wave", "n": 16})
    params = ParameterSet(
        samples=[[m] for m in np.linspace(0.6, 1.8, 5)],
        time_grid=np.linspace(0.0, 0.5, 51),
    )
    return model, params


class TestCoefficientGram:
    def test_identity_coefficients(self):
        S, smallest = coefficient_gram(np.eye(4))
        np.testing.assert_array_equal(S, 2.0 * np.eye(4))
        assert smallest == pytest.approx(2.0)

    def test_zero_is_singular(self):
        S, smallest = coefficient_gram(np.zeros((4, 3)))
        np.testing.assert_array_equal(S, np.zeros((4, 4)))
        assert smallest == 0.0

    def test_symmetric_psd(self):
        rng = derive_rng(60, "gram-psd")
        for _ in range(5):
            Z = rng.standard_normal((6, 4))
            S, smallest = coefficient_gram(Z)
            assert np.max(np.abs(S - S.T)) <= 1e-14
            assert np.linalg.eigvalsh(S)[0] >= -1e-12
            assert smallest >= -1e-12


class TestTangentProject:
    def test_fixes_coefficient_directions(self):
        rng = derive_rng(61, "tangent-fix")
        A = random_symplectic(4, 2, rng, orthonormal=True)
        Z = rng.standard_normal((4, 6))
        G = rng.standard_normal((4, 6))
        np.testing.assert_allclose(tangent_project(A, Z, A @ G), A @ G, atol=1e-12)

    def test_idempotent(self):
        rng = derive_rng(62, "tangent-idem")
        A = random_symplectic(5, 2, rng, orthonormal=True)
        Z = rng.standard_normal((4, 7))
        Y = rng.standard_normal((10, 7))
        once = tangent_project(A, Z, Y)
        twice = tangent_project(A, Z, once)
        assert np.max(np.abs(twice - once)) <= 1e-10

    def test_brute_force_symplectic_orthogonality(self):
        # tangent space of the rank-2k manifold at (A, Z) assembled by brute
        # force from the constraints X_A^T A = 0, X_A J_2k = J_2n X_A
        rng = derive_rng(63, "tangent-brute")
        n, k, p = 2, 1, 3
        A = random_symplectic(n, k, rng, orthonormal=True)
        Z = rng.standard_normal((2 * k, p))
        Y = rng.standard_normal((2 * n, p))
        J2n, J2k = poisson_matrix(n), poisson_matrix(k)

        rows = []
        for i in range(2 * k):
            for j in range(2 * k):
                C = np.zeros((2 * n, 2 * k))
                C[:, j] = A[:, i]
                rows.append(C.ravel(order="F"))
        for i in range(2 * n):
            for j in range(2 * k):
                C = np.zeros((2 * n, 2 * k))
                C[i, :] += J2k[:, j]
                C[:, j] -= J2n[i, :]
                rows.append(C.ravel(order="F"))
        constraints = np.array(rows)
        _, sv, Vt = np.linalg.svd(constraints)
        null = Vt[np.sum(sv > 1e-10):].T

        basis_vectors = [null[:, i].reshape(2 * n, 2 * k, order="F") @ Z
                         for i in range(null.shape[1])]
        for i in range(2 * k):
            for j in range(p):
                XZ = np.zeros((2 * k, p))
                XZ[i, j] = 1.0
                basis_vectors.append(A @ XZ)

        resid = Y - tangent_project(A, Z, Y)
        for T in basis_vectors:
            pairing = abs(float(np.sum(resid * (J2n @ T))))
            assert pairing <= 1e-10 * max(1.0, np.linalg.norm(T))

    def test_singular_gram_rejected(self):
        rng = derive_rng(64, "tangent-sing")
        A = random_symplectic(4, 2, rng, orthonormal=True)
        Z = np.zeros((4, 3))
        Y = rng.standard_normal((8, 3))
        with pytest.raises(RankDegeneracyError):
            tangent_project(A, Z, Y)


class TestDlrVelocity:
    def test_equilibrium_is_stationary(self):
        n = 4
        model = HamiltonianModel(
            name="still",
            dim=2 * n,
            kind="canonical",
            hamiltonian=lambda y, mu: 0.0,
            gradient=lambda y, mu: np.zeros(2 * n),
            separable=False,
        )
        rng = derive_rng(65, "dlr-eq")
        A = random_symplectic(n, 1, rng, orthonormal=True)
        Z = rng.standard_normal((2, 3))
        dA, dZ = dlr_velocity(DlrState(A=A, Z=Z), model, [1.0, 1.0, 1.0])
        np.testing.assert_array_equal(dA, np.zeros_like(A))
        np.testing.assert_array_equal(dZ, np.zeros_like(Z))

    def test_matches_static_rom_field(self, wave_dlr):
        model, params = wave_dlr
        A0, Z0 = dlr_initialize(model, ParameterSet(
            samples=[params.samples[0]], time_grid=params.time_grid), 1)
        rm = galerkin_reduce(model, A0)
        mu = params.samples[0]
        _, dZ = dlr_velocity(DlrState(A=A0, Z=Z0), model, [mu])
        np.testing.assert_allclose(
            dZ[:, 0], rm.dynamics.field(Z0[:, 0], mu), atol=1e-12
        )

    def test_tangent_constraints(self, wave_dlr):
        model, params = wave_dlr
        A0, Z0 = dlr_initialize(model, params, 3)
        dA, _ = dlr_velocity(DlrState(A=A0, Z=Z0), model, params.samples)
        J2n, J2k = poisson_matrix(model.n), poisson_matrix(3)
        assert np.max(np.abs(dA.T @ A0)) <= 1e-10
        assert np.max(np.abs(dA @ J2k - J2n @ dA)) <= 1e-10


class TestDlrStep:
    def test_zero_step_is_identity(self, wave_dlr):
        model, params = wave_dlr
        A0, Z0 = dlr_initialize(model, params, 2)
        state = DlrState(A=A0, Z=Z0, t=0.0)
        after = dlr_step(state, model, list(params.samples), 0.0)
        np.testing.assert_array_equal(after.A, A0)
        np.testing.assert_array_equal(after.Z, Z0)

    def test_invariant_manifold_keeps_basis(self):
        # rotation-invariant H: the exact solution stays in range(A0), so the
        # projected basis velocity vanishes and A must not move
        n = 3
        model = HamiltonianModel(
            name="rotor",
            dim=2 * n,
            kind="canonical",
            hamiltonian=lambda y, mu: 0.5 * float(y @ y),
            gradient=lambda y, mu: np.asarray(y, dtype=float),
            hessian=lambda y, mu: np.eye(2 * n),
            separable=False,
            linear_field=True,
        )
        rng = derive_rng(66, "dlr-invariant")
        A0 = random_symplectic(n, 1, rng, orthonormal=True)
        Z0 = rng.standard_normal((2, 2))
        state = DlrState(A=A0, Z=Z0)
        after = dlr_step(state, model, [1.0, 1.0], 0.05)
        assert np.max(np.abs(after.A - A0)) <= 1e-12

    def test_frozen_basis_substep_conserves_quadratic_energy(self, wave_dlr):
        # with A frozen the Z-substep is the canonical reduced flow, and the
        # midpoint solve conserves the quadratic reduced Hamiltonian
        model, params = wave_dlr
        A0, Z0 = dlr_initialize(model, params, 3)
        state = DlrState(A=A0, Z=Z0)
        after = dlr_step(state, model, list(params.samples), 1e-3)
        for j, mu in enumerate(params.samples):
            h_before = model.hamiltonian(A0 @ Z0[:, j], mu)
            h_after = model.hamiltonian(A0 @ after.Z[:, j], mu)
            assert abs(h_after - h_before) <= 1e-12 * (1.0 + abs(h_before))

    def test_structure_preserved_over_steps(self, wave_dlr):
        model, params = wave_dlr
        A0, Z0 = dlr_initialize(model, params, 3)
        state = DlrState(A=A0, Z=Z0)
        for _ in range(50):
            state = dlr_step(state, model, list(params.samples), 1e-4)
        sym, orth = state.structure_residuals()
        assert sym <= 1e-8 and orth <= 1e-8


class TestDlrIntegrate:
    def test_full_basis_matches_fom(self):
        model = build_model({"name": "linear_wave", "n": 4})
        params = ParameterSet(samples=[[1.0], [1.3]],
                              time_grid=np.linspace(0.0, 0.2, 21))
        A0 = np.eye(8)
        Y0 = np.column_stack([model.initial_state(m) for m in params.samples])
        result = dlr_integrate(A0, Y0, model, params)
        assert np.max(result.reconstruction_errors) <= 1e-8

    def test_single_parameter_close_to_static_rom(self):
        model = build_model({"name": "linear_wave", "n": 16})
        params = ParameterSet(samples=[[1.2]],
                              time_grid=np.linspace(0.0, 0.25, 26))
        k = 1
        A0, Z0 = dlr_initialize(model, params, k)
        result = dlr_integrate(A0, Z0, model, params)
        dlr_err = float(np.max(result.reconstruction_errors))

        snaps = assemble_snapshots(model, params)
        basis = complex_svd_basis(snaps, k).basis
        rm = galerkin_reduce(model, basis)
        mu = params.samples[0]
        y0 = model.initial_state(mu)
        red = simulate_rom(rm, reduced_initial_condition(basis, y0), mu,
                           params.time_grid)
        fom = integrate(model, y0, mu, params.time_grid)
        static_err = float(np.max(
            np.linalg.norm(fom.states - basis.matrix @ red.states, axis=0)
        ))
        assert dlr_err <= 2.0 * static_err + 1e-12

    def test_energy_near_conserved(self, wave_dlr):
        model, params = wave_dlr
        fine = ParameterSet(samples=params.samples,
                            time_grid=5e-7 * np.arange(501))
        A0, Z0 = dlr_initialize(model, fine, 4)
        result = dlr_integrate(A0, Z0, model, fine, compare_fom=False)
        for j, mu in enumerate(params.samples):
            h = np.array([
                model.hamiltonian(result.reconstructions[:, j, i], mu)
                for i in range(result.times.size)
            ])
            assert np.max(np.abs(h - h[0])) <= 1e-6 * (1.0 + abs(h[0]))

    def test_rejects_bad_initial_basis(self, wave_dlr):
        model, params = wave_dlr
        A0 = np.ones((model.dim, 4))
        with pytest.raises(Exception):
            dlr_integrate(A0, np.ones((4, len(params.samples))), model, params)
