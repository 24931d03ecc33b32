"""Tests for snapshot assembly and the basis generators."""

import numpy as np
import pytest

from hamred.basis import (
    SnapshotMatrix,
    assemble_snapshots,
    complex_svd_basis,
    cotangent_lift,
    greedy_symplectic_basis,
    pod_basis,
    projection_error,
    psd_svd_like_basis,
)
from hamred.errors import RankDeficiencyError, ValidationError
from hamred.models import HamiltonianModel, ParameterSet, build_model
from hamred.rng import derive_rng
from hamred.symplectic import (
    is_symplectic,
    poisson_matrix,
    random_symplectic,
    symplectic_gram,
)


def random_snapshots(rng, n, N, scale=1.0):
    data = scale * rng.standard_normal((2 * n, N))
    return SnapshotMatrix(data=data, provenance=[(np.zeros(1), float(i))
                                                 for i in range(N)])


@pytest.fixture(scope="module")
def wave_setup():
    model = build_model({"name": "linear_wave", "n": 24})
    params = ParameterSet(
        samples=[[0.6], [1.1], [1.7]], time_grid=np.linspace(0.0, 0.6, 25)
    )
    return model, params, assemble_snapshots(model, params)


class TestAssembleSnapshots:
    def test_single_column(self):
        model = build_model({"name": "linear_wave", "n": 8})
        params = ParameterSet(samples=[[1.0]], time_grid=[0.0])
        snaps = assemble_snapshots(model, params)
        assert snaps.data.shape == (16, 1)
        np.testing.assert_array_equal(snaps.data[:, 0], model.initial_state(1.0))

    def test_column_cardinality_and_order(self, wave_setup):
        model, params, snaps = wave_setup
        assert snaps.data.shape == (48, 3 * 25)
        # parameters outer, time inner
        mu, t = snaps.provenance[25]
        assert mu[0] == 1.1 and t == 0.0
        np.testing.assert_array_equal(
            snaps.data[:, 25], model.initial_state(1.1)
        )

    def test_deterministic(self, wave_setup):
        model, params, _ = wave_setup
        a = assemble_snapshots(model, params)
        b = assemble_snapshots(model, params)
        assert a.data.tobytes() == b.data.tobytes()


class TestCotangentLift:
    def test_rank_one_snapshots(self):
        n, N = 6, 5
        e1 = np.zeros(n)
        e1[0] = 1.0
        data = np.concatenate([e1, e1])[:, None] * np.linspace(1, 2, N)
        M = SnapshotMatrix(data=data, provenance=[(np.zeros(1), 0.0)] * N)
        rep = cotangent_lift(M, 1)
        assert rep.projection_error <= 1e-12
        np.testing.assert_allclose(np.abs(rep.basis.matrix[0, 0]), 1.0, atol=1e-12)

    def test_full_space_exact(self):
        rng = derive_rng(40, "cl-full")
        M = random_snapshots(rng, 5, 20)
        rep = cotangent_lift(M, 5)
        assert rep.basis.matrix.shape == (10, 10)
        assert rep.projection_error <= 1e-10

    def test_block_diagonal_structure(self, wave_setup):
        _, _, snaps = wave_setup
        rep = cotangent_lift(snaps, 4)
        A = rep.basis.matrix
        n, k = snaps.n, 4
        np.testing.assert_array_equal(A[:n, k:], np.zeros((n, k)))
        np.testing.assert_array_equal(A[n:, :k], np.zeros((n, k)))
        rep.basis.validate(tol=1e-10)

    def test_error_matches_discarded_singular_values(self):
        # Eckart-Young oracle on the stacked phase matrix
        rng = derive_rng(41, "cl-ey")
        M = random_snapshots(rng, 8, 12)
        n = 8
        M1 = np.hstack([M.data[n:], M.data[:n]])
        svals = np.linalg.svd(M1, compute_uv=False)
        for k in (2, 5):
            rep = cotangent_lift(M, k)
            expected = float(np.sqrt(np.sum(svals[k:] ** 2)))
            assert rep.projection_error == pytest.approx(expected, rel=1e-8)

    def test_k_out_of_range(self):
        rng = derive_rng(42, "cl-range")
        with pytest.raises(ValidationError):
            cotangent_lift(random_snapshots(rng, 4, 6), 5)

    def test_rank_deficient_padding(self):
        n, N = 6, 5
        e1 = np.zeros(n)
        e1[0] = 1.0
        data = np.concatenate([e1, e1])[:, None] * np.linspace(1, 2, N)
        M = SnapshotMatrix(data=data, provenance=[(np.zeros(1), 0.0)] * N)
        with pytest.warns(UserWarning, match="padding"):
            rep = cotangent_lift(M, 3)
        rep.basis.validate(tol=1e-10)
        assert rep.projection_error <= 1e-12
        with pytest.warns(UserWarning, match="padding"):
            rep = complex_svd_basis(M, 3)
        rep.basis.validate(tol=1e-10)


class TestComplexSvd:
    def test_rank_one_real_snapshots(self):
        n, N = 5, 7
        q = np.zeros(n)
        q[0] = 1.0
        data = np.concatenate([q, np.zeros(n)])[:, None] * np.linspace(1, 3, N)
        M = SnapshotMatrix(data=data, provenance=[(np.zeros(1), 0.0)] * N)
        rep = complex_svd_basis(M, 1)
        assert rep.projection_error <= 1e-12

    def test_unitarity_conditions(self, wave_setup):
        _, _, snaps = wave_setup
        rep = complex_svd_basis(snaps, 5)
        E = rep.basis.matrix[:, :5]
        n = snaps.n
        Phi, Psi = E[:n], E[n:]
        np.testing.assert_allclose(
            Phi.T @ Phi + Psi.T @ Psi, np.eye(5), atol=1e-10
        )
        np.testing.assert_allclose(Phi.T @ Psi, Psi.T @ Phi, atol=1e-10)
        rep.basis.validate(tol=1e-10)

    def test_orders_agree(self, wave_setup):
        _, _, snaps = wave_setup
        a = complex_svd_basis(snaps, 4, complex_order="paper")
        b = complex_svd_basis(snaps, 4, complex_order="qp")
        assert a.projection_error == pytest.approx(b.projection_error, abs=1e-10)
        # same subspace: projectors agree
        Pa = a.basis.matrix @ a.basis.matrix.T
        Pb = b.basis.matrix @ b.basis.matrix.T
        np.testing.assert_allclose(Pa, Pb, atol=1e-10)

    def test_optimality_against_random_bases(self):
        # 200 random ortho-symplectic competitors on a small instance
        rng = derive_rng(43, "csvd-opt")
        M = random_snapshots(rng, 2, 20)
        rep = complex_svd_basis(M, 1)
        for _ in range(200):
            A = random_symplectic(2, 1, rng, orthonormal=True)
            assert rep.projection_error <= projection_error(A, M) + 1e-12

    def test_never_worse_than_cotangent(self):
        rng = derive_rng(44, "csvd-vs-cl")
        for n, N, k in [(4, 10, 2), (6, 15, 3), (8, 30, 5)]:
            M = random_snapshots(rng, n, N)
            a = complex_svd_basis(M, k).projection_error
            b = cotangent_lift(M, k).projection_error
            assert a <= b + 1e-12


class TestPsdSvdLike:
    def test_exact_rank_two_capture(self):
        rng = derive_rng(45, "svdlike-rank2")
        n = 5
        x = rng.standard_normal(2 * n)
        Jx = poisson_matrix(n) @ x
        coeff = rng.standard_normal((2, 8))
        M = SnapshotMatrix(
            data=np.column_stack([x, Jx]) @ coeff,
            provenance=[(np.zeros(1), 0.0)] * 8,
        )
        rep = psd_svd_like_basis(M, 1)
        assert rep.projection_error <= 1e-10

    def test_energy_identity(self, wave_setup):
        _, _, snaps = wave_setup
        rep = psd_svd_like_basis(snaps, 4)
        total = np.sum(rep.spectrum_retained**2) + np.sum(rep.spectrum_discarded**2)
        energy = np.sum(snaps.data**2)
        assert abs(total - energy) <= 1e-8 * energy

    def test_reconstruction_error_identity(self, wave_setup):
        _, _, snaps = wave_setup
        energy = np.sum(snaps.data**2)
        for k in (2, 5, 9):
            rep = psd_svd_like_basis(snaps, k)
            discarded = float(np.sum(rep.spectrum_discarded**2))
            assert abs(rep.projection_error**2 - discarded) <= 1e-8 * energy

    def test_insufficient_rank(self):
        rng = derive_rng(46, "svdlike-rank")
        data = rng.standard_normal((8, 2))      # rank 2 -> b+q <= 2
        M = SnapshotMatrix(data=data, provenance=[(np.zeros(1), 0.0)] * 2)
        with pytest.raises(RankDeficiencyError):
            psd_svd_like_basis(M, 3)

    def test_basis_symplectic_not_orthonormal(self, wave_setup):
        _, _, snaps = wave_setup
        rep = psd_svd_like_basis(snaps, 6)
        A = rep.basis.matrix
        assert is_symplectic(A, tol=1e-10 * max(1.0, np.sum(A * A)))
        assert not rep.basis.orthonormal


class TestPod:
    def test_rank_one(self):
        rng = derive_rng(47, "pod-rank1")
        u = rng.standard_normal(12)
        data = u[:, None] * rng.standard_normal(6)
        M = SnapshotMatrix(data=data, provenance=[(np.zeros(1), 0.0)] * 6)
        U = pod_basis(M, 1)
        assert np.linalg.norm(data - U @ (U.T @ data)) <= 1e-12

    def test_full_space(self):
        rng = derive_rng(48, "pod-full")
        M = random_snapshots(rng, 4, 20)
        U = pod_basis(M, 8)
        assert np.linalg.norm(M.data - U @ (U.T @ M.data)) <= 1e-10

    def test_eckart_young(self):
        rng = derive_rng(49, "pod-ey")
        M = random_snapshots(rng, 6, 10)
        svals = np.linalg.svd(M.data, compute_uv=False)
        for m in (2, 5):
            U = pod_basis(M, m)
            err = np.linalg.norm(M.data - U @ (U.T @ M.data))
            assert err == pytest.approx(np.sqrt(np.sum(svals[m:] ** 2)), rel=1e-8)


class TestGreedy:
    def test_exact_two_dimensional_manifold(self):
        # rotation-invariant H: trajectories stay in span(y0, J y0)
        n = 4
        model = HamiltonianModel(
            name="rotor",
            dim=2 * n,
            kind="canonical",
            hamiltonian=lambda y, mu: 0.5 * float(y @ y),
            gradient=lambda y, mu: np.asarray(y, dtype=float),
            hessian=lambda y, mu: np.eye(2 * n),
            separable=False,
            linear_field=True,
            initial_state=lambda mu: np.eye(2 * n)[:, 0] * float(np.atleast_1d(mu)[0]),
        )
        params = ParameterSet(samples=[[1.0], [2.0]],
                              time_grid=np.linspace(0.0, 1.0, 11))
        rep = greedy_symplectic_basis(model, params, k_max=3, tol=1e-8,
                                      indicator="projection")
        assert rep.basis.k == 1
        assert rep.status == "converged"
        assert rep.projection_error <= 1e-8

    def test_monotone_and_hierarchical(self, wave_setup):
        model, params, snaps = wave_setup
        rep = greedy_symplectic_basis(model, params, k_max=8, tol=1e-12,
                                      indicator="projection")
        errs = np.array(rep.history)
        assert np.all(np.diff(errs) <= 1e-10)
        rep.basis.validate(tol=1e-10)

    def test_hierarchy_of_spans(self, wave_setup):
        model, params, _ = wave_setup
        small = greedy_symplectic_basis(model, params, k_max=3, tol=1e-12,
                                        indicator="projection").basis.matrix
        large = greedy_symplectic_basis(model, params, k_max=6, tol=1e-12,
                                        indicator="projection").basis.matrix
        resid = small - large @ (large.T @ small)
        assert np.max(np.abs(resid)) <= 1e-10

    def test_hamiltonian_indicator_runs(self, wave_setup):
        model, params, snaps = wave_setup
        rep = greedy_symplectic_basis(model, params, k_max=6, tol=1e-10,
                                      indicator="hamiltonian")
        rep.basis.validate(tol=1e-10)
        assert rep.basis.k <= 6
        # basis captures the initial conditions it has seen
        y0 = model.initial_state(params.samples[0])
        A = rep.basis.matrix
        assert np.linalg.norm(y0 - A @ (A.T @ y0)) <= 1e-8 * np.linalg.norm(y0)

    def test_geometric_decay(self):
        model = build_model({"name": "linear_wave", "n": 32})
        params = ParameterSet(
            samples=[[m] for m in np.linspace(0.5, 2.0, 6)],
            time_grid=np.linspace(0.0, 0.5, 21),
        )
        rep = greedy_symplectic_basis(model, params, k_max=10, tol=1e-13,
                                      indicator="projection")
        errs = np.array(rep.history)
        errs = errs[errs > 1e-10]
        ks = np.arange(1, errs.size + 1)
        slope, intercept = np.polyfit(ks, np.log(errs), 1)
        fit = slope * ks + intercept
        ss_res = np.sum((np.log(errs) - fit) ** 2)
        ss_tot = np.sum((np.log(errs) - np.mean(np.log(errs))) ** 2)
        assert slope < 0.0
        assert 1.0 - ss_res / ss_tot >= 0.9

    def test_validates_arguments(self, wave_setup):
        model, params, _ = wave_setup
        with pytest.raises(ValidationError):
            greedy_symplectic_basis(model, params, k_max=0, tol=1e-8)
        with pytest.raises(ValidationError):
            greedy_symplectic_basis(model, params, k_max=2, tol=-1.0)
        with pytest.raises(ValidationError):
            greedy_symplectic_basis(model, params, k_max=2, tol=1e-8,
                                    indicator="residual")


class TestOrderingInvariants:
    def test_complex_svd_not_worse_than_cotangent_on_model_data(self, wave_setup):
        _, _, snaps = wave_setup
        for k in (2, 4, 8):
            a = complex_svd_basis(snaps, k).projection_error
            b = cotangent_lift(snaps, k).projection_error
            assert a <= b + 1e-12

    def test_all_methods_symplectic_on_model_data(self, wave_setup):
        model, params, snaps = wave_setup
        bases = [
            cotangent_lift(snaps, 5).basis,
            complex_svd_basis(snaps, 5).basis,
            psd_svd_like_basis(snaps, 5).basis,
            greedy_symplectic_basis(model, params, k_max=5, tol=1e-12,
                                    indicator="projection").basis,
        ]
        for basis in bases:
            G = symplectic_gram(basis.matrix)
            assert np.max(np.abs(G - poisson_matrix(basis.k))) <= 1e-10
