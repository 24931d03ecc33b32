"""Symplectic numerical linear algebra on R^{2n}.

State vectors are ordered y = (q_1..q_n, p_1..p_n) throughout.  The
canonical structure matrix is

    J_2n = [[ 0,  I_n],
            [-I_n, 0 ]],

and a matrix A in R^{2n x 2k} is symplectic when A^T J_2n A = J_2k,
ortho-symplectic when additionally A^T A = I_2k.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    DecompositionFailureError,
    DegenerateCandidateError,
    InvalidDimensionError,
    NonFiniteStateError,
    StructureViolationError,
)

_EPS = np.finfo(float).eps


def poisson_matrix(n):
    """Dense canonical structure matrix J_2n = [[0, I], [-I, 0]]."""
    if n < 1:
        raise InvalidDimensionError(f"half-dimension must be >= 1, got {n}")
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = np.eye(n)
    J[n:, :n] = -np.eye(n)
    return J


def apply_structure(Y):
    """J_2n @ Y without forming J: (q, p) -> (p, -q).  Exact (sign flips)."""
    Y = np.asarray(Y)
    n = _half_dim(Y.shape[0])
    return np.concatenate([Y[n:], -Y[:n]], axis=0)


def apply_structure_transpose(Y):
    """J_2n^T @ Y = (-p, q).  Exact (sign flips)."""
    Y = np.asarray(Y)
    n = _half_dim(Y.shape[0])
    return np.concatenate([-Y[n:], Y[:n]], axis=0)


def _half_dim(m):
    if m % 2 or m == 0:
        raise InvalidDimensionError(f"dimension must be even and positive, got {m}")
    return m // 2


def symplectic_gram(A):
    """A^T J_2n A for a 2n x m matrix A."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise InvalidDimensionError("expected a matrix")
    return A.T @ apply_structure(A)


def is_symplectic(A, tol=1e-10):
    """True iff max|A^T J_2n A - J_2k| <= tol.

    Both the row and the column count must be even.
    """
    A = _as_matrix(A)
    if A.shape[1] % 2:
        raise InvalidDimensionError(
            f"symplectic test needs an even column count, got {A.shape[1]}"
        )
    k = A.shape[1] // 2
    G = symplectic_gram(A)
    return bool(np.max(np.abs(G - poisson_matrix(k))) <= tol)


def symplectic_inverse(A, tol=1e-8):
    """Symplectic inverse A^+ = J_2k^T A^T J_2n of a symplectic A.

    Satisfies A^+ A = I_2k; for ortho-symplectic A it equals A^T.  The
    products with the structure matrices are evaluated as sign flips and
    row swaps, so no rounding is introduced beyond the transpose.
    """
    A = _as_matrix(A)
    if not is_symplectic(A, tol=tol * max(1.0, float(np.sum(A * A)))):
        raise StructureViolationError("matrix is not symplectic; no symplectic inverse")
    return apply_structure_transpose(apply_structure_transpose(A).T)


def symplectic_project(A, Y):
    """Project the columns of Y onto range(A) along the symplectic complement:
    P_A Y = A A^+ Y."""
    A = _as_matrix(A)
    Y = np.asarray(Y, dtype=float)
    if Y.shape[0] != A.shape[0]:
        raise InvalidDimensionError(
            f"row mismatch: basis has {A.shape[0]} rows, data has {Y.shape[0]}"
        )
    return A @ (symplectic_inverse(A) @ Y)


@dataclass(frozen=True)
class SymplecticBasis:
    """A symplectic basis A in R^{2n x 2k}, optionally ortho-symplectic."""

    matrix: np.ndarray
    orthonormal: bool = False

    def __post_init__(self):
        A = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", A)
        if A.ndim != 2 or A.shape[0] % 2 or A.shape[1] % 2:
            raise InvalidDimensionError(f"basis must be 2n x 2k, got {A.shape}")
        if A.shape[1] > A.shape[0]:
            raise InvalidDimensionError("basis cannot be wider than the full space")

    @property
    def n(self):
        return self.matrix.shape[0] // 2

    @property
    def k(self):
        return self.matrix.shape[1] // 2

    def validate(self, tol=1e-10):
        """Check the structural invariants; raise StructureViolationError."""
        A = self.matrix
        scale = max(1.0, float(np.sum(A * A)))
        G = symplectic_gram(A)
        resid = np.max(np.abs(G - poisson_matrix(self.k)))
        if resid > tol * scale:
            raise StructureViolationError(
                f"basis is not symplectic: max|A^T J A - J_2k| = {resid:.3e}"
            )
        if self.orthonormal:
            resid = np.max(np.abs(A.T @ A - np.eye(2 * self.k)))
            if resid > tol * scale:
                raise StructureViolationError(
                    f"basis is not orthonormal: max|A^T A - I| = {resid:.3e}"
                )
            E = A[:, : self.k]
            resid = np.max(np.abs(A[:, self.k :] - apply_structure_transpose(E)))
            if resid > tol * scale:
                raise StructureViolationError(
                    "orthonormal basis lacks the [E, J^T E] block form"
                )
        return self


def _as_matrix(A):
    if isinstance(A, SymplecticBasis):
        return A.matrix
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] % 2:
        raise InvalidDimensionError(f"expected a 2n x m matrix, got shape {A.shape}")
    return A


def sr_insert(E, v, tol=1e-12):
    """Orthogonalize v against the ortho-symplectic frame [E, J^T E] and
    return the normalized new direction e_{k+1}.

    [E, e_{k+1}, J^T E, J^T e_{k+1}] is again ortho-symplectic.  Two
    orthogonalization passes bound the rounding drift.  Raises
    DegenerateCandidateError when v adds no information (residual <= tol).
    """
    v = np.asarray(v, dtype=float).ravel()
    if E is None or np.size(E) == 0:
        E = np.zeros((v.size, 0))
    E = np.asarray(E, dtype=float)
    if E.shape[0] != v.size:
        raise InvalidDimensionError("candidate length does not match basis rows")
    frame = np.hstack([E, apply_structure_transpose(E)])
    w = v.copy()
    for _ in range(2):
        for j in range(frame.shape[1]):
            w -= (frame[:, j] @ w) * frame[:, j]
    norm = np.linalg.norm(w)
    if norm <= tol:
        raise DegenerateCandidateError(
            f"candidate adds no information: residual norm {norm:.3e} <= {tol:.0e}"
        )
    return w / norm


@dataclass(frozen=True)
class SvdLikeFactors:
    """Factors B = S D Q with S in Sp(2n, R^{2n}), Q orthogonal and D a
    quasi-diagonal pattern carrying the symplectic singular values.

    Columns i and n+i of S are canonical partners.  The first b columns
    pair with positive value sigma_i; columns b..b+q-1 are the isotropic
    directions (unit weight in D); the rank of the decomposed matrix is
    2b + q.
    """

    S: np.ndarray
    D: np.ndarray
    Q: np.ndarray
    b: int
    q: int
    sigma: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def rank(self):
        return 2 * self.b + self.q

    def reconstruct(self):
        return self.S @ self.D @ self.Q

    def validate(self, tol=1e-6, tol_rec=1e-8):
        """Check the factor invariants.

        The Gram residual of S is measured entrywise against the product of
        the column norms: the exact S of a graded matrix has columns of
        widely different size, so an absolute residual would conflate
        conditioning with error.  Rounding noise between weakly paired
        directions cannot be removed by the orthogonal right
        transformations the factorization permits, hence the default
        tolerance; bases extracted from S are re-polished exactly.
        """
        n = self.S.shape[0] // 2
        n_s = self.Q.shape[0]
        G = symplectic_gram(self.S) - poisson_matrix(n)
        norms = np.maximum(np.linalg.norm(self.S, axis=0), 1.0)
        resid = float(np.max(np.abs(G) / np.outer(norms, norms)))
        if resid > tol:
            raise StructureViolationError(
                f"S is not symplectic: scaled Gram residual {resid:.3e}"
            )
        resid = float(np.max(np.abs(self.Q.T @ self.Q - np.eye(n_s))))
        if resid > tol:
            raise StructureViolationError(f"Q is not orthogonal: {resid:.3e}")
        if np.any(self.sigma <= 0.0):
            raise StructureViolationError("symplectic singular values must be > 0")
        if not np.array_equal(self.D, d_pattern(n, n_s, self.sigma, self.q)):
            raise StructureViolationError("D does not match the required pattern")
        return self


def d_pattern(n, n_s, sigma, q):
    """The structured D matrix: Sigma at (0:b, 0:b), I_q at (b:b+q, b:b+q),
    Sigma again at (n:n+b, b+q:b+q+b); everything else zero."""
    sigma = np.asarray(sigma, dtype=float)
    b = sigma.size
    D = np.zeros((2 * n, n_s))
    D[np.arange(b), np.arange(b)] = sigma
    D[b + np.arange(q), b + np.arange(q)] = 1.0
    D[n + np.arange(b), b + q + np.arange(b)] = sigma
    return D


def svd_like(B, tol_rank=None):
    """SVD-like decomposition B = S D Q of a 2n x n_s matrix.

    S is square symplectic, Q orthogonal, and D carries b symplectic
    singular values plus q isotropic unit entries with 2b + q equal to the
    numerical rank of B at threshold `tol_rank` (default 1e-10 times the
    largest singular value).

    The construction runs through the real Schur form of the skew-symmetric
    pairing matrix B^T J B: 2x2 blocks give canonically paired columns, the
    remaining isotropic content is compressed by an SVD, completed with
    symplectic partners (minimum-norm solves) and fresh canonical pairs
    from the symplectic complement.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 2:
        raise InvalidDimensionError("expected a matrix")
    n = _half_dim(B.shape[0])
    n_s = B.shape[1]
    if not np.isfinite(B).all():
        raise NonFiniteStateError("matrix contains non-finite entries")

    svals = np.linalg.svd(B, compute_uv=False) if min(B.shape) else np.zeros(0)
    smax = float(svals[0]) if svals.size else 0.0
    if tol_rank is None:
        tol_rank = 1e-10 * smax
    if smax == 0.0:
        return SvdLikeFactors(
            S=np.eye(2 * n), D=np.zeros((2 * n, n_s)), Q=np.eye(n_s), b=0, q=0
        )

    # Canonically paired column directions are extracted cluster by cluster:
    # each round takes the real Schur form of the pairing Gram of the still
    # unassigned columns, accepts the 2x2 blocks whose pairing (recomputed
    # from the mapped column vectors, which are accurate relative to their
    # own size) stands clearly above that round's noise floor, and repeats
    # on the remainder.  Weakly paired clusters are thereby resolved at
    # their own scale instead of being mistaken for isotropic content.
    Zacc = np.eye(n_s)
    active = list(range(n_s))
    pairs = []
    lam_global = 0.0
    for round_no in range(128):
        m = len(active)
        if m < 2:
            break
        C_act = B @ Zacc[:, active]
        K_act = C_act.T @ apply_structure(C_act)
        K_act = 0.5 * (K_act - K_act.T)
        T, Zs = scipy.linalg.schur(K_act, output="real")
        Zacc[:, active] = Zacc[:, active] @ Zs
        C_act = C_act @ Zs
        block_oms = []
        i = 0
        while i < m:
            if i + 1 < m and T[i + 1, i] != 0.0:
                om = float(C_act[:, i] @ apply_structure(C_act[:, i + 1]))
                block_oms.append((i, i + 1, om))
                i += 2
            else:
                i += 1
        if not block_oms:
            break
        lam_max = max(abs(om) for _, _, om in block_oms)
        if round_no == 0:
            lam_global = lam_max
        # floors: rank threshold, this round's Schur noise, the deflation
        # noise left behind by earlier rounds (scales with the strongest
        # pairing overall), and the fp resolution of each pairing itself
        lam_tol = max(tol_rank**2, 64.0 * _EPS * m * lam_max,
                      64.0 * _EPS * lam_global)
        taken = set()
        for i, j, om in block_oms:
            # both directions must carry content above the rank threshold;
            # noise directions fall through to the kernel where the
            # singular-value filter drops them
            norm_i = np.linalg.norm(C_act[:, i])
            norm_j = np.linalg.norm(C_act[:, j])
            pair_floor = max(lam_tol, 16.0 * _EPS * norm_i * norm_j)
            if abs(om) > pair_floor and min(norm_i, norm_j) > tol_rank:
                gi, gj = active[i], active[j]
                pairs.append((gj, gi, -om) if om < 0.0 else (gi, gj, om))
                taken.update((i, j))
        if not taken:
            break
        active = [active[i] for i in range(m) if i not in taken]

    pairs.sort(key=lambda t: -t[2])
    kernel_idx = sorted(active)

    # per pair: x column, y column, sigma, and the two Q rows
    pair_x = [(B @ Zacc[:, i]) / np.sqrt(om) for i, j, om in pairs]
    pair_y = [(B @ Zacc[:, j]) / np.sqrt(om) for i, j, om in pairs]
    pair_sigma = [np.sqrt(om) for _, _, om in pairs]
    pair_qx = [Zacc[:, i].copy() for i, j, om in pairs]
    pair_qy = [Zacc[:, j].copy() for i, j, om in pairs]

    ZN = Zacc[:, kernel_idx]
    C0 = B @ ZN
    if C0.shape[1]:
        U0, s0, V0t = np.linalg.svd(C0, full_matrices=False)
        q = int(np.count_nonzero(s0 > tol_rank))
        V0 = np.vstack([V0t, scipy.linalg.null_space(V0t).T]) if V0t.shape[0] < len(
            kernel_idx
        ) else V0t
        mixed = ZN @ V0.T
        iso_vecs = [U0[:, i] * s0[i] for i in range(q)]
        iso_qrows = [mixed[:, i].copy() for i in range(q)]
        spare_qrows = mixed[:, q:]
    else:
        iso_vecs = []
        iso_qrows = []
        spare_qrows = np.zeros((0, 0))
        q = 0

    # The isotropic dimension cannot exceed n; when near-full-rank inputs
    # leave more kernel directions than fit, the most strongly coupled ones
    # are promoted to canonical pairs (their pairing is genuine, merely too
    # weak for the cluster extraction above).  Rank 2b+q is unchanged.
    while len(pair_x) + q > n and q >= 2:
        G = np.column_stack(iso_vecs)
        O = G.T @ apply_structure(G)
        O = 0.5 * (O - O.T)
        flat = np.abs(np.triu(O, 1))
        a, c = np.unravel_index(int(np.argmax(flat)), O.shape)
        om = float(O[a, c])
        if om == 0.0:
            break
        if om < 0.0:
            a, c = c, a
            om = -om
        root = np.sqrt(om)
        pair_x.append(iso_vecs[a] / root)
        pair_y.append(iso_vecs[c] / root)
        pair_sigma.append(root)
        pair_qx.append(iso_qrows[a])
        pair_qy.append(iso_qrows[c])
        for idx in sorted((a, c), reverse=True):
            del iso_vecs[idx]
            del iso_qrows[idx]
        q -= 2

    b = len(pair_x)
    if b + q > n:
        raise DecompositionFailureError(
            f"isotropic dimension {b + q} exceeds n = {n}", residual=None
        )
    sigma = np.asarray(pair_sigma)

    S = np.zeros((2 * n, 2 * n))
    for m in range(b):
        S[:, m] = pair_x[m]
        S[:, n + m] = pair_y[m]
    for i in range(q):
        S[:, b + i] = iso_vecs[i]

    # Symplectic partners for the isotropic columns (least-norm solves).
    for i in range(q):
        cols = list(range(b + q)) + list(range(n, n + b + i))
        P = S[:, cols]
        target = np.zeros(len(cols))
        target[b + i] = 1.0
        S[:, n + b + i] = _omega_solve(P, target)

    # Fresh canonical pairs spanning the symplectic complement.
    fixed = 2 * (b + q)
    if fixed < 2 * n:
        cols = list(range(b + q)) + list(range(n, n + b + q))
        P = S[:, cols]
        M = apply_structure_transpose(P).T
        _, _, Vt = np.linalg.svd(M, full_matrices=True)
        null_basis = Vt[P.shape[1] :].T
        _complete_pairs(S, null_basis, b + q, n)

    D = d_pattern(n, n_s, sigma, q)

    Qt = np.zeros((n_s, n_s))
    for m in range(b):
        Qt[:, m] = pair_qx[m]
        Qt[:, b + q + m] = pair_qy[m]
    for i in range(q):
        Qt[:, b + i] = iso_qrows[i]
    if spare_qrows.size:
        Qt[:, 2 * b + q :] = spare_qrows
    Q = Qt.T

    resid = np.linalg.norm(S @ D @ Q - B)
    if resid > 1e-6 * max(smax, 1.0):
        raise DecompositionFailureError(
            "SVD-like decomposition did not reconstruct the input", residual=resid
        )
    return SvdLikeFactors(S=S, D=D, Q=Q, b=b, q=q, sigma=sigma)


def _omega_solve(P, target):
    """Least-norm w with P^T J w = target, rows equilibrated by column norms."""
    M = apply_structure_transpose(P).T
    scale = np.linalg.norm(M, axis=1)
    scale[scale == 0.0] = 1.0
    w, *_ = np.linalg.lstsq(M / scale[:, None], target / scale, rcond=None)
    return w


def _complete_pairs(S, null_basis, offset, n):
    """Fill S columns offset..n-1 and n+offset..2n-1 with canonical pairs of
    the symplectic complement spanned by `null_basis` (orthonormal)."""
    m = null_basis.shape[1]
    if m != 2 * (n - offset):
        raise DecompositionFailureError(
            f"symplectic complement has dimension {m}, expected {2 * (n - offset)}"
        )
    if m == 0:
        return
    KN = null_basis.T @ apply_structure(null_basis)
    KN = 0.5 * (KN - KN.T)
    TN, ZN = scipy.linalg.schur(KN, output="real")
    pos = offset
    i = 0
    while i < m:
        if i + 1 >= m or TN[i + 1, i] == 0.0:
            raise DecompositionFailureError(
                "symplectic complement is numerically degenerate"
            )
        om = float(ZN[:, i] @ KN @ ZN[:, i + 1])
        zi, zj = (i, i + 1) if om > 0 else (i + 1, i)
        root = np.sqrt(abs(om))
        if root < 1e-8:
            raise DecompositionFailureError(
                "symplectic complement is numerically degenerate", residual=root
            )
        S[:, pos] = null_basis @ ZN[:, zi] / root
        S[:, n + pos] = null_basis @ ZN[:, zj] / root
        pos += 1
        i += 2


def weighted_symplectic_singular_values(factors):
    """Column-norm-weighted symplectic singular values w_i.

    w_i = sigma_i * sqrt(|S_i|^2 + |S_{n+i}|^2) for the b paired columns and
    w_i = |S_i| for the q isotropic columns; they satisfy
    |B|_F^2 = sum_i w_i^2 for the decomposed matrix B.
    """
    S, b, q = factors.S, factors.b, factors.q
    n = S.shape[0] // 2
    w = np.empty(b + q)
    for i in range(b):
        w[i] = factors.sigma[i] * np.sqrt(
            np.sum(S[:, i] ** 2) + np.sum(S[:, n + i] ** 2)
        )
    for i in range(q):
        w[b + i] = np.linalg.norm(S[:, b + i])
    return w


def symplectic_pair_polish(A, passes=2):
    """Remove rounding-level cross terms from a canonically paired matrix
    A = [x_1..x_k, y_1..y_k] by symplectic Gram-Schmidt (strongest pair
    first) and renormalize each pairing to Omega(x_i, y_i) = 1.

    Used on bases whose pair columns were extracted from an ill-conditioned
    factor; the correction is of the order of the cross-term noise.
    """
    A = np.array(A, dtype=float)
    k = A.shape[1] // 2
    for _ in range(passes):
        for i in range(k):
            for w_col in (i, k + i):
                w = A[:, w_col]
                for j in range(i):
                    x, y = A[:, j], A[:, k + j]
                    w = w + (y @ apply_structure(w)) * x \
                        - (x @ apply_structure(w)) * y
                A[:, w_col] = w
            om = A[:, i] @ apply_structure(A[:, k + i])
            A[:, k + i] = A[:, k + i] / om
    return A


def random_symplectic(n, k, rng, orthonormal=False):
    """Random symplectic 2n x 2k matrix for sampling-based checks.

    Ortho-symplectic matrices come from the QR factors of a complex
    Gaussian matrix (every ortho-symplectic matrix has the [E, J^T E]
    form).  General symplectic matrices come from the Cayley transform of
    a random Hamiltonian matrix, restricted to k canonical column pairs.
    """
    if not 1 <= k <= n:
        raise InvalidDimensionError(f"need 1 <= k <= n, got k={k}, n={n}")
    if orthonormal:
        G = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
        U, _ = np.linalg.qr(G)
        E = np.vstack([U.real, U.imag])
        return np.hstack([E, apply_structure_transpose(E)])
    sym = rng.standard_normal((2 * n, 2 * n))
    sym = 0.5 * (sym + sym.T) / np.sqrt(2 * n)
    H = apply_structure(sym)
    S = np.linalg.solve(np.eye(2 * n) - 0.5 * H, np.eye(2 * n) + 0.5 * H)
    idx = np.concatenate([np.arange(k), n + np.arange(k)])
    return S[:, idx]
