# numerics.py
"""Dense complex linear algebra used by the precoders.

LQ is obtained from a Householder QR of the conjugate transpose, with the
diagonal phases of L pushed into Q so that every l_ii is real and >= 0.
All functions are pure and safe to call from parallel workers.
"""
from __future__ import annotations

from typing import List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from scipy.linalg import solve_triangular

ComplexMatrix = npt.NDArray[np.complex128]

RANK_TOL = 1e-12
DIAG_TOL = 1e-12


class RankDeficient(np.linalg.LinAlgError):
    """A pivot vanished during orthogonalization (degenerate channel draw)."""


class SingularDiagonal(np.linalg.LinAlgError):
    """A triangular system has a (numerically) zero diagonal entry."""


class NonSquare(ValueError):
    """A square matrix was required."""


def as_complex_matrix(a) -> ComplexMatrix:
    """Coerce `a` to a finite 2-D complex128 array."""
    mat = np.asarray(a, dtype=np.complex128)
    if mat.ndim == 1:
        mat = mat.reshape(1, -1)
    if mat.ndim != 2:
        raise ValueError(f"Expected a 2-D matrix, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ValueError("Matrix contains NaN or Inf entries")
    return mat


def _householder_qr(A: ComplexMatrix) -> Tuple[ComplexMatrix, ComplexMatrix]:
    """
    Reduced Householder QR of a tall matrix (rows >= cols).
    First loop reflects the columns of R; second loop accumulates Q backwards,
    H0 @ H1 @ ... @ Hk @ I.
    """
    m, n = A.shape
    R = A.copy()
    vs: List[Optional[np.ndarray]] = []
    for i in range(n):
        x = R[i:, i]
        normx = np.linalg.norm(x)
        if normx == 0.0:
            vs.append(None)
            continue
        # complex sign: reflect onto -phase(x0) * ||x|| e1
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * normx
        v /= np.linalg.norm(v)
        vs.append(v)
        R[i:, i:] -= 2.0 * np.outer(v, v.conj() @ R[i:, i:])

    Q = np.eye(m, n, dtype=np.complex128)
    for j in range(n - 1, -1, -1):
        v = vs[j]
        if v is None:
            continue
        Q[j:, :] -= 2.0 * np.outer(v, v.conj() @ Q[j:, :])

    return Q, np.triu(R[:n, :])


def lq_decompose(A) -> Tuple[ComplexMatrix, ComplexMatrix]:
    """
    A = L @ Q for an m x n matrix with m <= n and full row rank.

    L is m x m lower triangular with real non-negative diagonal, Q is m x n
    with orthonormal rows.
    """
    A = as_complex_matrix(A)
    m, n = A.shape
    if m > n:
        raise ValueError(f"LQ needs rows <= cols, got {m}x{n}")

    norm_a = np.linalg.norm(A)
    if norm_a == 0.0:
        raise RankDeficient("Zero matrix has no LQ decomposition")

    Qr, R = _householder_qr(A.conj().T)

    d = np.diag(R)
    pivots = np.abs(d)
    if np.any(pivots < RANK_TOL * norm_a):
        raise RankDeficient(
            f"Pivot {pivots.min():.3e} below {RANK_TOL:g} x ||A||_F = {RANK_TOL * norm_a:.3e}"
        )

    # absorb diagonal phases into Q: R' = D* R, Qr' = Qr D
    phases = d / pivots
    R = phases.conj()[:, None] * R
    Qr = Qr * phases[None, :]

    L = np.tril(R.conj().T)
    L[np.diag_indices(m)] = pivots
    return L, Qr.conj().T


def lower_triangular_solve(B, v) -> np.ndarray:
    """Solve B x = v by forward substitution; v may be a vector or a matrix."""
    B = as_complex_matrix(B)
    r, c = B.shape
    if r != c:
        raise NonSquare(f"Triangular system must be square, got {r}x{c}")
    diag = np.abs(np.diag(B))
    if np.any(diag <= DIAG_TOL):
        raise SingularDiagonal(f"Diagonal entry {diag.min():.3e} <= {DIAG_TOL:g}")
    v = np.asarray(v, dtype=np.complex128)
    if v.shape[0] != r:
        raise ValueError(f"Right-hand side has {v.shape[0]} rows, system has {r}")
    return solve_triangular(B, v, lower=True, check_finite=False)


def lower_triangular_inverse(B) -> ComplexMatrix:
    B = as_complex_matrix(B)
    return lower_triangular_solve(B, np.eye(B.shape[0], dtype=np.complex128))


def pseudo_inverse(A) -> ComplexMatrix:
    """Right inverse A^H (A A^H)^-1 of a full-row-rank m x n matrix, via A = LQ."""
    L, Q = lq_decompose(A)
    return Q.conj().T @ lower_triangular_inverse(L)


def off_diagonal_frobenius(A, block_sizes: Optional[Sequence[int]] = None) -> float:
    """
    Frobenius norm of a square matrix outside its diagonal blocks.

    With `block_sizes` (summing to the matrix order) whole diagonal blocks are
    excluded; without it every block is 1 x 1, i.e. the plain off-diagonal part.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NonSquare(f"off() needs a square matrix, got shape {A.shape}")
    n = A.shape[0]
    sizes = [1] * n if block_sizes is None else [int(b) for b in block_sizes]
    if sum(sizes) != n or min(sizes) < 1:
        raise ValueError(f"Block sizes {sizes} do not tile a {n} x {n} matrix")
    owner = np.repeat(np.arange(len(sizes)), sizes)
    mask = owner[:, None] != owner[None, :]
    return float(np.linalg.norm(A[mask]))
