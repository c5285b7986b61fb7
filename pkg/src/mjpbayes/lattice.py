"""Exact integer linear algebra for jump matrices.

Column-style Hermite normal form ``H = A @ U`` with a unimodular ``U``, and
integer bases of the kernel lattice ``{x in Z^r : A x = 0}``.  Everything is
done on Python integers with an explicit 64-bit bound check, so a blow-up of
the transform entries raises instead of wrapping around.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

INT64_MAX = 2**63 - 1


class LatticeOverflowError(ArithmeticError):
    """An intermediate entry left the signed 64-bit range."""


def _checked(v: int) -> int:
    if v > INT64_MAX or v < -INT64_MAX - 1:
        raise LatticeOverflowError(f"integer entry {v} exceeds 64-bit range")
    return v


def _as_int_rows(A) -> list[list[int]]:
    arr = np.asarray(A)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d integer matrix, got shape {arr.shape}")
    if arr.size and not np.all(np.equal(np.mod(arr, 1), 0)):
        raise ValueError("matrix entries must be integers")
    return [[_checked(int(v)) for v in row] for row in arr.tolist()]


def _to_array(cols: list[list[int]], nrows: int) -> np.ndarray:
    """Column list -> (nrows, ncols) int64 array."""
    out = np.zeros((nrows, len(cols)), dtype=np.int64)
    for j, col in enumerate(cols):
        out[:, j] = col
    return out


def _col_axpy(dst: list[int], src: list[int], q: int) -> None:
    # dst -= q * src, with bound checks
    for k in range(len(dst)):
        if src[k]:
            dst[k] = _checked(dst[k] - q * src[k])


def hermite_normal_form(A) -> tuple[np.ndarray, np.ndarray]:
    """Column Hermite normal form of an integer matrix.

    Returns ``(H, U)`` with ``H = A @ U``, ``det(U) = +-1`` and ``H`` in
    lower staircase form: pivot ``j`` sits in row ``i_j`` (strictly
    increasing), entries above each pivot are zero, columns after the last
    pivot are zero, and every entry left of a pivot satisfies
    ``floor(H[i_j, l] / H[i_j, j]) == 0``.  Pivots are made positive.

    Rows that depend linearly on earlier rows never produce a pivot, so a
    rank-deficient ``A`` is handled without a separate row-selection pass.
    """
    rows = _as_int_rows(A)
    p = len(rows)
    r = len(rows[0]) if p else 0
    if p == 0 or r == 0:
        raise ValueError("matrix must have at least one row and one column")
    # work on columns: H[c][i], U[c][k]
    H = [[rows[i][c] for i in range(p)] for c in range(r)]
    U = [[1 if k == c else 0 for k in range(r)] for c in range(r)]

    j = 0
    for i in range(p):
        if j == r:
            break
        # Euclid on row i over columns j..r-1
        while True:
            nz = [c for c in range(j, r) if H[c][i] != 0]
            if not nz:
                break
            c_min = min(nz, key=lambda c: abs(H[c][i]))
            if c_min != j:
                H[j], H[c_min] = H[c_min], H[j]
                U[j], U[c_min] = U[c_min], U[j]
            if len(nz) == 1:
                break
            piv = H[j][i]
            for c in range(j + 1, r):
                if H[c][i]:
                    q = H[c][i] // piv
                    _col_axpy(H[c], H[j], q)
                    _col_axpy(U[c], U[j], q)
        if H[j][i] == 0:
            continue  # dependent row: no pivot here
        if H[j][i] < 0:
            H[j] = [-v for v in H[j]]
            U[j] = [-v for v in U[j]]
        piv = H[j][i]
        for c in range(j):
            q = H[c][i] // piv
            if q:
                _col_axpy(H[c], H[j], q)
                _col_axpy(U[c], U[j], q)
        j += 1
    return _to_array(H, p), _to_array(U, r)


def rank(A) -> int:
    """Rank over the rationals via fraction-free (Bareiss) elimination."""
    M = _as_int_rows(A)
    p = len(M)
    r = len(M[0]) if p else 0
    rk = 0
    prev = 1
    for c in range(r):
        if rk == p:
            break
        piv = next((i for i in range(rk, p) if M[i][c] != 0), None)
        if piv is None:
            continue
        M[rk], M[piv] = M[piv], M[rk]
        for i in range(rk + 1, p):
            for k in range(c + 1, r):
                M[i][k] = (M[i][k] * M[rk][c] - M[i][c] * M[rk][k]) // prev
            M[i][c] = 0
        prev = M[rk][c]
        rk += 1
    return rk


def pivot_count(H) -> int:
    """Number of nonzero leading columns of a Hermite normal form."""
    H = np.asarray(H)
    nonzero = np.any(H != 0, axis=0)
    return int(nonzero.sum())


def kernel_basis(A) -> np.ndarray:
    """Integer basis of ``{x in Z^r : A x = 0}`` as the columns of an
    ``(r, r - rank A)`` array.  Full column rank gives an ``(r, 0)`` array."""
    H, U = hermite_normal_form(A)
    s = pivot_count(H)
    return U[:, s:].copy()


def kernel_basis_excluding_row(A, j: int) -> np.ndarray:
    """Kernel basis of ``A`` with row ``j`` deleted (totals changes that
    leave every species except ``j`` untouched)."""
    A = np.asarray(A)
    if not 0 <= j < A.shape[0]:
        raise IndexError(f"row index {j} out of range for {A.shape[0]} rows")
    if A.shape[0] == 1:
        return np.eye(A.shape[1], dtype=np.int64)
    return kernel_basis(np.delete(A, j, axis=0))


def drop_kernel_vectors(A, vectors) -> np.ndarray:
    """Keep only the columns of ``vectors`` that are *not* in ``ker(A)``."""
    A = np.asarray(A, dtype=np.int64)
    V = np.asarray(vectors, dtype=np.int64)
    if V.size == 0:
        return V.reshape(A.shape[1], 0)
    keep = np.any(A @ V != 0, axis=0)
    return V[:, keep]


def border_moves(A, j: int) -> np.ndarray:
    """Totals changes that move species ``j`` alone.

    The kernel basis of ``A`` without row ``j`` is re-expressed so that a
    single column carries the whole change of species ``j`` and the others
    lie in ``ker(A)``; those kernel columns are then filtered out.  The
    result has one column, or none if species ``j`` cannot move by itself.
    """
    A = np.asarray(A, dtype=np.int64)
    W = kernel_basis_excluding_row(A, j)
    if W.shape[1] == 0:
        return W
    c = (A[j] @ W).reshape(1, -1)
    if not np.any(c):
        return W[:, :0]
    _, U1 = hermite_normal_form(c)
    W = _matmul_checked(W, U1)
    return drop_kernel_vectors(A, W)


def _matmul_checked(X, Y) -> np.ndarray:
    Xl = np.asarray(X).tolist()
    Yl = np.asarray(Y).tolist()
    n, m, q = len(Xl), len(Yl), len(Yl[0]) if Yl else 0
    out = np.zeros((n, q), dtype=np.int64)
    for i in range(n):
        for k in range(q):
            out[i, k] = _checked(sum(Xl[i][t] * Yl[t][k] for t in range(m)))
    return out


def integer_solve(B, x) -> np.ndarray | None:
    """Integer ``y`` with ``B @ y == x``, or ``None`` if there is none.

    ``B`` must have linearly independent columns.
    """
    B = np.asarray(B, dtype=np.int64)
    x = [int(v) for v in np.asarray(x).ravel()]
    if B.shape[1] == 0:
        return np.zeros(0, dtype=np.int64) if not any(x) else None
    # column HNF of B is a row-reduced basis of the same lattice; solve
    # against it by forward substitution over pivot rows
    H, U = hermite_normal_form(B)
    d = B.shape[1]
    if pivot_count(H) != d:
        raise ValueError("basis columns are linearly dependent")
    Hl = H.tolist()
    resid = list(x)
    z = [0] * d
    j = 0
    for i in range(B.shape[0]):
        if j < d and Hl[i][j] != 0:
            q, rem = divmod(resid[i], Hl[i][j])
            if rem:
                return None
            z[j] = q
            for k in range(B.shape[0]):
                resid[k] -= q * Hl[k][j]
            j += 1
        elif resid[i] != 0:
            return None
    if any(resid):
        return None
    return _matmul_checked(U, np.array(z, dtype=np.int64).reshape(-1, 1)).ravel()


def same_lattice(B1, B2) -> bool:
    """True iff the columns of ``B1`` and ``B2`` generate the same lattice."""
    B1 = np.asarray(B1, dtype=np.int64)
    B2 = np.asarray(B2, dtype=np.int64)
    if B1.shape[1] != B2.shape[1]:
        return False
    return all(integer_solve(B1, B2[:, k]) is not None for k in range(B2.shape[1])) and all(
        integer_solve(B2, B1[:, k]) is not None for k in range(B1.shape[1])
    )


def det(U) -> int:
    """Exact integer determinant (rational Gaussian elimination)."""
    M = [[Fraction(int(v)) for v in row] for row in np.asarray(U).tolist()]
    n = len(M)
    out = Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if M[i][c] != 0), None)
        if piv is None:
            return 0
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            out = -out
        out *= M[c][c]
        for i in range(c + 1, n):
            f = M[i][c] / M[c][c]
            if f:
                for k in range(c, n):
                    M[i][k] -= f * M[c][k]
    return int(out)
