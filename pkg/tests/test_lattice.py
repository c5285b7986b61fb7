import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mjpbayes.lattice import (
    LatticeOverflowError,
    border_moves,
    det,
    drop_kernel_vectors,
    hermite_normal_form,
    integer_solve,
    kernel_basis,
    kernel_basis_excluding_row,
    rank,
    same_lattice,
)

from .fixtures import OREG_A, OREG_BORDER_J1, OREG_V, PROK_A, PROK_V, PROK_V5


def check_hnf_shape(H):
    """Column-style Hermite form: staircase of positive pivots, zero trailing
    columns, entries left of a pivot reduced into [0, pivot)."""
    p, r = H.shape
    prev_row = -1
    for j in range(r):
        col = H[:, j]
        nz = np.flatnonzero(col)
        if len(nz) == 0:
            assert not H[:, j:].any()
            return
        i = nz[0]
        assert i > prev_row
        assert col[i] > 0
        for l in range(j):
            assert 0 <= H[i, l] < col[i]
        prev_row = i


def test_identity():
    H, U = hermite_normal_form(np.eye(3, dtype=int))
    assert np.array_equal(H, np.eye(3))
    assert np.array_equal(U, np.eye(3))


def test_row_vector():
    A = np.array([[2, 4]])
    H, U = hermite_normal_form(A)
    assert np.array_equal(H, [[2, 0]])
    assert np.array_equal(A @ U, H)
    assert abs(det(U)) == 1


def test_row_vector_kernel_brute_force():
    A = np.array([[2, 4]])
    V = kernel_basis(A)
    assert same_lattice(V, np.array([[-2], [1]]))
    for x in itertools.product(range(-5, 6), repeat=2):
        if 2 * x[0] + 4 * x[1] == 0:
            assert integer_solve(V, x) is not None


def test_oregonator_hnf():
    H, U = hermite_normal_form(OREG_A)
    assert np.array_equal(OREG_A @ U, H)
    assert abs(det(U)) == 1
    check_hnf_shape(H)
    assert np.all(H[:, 3:] == 0) and np.all(np.any(H[:, :3] != 0, axis=0))


@pytest.mark.parametrize("A, Vref", [(OREG_A, OREG_V), (PROK_A, PROK_V)], ids=["oregonator", "prokaryotic"])
def test_reference_kernel_lattices(A, Vref):
    V = kernel_basis(A)
    assert not (A @ V).any()
    assert V.shape[1] == A.shape[1] - rank(A)
    assert same_lattice(V, Vref)


def test_excluding_row_oregonator():
    W = kernel_basis_excluding_row(OREG_A, 0)
    assert same_lattice(W, OREG_BORDER_J1)
    kept = drop_kernel_vectors(OREG_A, OREG_BORDER_J1)
    assert np.array_equal(kept, OREG_BORDER_J1[:, :2])


def test_excluding_row_prokaryotic():
    W = kernel_basis_excluding_row(PROK_A, 3)
    assert same_lattice(W, np.column_stack([PROK_V, PROK_V5]))


def test_excluding_row_identity():
    assert np.array_equal(kernel_basis_excluding_row(np.eye(2, dtype=int), 1), [[0], [1]])


def test_border_moves_move_one_species():
    for A in (OREG_A, PROK_A):
        for j in range(A.shape[0]):
            M = border_moves(A, j)
            W = kernel_basis_excluding_row(A, j)
            if M.shape[1] == 0:
                assert not (A[j] @ W).any()
                continue
            assert M.shape[1] == 1
            img = A @ M[:, 0]
            assert np.count_nonzero(img) == 1 and img[j] != 0
            # together with ker(A) the move generates every single-species change
            assert same_lattice(np.column_stack([kernel_basis(A), M]), W)


def test_full_column_rank_gives_empty_basis():
    V = kernel_basis(np.eye(3, dtype=int))
    assert V.shape == (3, 0)


def test_dependent_rows_tolerated():
    A = np.array([[1, 1, 0], [2, 2, 0], [0, 1, 1]])
    V = kernel_basis(A)
    assert V.shape[1] == 1
    assert not (A @ V).any()
    assert same_lattice(V, np.array([[1], [-1], [1]]))


def test_overflow_is_loud():
    big = 2**62
    with pytest.raises(LatticeOverflowError):
        hermite_normal_form(np.array([[big, big - 1], [3, big]], dtype=object))


matrices = st.integers(1, 6).flatmap(
    lambda p: st.integers(1, 8).flatmap(
        lambda r: st.lists(st.lists(st.integers(-3, 3), min_size=r, max_size=r), min_size=p, max_size=p)
    )
)


@settings(max_examples=150, deadline=None)
@given(matrices)
def test_random_matrices(rows):
    A = np.array(rows, dtype=np.int64)
    H, U = hermite_normal_form(A)
    assert np.array_equal(A @ U, H)
    assert abs(det(U)) == 1
    check_hnf_shape(H)
    V = kernel_basis(A)
    assert not (A @ V).any()
    assert V.shape[1] == A.shape[1] - np.linalg.matrix_rank(A.astype(float))
