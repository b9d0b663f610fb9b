import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relaynet import gf2


def naive_matvec(dense, v):
    return (dense.astype(np.int64) @ np.asarray(v, np.int64)) % 2


def naive_rank(dense):
    m = dense.copy() % 2
    r = 0
    for c in range(m.shape[1]):
        piv = np.nonzero(m[r:, c])[0]
        if not len(piv):
            continue
        p = r + piv[0]
        m[[r, p]] = m[[p, r]]
        for i in range(m.shape[0]):
            if i != r and m[i, c]:
                m[i] ^= m[r]
        r += 1
        if r == m.shape[0]:
            break
    return r


@pytest.mark.parametrize("rows, cols", [(1, 1), (3, 5), (64, 64), (65, 63), (128, 200), (512, 512)])
def test_packed_matches_naive(rows, cols):
    rng = np.random.default_rng(rows * 1000 + cols)
    dense = rng.integers(0, 2, (rows, cols), dtype=np.uint8)
    A = gf2.BinaryMatrix.from_dense(dense)
    assert np.array_equal(A.to_dense(), dense)
    V = rng.integers(0, 2, (20, cols), dtype=np.uint8)
    assert np.array_equal(gf2.matvec(A, V), naive_matvec(dense, V.T).T)


def test_identity_and_zero():
    v = np.random.default_rng(0).integers(0, 2, 70, dtype=np.uint8)
    assert np.array_equal(gf2.BinaryMatrix.identity(70) @ v, v)
    assert not gf2.matvec(gf2.BinaryMatrix.zeros(5, 70), v).any()


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 130), st.integers(1, 130), st.integers(0, 2**32 - 1))
def test_linearity(rows, cols, seed):
    rng = np.random.default_rng(seed)
    A = gf2.random_matrix(rows, cols, rng)
    u, v = rng.integers(0, 2, (2, cols), dtype=np.uint8)
    assert np.array_equal(gf2.matvec(A, u ^ v), gf2.matvec(A, u) ^ gf2.matvec(A, v))


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        gf2.matvec(gf2.BinaryMatrix.identity(4), np.zeros(5, np.uint8))


def test_rank_matches_naive():
    rng = np.random.default_rng(3)
    for _ in range(50):
        r, c = rng.integers(1, 20, 2)
        dense = rng.integers(0, 2, (r, c), dtype=np.uint8)
        assert gf2.rank(gf2.BinaryMatrix.from_dense(dense)) == naive_rank(dense)


def test_full_rank_frequency_small():
    # exact count for 2x2: 6 of the 16 matrices are invertible
    count = sum(gf2.rank(gf2.BinaryMatrix.from_dense(np.array(list(np.binary_repr(m, 4)), np.uint8)
                                                       .reshape(2, 2))) == 2 for m in range(16))
    assert count == 6


def test_matrix_is_immutable_and_hashable():
    A = gf2.BinaryMatrix.identity(8)
    with pytest.raises(ValueError):
        A.words[0, 0] = 0
    assert A == gf2.BinaryMatrix.identity(8) and hash(A) == hash(gf2.BinaryMatrix.identity(8))
    assert A != gf2.BinaryMatrix.zeros(8, 8)


def test_random_matrix_reproducible():
    a = gf2.random_matrix(16, 16, np.random.default_rng(5))
    b = gf2.random_matrix(16, 16, np.random.default_rng(5))
    assert a == b


def test_from_dense_rejects_non_binary():
    with pytest.raises(ValueError):
        gf2.BinaryMatrix.from_dense(np.array([[0, 2]]))
