"""Binary matrices packed into 64-bit words, with XOR/popcount products."""
from __future__ import annotations

import numpy as np

WORD = 64


def _words(cols: int) -> int:
    return (cols + WORD - 1) // WORD


def pack_bits(bits) -> np.ndarray:
    """Pack ``(..., k)`` 0/1 arrays into ``(..., ceil(k/64))`` uint64 words, bit j in word j//64."""
    bits = np.asarray(bits, dtype=np.uint8)
    k = bits.shape[-1]
    pad = _words(k) * WORD - k
    if pad:
        bits = np.concatenate([bits, np.zeros(bits.shape[:-1] + (pad,), np.uint8)], axis=-1)
    by = np.packbits(bits, axis=-1, bitorder="little")
    return by.view(np.uint64) if by.flags.c_contiguous else np.ascontiguousarray(by).view(np.uint64)


def unpack_bits(words, k: int) -> np.ndarray:
    words = np.ascontiguousarray(words, dtype=np.uint64)
    bits = np.unpackbits(words.view(np.uint8), axis=-1, bitorder="little")
    return bits[..., :k]


class BinaryMatrix:
    """Immutable rows x cols matrix over GF(2); each row is a run of uint64 words."""

    __slots__ = ("rows", "cols", "words")

    def __init__(self, rows: int, cols: int, words: np.ndarray):
        if rows < 1 or cols < 1:
            raise ValueError("matrix dimensions must be positive")
        words = np.ascontiguousarray(words, dtype=np.uint64)
        if words.shape != (rows, _words(cols)):
            raise ValueError(f"word storage {words.shape} inconsistent with {rows}x{cols}")
        words.flags.writeable = False
        self.rows, self.cols, self.words = rows, cols, words

    @classmethod
    def from_dense(cls, dense) -> "BinaryMatrix":
        dense = np.asarray(dense, dtype=np.uint8)
        if dense.ndim != 2:
            raise ValueError("dense matrix must be 2-D")
        if np.any(dense > 1):
            raise ValueError("entries must be 0 or 1")
        return cls(dense.shape[0], dense.shape[1], pack_bits(dense))

    @classmethod
    def identity(cls, k: int) -> "BinaryMatrix":
        return cls.from_dense(np.eye(k, dtype=np.uint8))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BinaryMatrix":
        return cls(rows, cols, np.zeros((rows, _words(cols)), np.uint64))

    def to_dense(self) -> np.ndarray:
        return unpack_bits(self.words, self.cols)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __eq__(self, other):
        return (isinstance(other, BinaryMatrix) and self.shape == other.shape
                and np.array_equal(self.words, other.words))

    def __hash__(self):
        return hash((self.rows, self.cols, self.words.tobytes()))

    def __repr__(self):
        return f"BinaryMatrix({self.rows}x{self.cols})"

    def __matmul__(self, v):
        return matvec(self, v)


def random_matrix(rows: int, cols: int, rng: np.random.Generator) -> BinaryMatrix:
    """I.i.d. fair-coin entries drawn from ``rng``."""
    return BinaryMatrix.from_dense(rng.integers(0, 2, size=(rows, cols), dtype=np.uint8))


def matvec(A: BinaryMatrix, v) -> np.ndarray:
    """A @ v over GF(2). ``v`` may carry leading batch axes: shape ``(..., A.cols)``."""
    v = np.asarray(v, dtype=np.uint8)
    if v.shape[-1] != A.cols:
        raise ValueError(f"dimension mismatch: matrix has {A.cols} columns, vector {v.shape[-1]}")
    vw = pack_bits(v)                                  # (..., W)
    prod = vw[..., None, :] & A.words                  # (..., rows, W)
    return (np.bitwise_count(prod).sum(axis=-1, dtype=np.int64) & 1).astype(np.uint8)


def rank(A: BinaryMatrix) -> int:
    """GF(2) rank, for diagnostics only."""
    rows = [int.from_bytes(r.tobytes(), "little") for r in A.words]
    r = 0
    for bit in range(A.cols):
        mask = 1 << bit
        pivot = next((i for i in range(r, len(rows)) if rows[i] & mask), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        for i in range(len(rows)):
            if i != r and rows[i] & mask:
                rows[i] ^= rows[r]
        r += 1
    return r

