"""Bit-exact modulator and quantizer of the discrete network.

A 2n-bit tuple is ordered ``(xR(1)..xR(n), xI(1)..xI(n))``. On the transmit
side ``xR(k)`` has weight ``2^-k``; on the receive side ``yR(k)`` is the bit of
weight ``2^(k-1)`` of ``floor(|yR|) mod 2^n``. A block of N tuples is stored
time-major: tuple ``t`` occupies ``[2n*t, 2n*(t+1))``.

Every function accepts a leading batch axis.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

SQRT_HALF = 1.0 / math.sqrt(2.0)


def _check_tuple(bits: np.ndarray, n: int) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape[-1] != 2 * n:
        raise ValueError(f"expected {2 * n} bits per tuple, got {bits.shape[-1]}")
    if np.any(bits > 1):
        raise ValueError("bits must be 0 or 1")
    return bits


def _frac_weights(n: int) -> np.ndarray:
    return 2.0 ** -np.arange(1, n + 1)


def encode_symbol(bits, n: int) -> complex | np.ndarray:
    """Map a 2n-bit tuple (or array of tuples) to its complex transmit symbol."""
    bits = _check_tuple(bits, n)
    w = _frac_weights(n)
    re = bits[..., :n] @ w
    im = bits[..., n:] @ w
    sym = SQRT_HALF * (re + 1j * im)
    return complex(sym) if sym.ndim == 0 else sym


def quantize_values(y, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer values ``floor(|component|) mod 2^n`` of the real and imaginary parts."""
    y = np.asarray(y)
    mod = 1 << n
    re = np.floor(np.abs(y.real)).astype(np.int64) % mod
    im = np.floor(np.abs(y.imag)).astype(np.int64) % mod
    return re, im


def value_to_bits(v, n: int) -> np.ndarray:
    """LSB-first n-bit expansion of nonnegative integers below 2^n."""
    v = np.asarray(v, dtype=np.int64)
    return ((v[..., None] >> np.arange(n)) & 1).astype(np.uint8)


def bits_to_value(bits, n: int) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    return bits @ (1 << np.arange(n))


def quantize(y, n: int) -> np.ndarray:
    """Quantize complex received samples to 2n-bit tuples (sign and fraction discarded)."""
    re, im = quantize_values(y, n)
    return np.concatenate([value_to_bits(re, n), value_to_bits(im, n)], axis=-1)


def pack_block(tuples) -> np.ndarray:
    """Adjoin N tuples (shape ``(..., N, 2n)``) into a ``(..., 2nN)`` block."""
    tuples = np.asarray(tuples, dtype=np.uint8)
    if tuples.ndim < 2:
        raise ValueError("pack_block needs an (N, 2n) array of tuples")
    return tuples.reshape(tuples.shape[:-2] + (-1,))


def unpack_block(block, n: int, N: int) -> np.ndarray:
    block = np.asarray(block, dtype=np.uint8)
    if block.shape[-1] != 2 * n * N:
        raise ValueError(f"block length {block.shape[-1]} != 2nN = {2 * n * N}")
    return block.reshape(block.shape[:-1] + (N, 2 * n))


# --- integer indices of tuples and blocks ----------------------------------
# A tuple's index reads its bits big-endian in tuple order; a block's index
# reads all 2nN bits big-endian. Hence the block index is the base-4^n number
# whose digits are the per-time tuple indices, most significant at t = 0.

def tuple_index(bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    k = bits.shape[-1]
    return bits @ (1 << np.arange(k - 1, -1, -1))


def index_to_tuple(idx, n: int) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    k = 2 * n
    return ((idx[..., None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8)


def all_tuples(n: int) -> np.ndarray:
    """Every 2n-bit tuple, row ``i`` having tuple index ``i``."""
    return index_to_tuple(np.arange(1 << (2 * n)), n)


def symbol_table(n: int) -> np.ndarray:
    """Complex transmit symbol for every tuple index."""
    return encode_symbol(all_tuples(n), n)


# --- golden vectors ----------------------------------------------------------

def read_golden(path: str | Path) -> list[tuple[int, complex, np.ndarray]]:
    """Parse ``n; y_re; y_im; expected_bits`` lines (``#`` comments allowed)."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(";")]
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
        n = int(parts[0])
        bits = np.array([int(c) for c in parts[3]], dtype=np.uint8)
        if len(bits) != 2 * n:
            raise ValueError(f"{path}:{lineno}: expected {2 * n} bits")
        rows.append((n, complex(float(parts[1]), float(parts[2])), bits))
    return rows


def format_golden(n: int, y: complex, bits) -> str:
    return f"{n}; {y.real!r}; {y.imag!r}; {''.join(str(int(b)) for b in bits)}"
