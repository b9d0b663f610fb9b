"""Gaussian reception, the layered block schedule, and the exact discrete channel law.

Noise is circularly-symmetric complex Gaussian with unit total variance, so each
real component has standard deviation ``1/sqrt(2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from . import gf2
from .interface import (encode_symbol, pack_block, quantize, symbol_table, unpack_block,
                        value_to_bits, tuple_index)
from .topology import Topology

NOISE_STD = 1.0 / math.sqrt(2.0)
DEFAULT_TAIL_TOL = 1e-12
TABLE_CAP = 2**24


# --- Gaussian reception ------------------------------------------------------

def complex_noise(rng, size=None) -> complex | np.ndarray:
    """CN(0, 1) samples; draws the real parts then the imaginary parts."""
    shape = (2,) if size is None else (2,) + tuple(np.atleast_1d(size))
    z = np.asarray(rng.standard_normal(shape)) * NOISE_STD
    out = z[0] + 1j * z[1]
    return complex(out) if size is None else out


def propagate(topology: Topology, transmissions: Mapping[int, complex], receiver: int, rng):
    """Sum of gain-weighted parent transmissions plus fresh noise."""
    total = 0j
    for i in topology.parents(receiver):
        if i not in transmissions:
            raise KeyError(f"missing transmission from parent {i} of node {receiver}")
        total = total + topology.gain(i, receiver) * transmissions[i]
    return total + complex_noise(rng)


def simulate_network_block(topology: Topology, source_block, relay_matrices: Mapping[int, gf2.BinaryMatrix],
                           n: int, N: int, rng) -> dict[int, np.ndarray]:
    """Run one block (or a batch of blocks) through the layered network.

    ``source_block`` has shape ``(..., 2nN)``; leading axes are independent
    trials sharing ``rng``. Returns the quantized received block of every
    non-source node. Noise is drawn layer by layer, nodes in ascending id.
    Nodes with children but no matrix and not listed in ``topology.relays``
    stay silent.
    """
    k = 2 * n * N
    source_block = np.asarray(source_block, dtype=np.uint8)
    if source_block.shape[-1] != k:
        raise ValueError(f"source block length {source_block.shape[-1]} != 2nN = {k}")
    for j in topology.relays:
        if j not in relay_matrices:
            raise ValueError(f"relay {j} has no matrix")
    for j, A in relay_matrices.items():
        if A.shape != (k, k):
            raise ValueError(f"matrix of node {j} is {A.shape[0]}x{A.shape[1]}, expected {k}x{k}")
    batch = source_block.shape[:-1]

    symbols = {0: encode_symbol(unpack_block(source_block, n, N), n)}   # (..., N) complex
    received: dict[int, np.ndarray] = {}
    for layer in range(1, topology.depth + 1):
        for j in topology.layer(layer):
            y = complex_noise(rng, batch + (N,))
            for i in topology.parents(j):
                if i in symbols:
                    y = y + topology.gain(i, j) * symbols[i]
            received[j] = pack_block(quantize(y, n))
        for j in topology.layer(layer):
            A = relay_matrices.get(j)
            if A is not None:
                tx = gf2.matvec(A, received[j])
                symbols[j] = encode_symbol(unpack_block(tx, n, N), n)
    return received


# --- exact law of the quantized output -----------------------------------------

def _interval_prob(lo, hi):
    """P(lo <= Z < hi) for standard normal Z, accurate in both tails."""
    return np.where(lo > 0, ndtr(-lo) - ndtr(-hi), ndtr(hi) - ndtr(lo))


@lru_cache(maxsize=None)
def tail_halfwidth(tail_tol: float) -> float:
    """Distance q with P(|noise component| > q) <= tail_tol."""
    return float(NOISE_STD * -ndtri(tail_tol / 2.0))


def floor_abs_prob(m, g):
    """P(floor(|g + z|) = m) for integer ``m >= 0`` and real mean ``g``."""
    m = np.asarray(m, dtype=float)
    g = np.asarray(g, dtype=float)
    s = NOISE_STD
    pos = _interval_prob((m - g) / s, (m + 1 - g) / s)
    neg = _interval_prob((-m - 1 - g) / s, (-m - g) / s)
    return pos + neg


def _window(g: np.ndarray, tail_tol: float):
    q = tail_halfwidth(tail_tol)
    base = np.maximum(0, np.floor(np.abs(g) - q)).astype(np.int64)
    width = int(math.floor(2 * q)) + 2
    return base, width


def component_law(g, n: int, tail_tol: float = DEFAULT_TAIL_TOL) -> np.ndarray:
    """Law of ``floor(|g + z|) mod 2^n`` for each real mean in ``g``: shape ``(len(g), 2^n)``.

    Integer values more than the tail half-width away from ``|g|`` are dropped,
    so each row sums to at least ``1 - tail_tol``.
    """
    g = np.atleast_1d(np.asarray(g, dtype=float))
    base, width = _window(g, tail_tol)
    m = base[:, None] + np.arange(width)
    p = floor_abs_prob(m, g[:, None])
    mod = 1 << n
    idx = (np.arange(len(g))[:, None] * mod + (m % mod)).ravel()
    return np.bincount(idx, weights=p.ravel(), minlength=len(g) * mod).reshape(len(g), mod)


def component_prob(v, g, n: int, tail_tol: float = DEFAULT_TAIL_TOL) -> np.ndarray:
    """P(floor(|g + z|) mod 2^n = v), broadcasting ``v`` against ``g``."""
    v = np.asarray(v, dtype=np.int64)
    g = np.asarray(g, dtype=float)
    v, g = np.broadcast_arrays(v, g)
    base, width = _window(g, tail_tol)
    mod = 1 << n
    # smallest m = v + mod*t that is >= base
    t0 = np.maximum(0, -((v - base) // mod))
    out = np.zeros(g.shape)
    for step in range(width // mod + 2):
        m = v + mod * (t0 + step)
        keep = m < base + width
        if not keep.any():
            break
        out += np.where(keep, floor_abs_prob(m, g), 0.0)
    return out


def component_entropy(g, n: int, tail_tol: float = DEFAULT_TAIL_TOL) -> np.ndarray:
    """Entropy in bits of each component law."""
    return entropy_bits(component_law(g, n, tail_tol), axis=-1)


def entropy_bits(p, axis=-1) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return terms.sum(axis=axis)


@lru_cache(maxsize=None)
def value_pair_index(n: int) -> np.ndarray:
    """``out[vR, vI]`` = tuple index of the output tuple with those component values."""
    v = np.arange(1 << n)
    bits = np.concatenate([np.repeat(value_to_bits(v, n)[:, None, :], len(v), 1),
                           np.repeat(value_to_bits(v, n)[None, :, :], len(v), 0)], axis=-1)
    return tuple_index(bits)


def tuple_law(g, n: int, tail_tol: float = DEFAULT_TAIL_TOL) -> np.ndarray:
    """Law over the 4^n output tuples (tuple-index order) for complex means ``g``."""
    g = np.atleast_1d(np.asarray(g, dtype=complex))
    pr = component_law(g.real, n, tail_tol)
    pi = component_law(g.imag, n, tail_tol)
    joint = pr[:, :, None] * pi[:, None, :]
    out = np.empty((len(g), 1 << (2 * n)))
    out[:, value_pair_index(n).ravel()] = joint.reshape(len(g), -1)
    return out


def transition_probabilities(parent_gains: Sequence[complex], parent_tuples, n: int,
                             tail_tol: float = DEFAULT_TAIL_TOL) -> np.ndarray:
    """Probability of each of the 4^n output tuples given the parents' input tuples."""
    if not 0 < tail_tol <= 1e-6:
        raise ValueError("tail_tol must lie in (0, 1e-6]")
    g = 0j
    for h, bits in zip(parent_gains, parent_tuples, strict=True):
        g += complex(h) * encode_symbol(bits, n)
    return tuple_law([g], n, tail_tol)[0]


@dataclass(frozen=True)
class TransitionTable:
    """Per-symbol law of one receiver: ``probs[config, y]``.

    ``config`` reads the parents' tuple indices as base-4^n digits, first
    parent most significant; parents are in ascending node id.
    """

    n: int
    parents: tuple[int, ...]
    gains: tuple[complex, ...]
    probs: np.ndarray
    tail_tol: float = DEFAULT_TAIL_TOL

    @classmethod
    def build(cls, parents: Sequence[int], gains: Sequence[complex], n: int,
              tail_tol: float = DEFAULT_TAIL_TOL, cap: int = TABLE_CAP) -> "TransitionTable":
        K = 1 << (2 * n)
        size = K ** (len(parents) + 1)
        if size > cap:
            raise ValueError(f"transition table with {size} entries exceeds cap {cap}")
        sym = symbol_table(n)
        g = np.zeros(K ** len(parents), dtype=complex)
        for pos, h in enumerate(gains):
            digit = (np.arange(K ** len(parents)) // K ** (len(parents) - 1 - pos)) % K
            g += complex(h) * sym[digit]
        probs = tuple_law(g, n, tail_tol)
        probs.flags.writeable = False
        return cls(n, tuple(parents), tuple(complex(h) for h in gains), probs, tail_tol)

    @classmethod
    def for_node(cls, topology: Topology, j: int, n: int, tail_tol: float = DEFAULT_TAIL_TOL,
                 cap: int = TABLE_CAP) -> "TransitionTable":
        parents = topology.parents(j)
        return cls.build(parents, [topology.gain(i, j) for i in parents], n, tail_tol, cap)

    @property
    def alphabet(self) -> int:
        return 1 << (2 * self.n)

    def config_index(self, parent_tuple_indices) -> np.ndarray:
        """Combine per-parent tuple indices (last axis) into config indices."""
        idx = np.asarray(parent_tuple_indices, dtype=np.int64)
        K = self.alphabet
        weights = K ** np.arange(len(self.parents) - 1, -1, -1)
        return idx @ weights

    def joint_law(self) -> np.ndarray:
        """Law of (config, y) with independent uniform inputs, flattened as config*4^n + y."""
        return (self.probs / self.probs.shape[0]).ravel()


def transition_tables(topology: Topology, n: int, nodes=None, tail_tol: float = DEFAULT_TAIL_TOL,
                      cap: int = TABLE_CAP) -> dict[int, TransitionTable]:
    nodes = range(1, topology.node_count) if nodes is None else nodes
    return {j: TransitionTable.for_node(topology, j, n, tail_tol, cap) for j in nodes}
