"""The random linear network code: source codebook, relay matrices and two decoders.

Relays multiply their buffered 2nN-bit reception by a random binary matrix.
The destination decodes either by the typicality search over sampled
association sets or by exact maximum likelihood, the latter only on instances
small enough to marginalize every relay state.
"""
from __future__ import annotations

import string
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import gf2
from .channel import TransitionTable, simulate_network_block, transition_tables
from .interface import tuple_index, unpack_block
from .topology import Topology

CODEBOOK_BIT_CAP = 2**28
ML_STATE_CAP = 2**24
COMBO_CAP = 2**20
TYPICALITY_SLACK = 1e-12
DEFAULT_EPSILON = 0.25

NONE = "none"
AMBIGUOUS = "ambiguous"


class AssociationError(RuntimeError):
    """No sampled trace survived the typicality filter at some relay."""


class StateSpaceError(ValueError):
    """Exact ML would need more joint relay states than the configured cap."""


@dataclass(frozen=True)
class Codebook:
    message_bits: int
    N: int
    n: int
    codewords: np.ndarray

    @property
    def size(self) -> int:
        return self.codewords.shape[0]

    @property
    def rate(self) -> float:
        return self.message_bits / self.N

    def __getitem__(self, w: int) -> np.ndarray:
        return self.codewords[w]


def generate_codebook(B: int, N: int, n: int, rng, cap: int = CODEBOOK_BIT_CAP) -> Codebook:
    """2^B codewords of 2nN fair bits each."""
    if B < 0 or N < 1 or n < 1:
        raise ValueError("need B >= 0, N >= 1, n >= 1")
    total = (2 ** B) * 2 * n * N
    if total > cap:
        raise ValueError(f"codebook of {total} bits exceeds memory cap {cap}")
    cw = rng.integers(0, 2, size=(2 ** B, 2 * n * N), dtype=np.uint8)
    if B and len(np.unique(cw, axis=0)) < len(cw):
        warnings.warn("codebook contains repeated codewords", RuntimeWarning, stacklevel=2)
    cw.flags.writeable = False
    return Codebook(B, N, n, cw)


def random_relay_matrices(topology: Topology, n: int, N: int, rng) -> dict[int, gf2.BinaryMatrix]:
    k = 2 * n * N
    return {j: gf2.random_matrix(k, k, rng) for j in topology.relays}


def relay_map(A: gf2.BinaryMatrix, received, n: int, N: int) -> np.ndarray:
    """Multiply the received block by ``A`` and split into N transmit tuples."""
    return unpack_block(gf2.matvec(A, received), n, N)


def block_tuple_indices(blocks, n: int, N: int) -> np.ndarray:
    return tuple_index(unpack_block(blocks, n, N))


# --- strong typicality ------------------------------------------------------------

def typical_rows(symbols, law, epsilon: float) -> np.ndarray:
    """Row-wise typicality: ``|freq(a) - p(a)| <= epsilon * p(a)`` for every symbol ``a``."""
    symbols = np.atleast_2d(np.asarray(symbols, dtype=np.int64))
    law = np.asarray(law, dtype=float)
    A = law.shape[0]
    rows, N = symbols.shape
    if symbols.size and (symbols.min() < 0 or symbols.max() >= A):
        raise ValueError("observed symbol outside the reference alphabet")
    counts = np.bincount((np.arange(rows)[:, None] * A + symbols).ravel(), minlength=rows * A)
    freq = counts.reshape(rows, A) / N
    return np.all(np.abs(freq - law) <= epsilon * law + TYPICALITY_SLACK, axis=1)


def typicality_test(observed, reference_law, epsilon: float) -> bool:
    """Strong typicality of one sequence of joint-symbol indices against ``reference_law``.

    ``reference_law`` is a probability vector indexed by symbol, or a mapping
    from symbol to probability (in which case ``observed`` holds those keys).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if isinstance(reference_law, Mapping):
        keys = list(reference_law)
        pos = {k: i for i, k in enumerate(keys)}
        try:
            observed = [pos[s] for s in observed]
        except KeyError as exc:
            raise ValueError(f"symbol {exc.args[0]!r} not in the reference alphabet") from None
        reference_law = [reference_law[k] for k in keys]
    observed = np.asarray(observed, dtype=np.int64)
    if observed.ndim != 1 or observed.size == 0:
        raise ValueError("observed must be a non-empty 1-D sequence")
    return bool(typical_rows(observed[None, :], reference_law, epsilon)[0])


def joint_symbols(columns, radices) -> np.ndarray:
    """Stack per-time symbols of several sequences into one mixed-radix index (first most significant)."""
    out = np.zeros(np.shape(columns[0]), dtype=np.int64)
    for col, r in zip(columns, radices, strict=True):
        out = out * r + np.asarray(col, dtype=np.int64)
    return out


def node_symbols(table: TransitionTable, parent_tuples: list[np.ndarray], received_tuples) -> np.ndarray:
    """Per-time joint (parent inputs, output) indices matching ``table.joint_law()``."""
    cfg = table.config_index(np.stack(parent_tuples, axis=-1))
    return cfg * table.alphabet + np.asarray(received_tuples, dtype=np.int64)


# --- association sets -----------------------------------------------------------------

@dataclass
class AssociationSample:
    """Forward-simulated traces under one message, with per-node typicality survival."""

    message: int
    L: int
    received: dict[int, np.ndarray]
    transmitted: dict[int, np.ndarray]
    retained: dict[int, np.ndarray] = field(default_factory=dict)

    def received_set(self, j: int) -> np.ndarray:
        return np.unique(self.received[j][self.retained[j]], axis=0)

    def transmit_set(self, j: int) -> np.ndarray:
        if j == 0:
            return self.transmitted[0][:1]
        return np.unique(self.transmitted[j][self.retained[j]], axis=0)


def sample_association_sets(w: int, topology: Topology, codebook: Codebook,
                            relays: Mapping[int, gf2.BinaryMatrix], L: int, epsilon: float, rng,
                            tables: Mapping[int, TransitionTable] | None = None,
                            nodes=None) -> AssociationSample:
    """Sampled stand-in for the received/transmit sets associated with message ``w``.

    Runs ``L`` forward traces and keeps, at each node, those whose reception is
    jointly typical with the parents' transmissions in the same trace, provided
    every parent's own reception was kept. ``nodes`` restricts which relays
    must keep at least one trace (default: all relays).
    """
    if L < 1:
        raise ValueError("L must be at least 1")
    n, N = codebook.n, codebook.N
    tables = tables if tables is not None else transition_tables(topology, n)
    src = np.repeat(codebook[w][None, :], L, axis=0)
    received = simulate_network_block(topology, src, relays, n, N, rng)
    transmitted = {0: src}
    for j, A in relays.items():
        if j in received:
            transmitted[j] = gf2.matvec(A, received[j])
    tx_idx = {i: block_tuple_indices(b, n, N) for i, b in transmitted.items()}
    retained = {0: np.ones(L, dtype=bool)}
    for layer in range(1, topology.depth + 1):
        for j in topology.layer(layer):
            parents = topology.parents(j)
            if not parents or any(i not in tx_idx for i in parents):
                retained[j] = np.zeros(L, dtype=bool)
                continue
            table = tables[j]
            sym = node_symbols(table, [tx_idx[i] for i in parents], block_tuple_indices(received[j], n, N))
            ok = typical_rows(sym, table.joint_law(), epsilon)
            for i in parents:
                ok &= retained[i]
            retained[j] = ok
    required = topology.relays if nodes is None else nodes
    for j in required:
        if not retained[j].any():
            raise AssociationError(f"no trace retained at node {j}: epsilon too small or L too small")
    return AssociationSample(w, L, received, transmitted, retained)


@dataclass(frozen=True)
class DecodeResult:
    message: int | None
    status: str = "ok"
    associated: tuple[int, ...] = ()

    @property
    def ok(self) -> bool:
        return self.message is not None


def decode_typicality(y_M, codebook: Codebook, topology: Topology, relays: Mapping[int, gf2.BinaryMatrix],
                      epsilon: float, L: int, rng, destination: int | None = None,
                      tables: Mapping[int, TransitionTable] | None = None,
                      stop_on_ambiguity: bool = True) -> DecodeResult:
    """Search for the unique message whose association sets explain ``y_M``.

    A message is associated when some choice of one sampled transmit block per
    parent of the destination makes the destination's block jointly typical
    with them. Zero or several associated messages is a decoding failure.
    """
    n, N = codebook.n, codebook.N
    D = topology.destinations[-1] if destination is None else destination
    tables = tables if tables is not None else transition_tables(topology, n)
    table = tables[D]
    parents = topology.parents(D)
    law = table.joint_law()
    y_idx = block_tuple_indices(y_M, n, N)
    needed = sorted(topology.ancestors(D) - {0})
    K = table.alphabet

    associated = []
    for w in range(codebook.size):
        if needed:
            try:
                sample = sample_association_sets(w, topology, codebook, relays, L, epsilon, rng,
                                                 tables, nodes=needed)
            except AssociationError:
                continue
            cands = [block_tuple_indices(sample.transmit_set(i), n, N) for i in parents]
        else:
            cands = [block_tuple_indices(codebook[w][None, :], n, N) for _ in parents]
        sizes = [len(c) for c in cands]
        if int(np.prod(sizes)) > COMBO_CAP:
            raise ValueError(f"{int(np.prod(sizes))} candidate combinations exceed cap {COMBO_CAP}")
        cfg = np.zeros((1, N), dtype=np.int64)
        for c in cands:
            cfg = (cfg[:, None, :] * K + c[None, :, :]).reshape(-1, N)
        sym = cfg * K + y_idx[None, :]
        if typical_rows(sym, law, epsilon).any():
            associated.append(w)
            if stop_on_ambiguity and len(associated) > 1:
                break
    if len(associated) == 1:
        return DecodeResult(associated[0], "ok", tuple(associated))
    return DecodeResult(None, NONE if not associated else AMBIGUOUS, tuple(associated))


# --- exact maximum likelihood ---------------------------------------------------------

def _block_law(rows_per_time: list[np.ndarray]) -> np.ndarray:
    """Outer product over time of (W, K) per-symbol laws, flattened to (W, K^N)."""
    out = rows_per_time[0]
    for r in rows_per_time[1:]:
        out = (out[:, :, None] * r[:, None, :]).reshape(out.shape[0], -1)
    return out


def _config_grid(tx: list[np.ndarray], K: int, t: int) -> np.ndarray:
    """Config index at time ``t`` over the product of parent block states, shape (S,)*m."""
    m = len(tx)
    cfg = np.zeros((1,) * m, dtype=np.int64)
    for pos, arr in enumerate(tx):
        shape = [1] * m
        shape[pos] = arr.shape[0]
        cfg = cfg * K + arr[:, t].reshape(shape)
    return cfg


def ml_likelihoods(y_M, codebook: Codebook, topology: Topology, relays: Mapping[int, gf2.BinaryMatrix],
                   tables: Mapping[int, TransitionTable], destination: int | None = None,
                   cap: int = ML_STATE_CAP) -> np.ndarray:
    """P(y_M | w) for every message, marginalizing relay receptions layer by layer."""
    n, N = codebook.n, codebook.N
    K = 1 << (2 * n)
    S = K ** N
    D = topology.destinations[-1] if destination is None else destination
    y_idx = block_tuple_indices(y_M, n, N)
    cw_idx = block_tuple_indices(codebook.codewords, n, N)           # (W, N)
    relevant = topology.ancestors(D) - {0}
    tD = tables[D]

    if not relevant:
        probs = np.ones(codebook.size)
        for t in range(N):
            probs *= tD.probs[cw_idx[:, t], y_idx[t]]
        return probs

    last = topology.layer_of[D] - 1
    layers = [sorted(j for j in relevant if topology.layer_of[j] == k) for k in range(1, last + 1)]
    for nodes in layers:
        if S ** len(nodes) > cap:
            raise StateSpaceError(f"instance too large for exact ML: {S ** len(nodes)} joint relay "
                                  f"states exceed cap {cap}")
    if S > 1 << 16:
        raise StateSpaceError(f"instance too large for exact ML: {S} blocks per node")
    k = 2 * n * N
    all_bits = ((np.arange(S)[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.uint8)
    tx_tuples = {j: block_tuple_indices(gf2.matvec(relays[j], all_bits), n, N) for j in relevant}

    letters = iter(string.ascii_letters.replace("w", ""))
    axis = {}
    # layer 1: conditionally independent given the codeword
    state = None
    for j in layers[0]:
        law = _block_law([tables[j].probs[cw_idx[:, t], :] for t in range(N)])  # (W, S)
        axis[j] = next(letters)
        state = law if state is None else (state[..., None] * law.reshape(law.shape[:1] + (1,) * (state.ndim - 1) + (S,)))
    state_axes = [axis[j] for j in layers[0]]

    for nodes in layers[1:]:
        operands, subs = [state], ["w" + "".join(state_axes)]
        new_axes = []
        for j in nodes:
            par = topology.parents(j)
            tx = [tx_tuples[i] for i in par]
            if S ** (len(par) + 1) > cap:
                raise StateSpaceError(f"instance too large for exact ML: kernel of node {j} exceeds cap {cap}")
            kern = np.ones((S,) * len(par) + (1,))
            for t in range(N):
                cfg = _config_grid(tx, K, t)
                kern = (kern[..., :, None] * tables[j].probs[cfg][..., None, :]).reshape(
                    (S,) * len(par) + (-1,))
            axis[j] = next(letters)
            new_axes.append(axis[j])
            operands.append(kern)
            subs.append("".join(axis[i] for i in par) + axis[j])
        state = np.einsum(",".join(subs) + "->w" + "".join(new_axes), *operands, optimize=True)
        state_axes = new_axes

    par = topology.parents(D)
    lam = np.ones((S,) * len(par))
    for t in range(N):
        cfg = _config_grid([tx_tuples[i] for i in par], K, t)
        lam = lam * tD.probs[cfg, y_idx[t]]
    return np.einsum("w" + "".join(state_axes) + "," + "".join(axis[i] for i in par) + "->w",
                     state, lam, optimize=True)


def decode_ml_exact(y_M, codebook: Codebook, topology: Topology, relays: Mapping[int, gf2.BinaryMatrix],
                    tables: Mapping[int, TransitionTable], destination: int | None = None,
                    cap: int = ML_STATE_CAP) -> int:
    """Maximum-likelihood message; ties go to the smallest id."""
    if codebook.size == 1:
        return 0
    return int(np.argmax(ml_likelihoods(y_M, codebook, topology, relays, tables, destination, cap)))
