"""Cut mutual informations and cut-set bounds for the Gaussian and discrete networks.

All quantities are bits per symbol. The discrete network's cut value is taken
with i.i.d. uniform inputs at every node; the Gaussian one with i.i.d. CN(0, 1)
inputs (the log-det form).
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .channel import (DEFAULT_TAIL_TOL, NOISE_STD, component_entropy, component_law,
                      component_prob, entropy_bits, tail_halfwidth)
from .interface import quantize_values, symbol_table
from .topology import Cut, Topology, compute_precision, enumerate_cuts

EXACT_CAP = 2**24
INNER_CAP = 2**16
DEFAULT_MC_SAMPLES = 10**5
DEFAULT_SAMPLED_SAMPLES = 4000


class CapExceeded(ValueError):
    pass


# --- Gaussian ------------------------------------------------------------------

def transfer_matrix(topology: Topology, cut: Cut) -> np.ndarray:
    """Gains from transmitters in the cut set to receivers outside it.

    Rows are receivers with at least one in-edge from the cut set, columns
    transmitters with at least one out-edge across; both ascending.
    """
    omega = cut.omega
    crossing = [e for e in topology.edges if e.src in omega and e.dst not in omega]
    rows = sorted({e.dst for e in crossing})
    cols = sorted({e.src for e in crossing})
    H = np.zeros((len(rows), len(cols)), dtype=complex)
    for e in crossing:
        H[rows.index(e.dst), cols.index(e.src)] = e.gain
    return H


def logdet_bits(H: np.ndarray, power_scale: float = 1.0) -> float:
    """log2 det(I + s H H^dagger) through a Cholesky factor of the smaller Gram matrix."""
    if power_scale <= 0:
        raise ValueError("power_scale must be positive")
    H = np.asarray(H, dtype=complex)
    if not np.all(np.isfinite(H)):
        raise ValueError("non-finite gains")
    if H.size == 0:
        return 0.0
    G = H.conj().T @ H if H.shape[1] <= H.shape[0] else H @ H.conj().T
    M = np.eye(G.shape[0]) + power_scale * G
    L = np.linalg.cholesky(M)
    return float(2.0 * np.sum(np.log2(np.real(np.diag(L)))))


def gaussian_cut_mi(topology: Topology, cut: Cut, power_scale: float = 1.0) -> float:
    return logdet_bits(transfer_matrix(topology, cut), power_scale)


# --- discrete: structure ----------------------------------------------------------

@dataclass(frozen=True)
class CutGroup:
    """Receivers across a cut coupled through shared transmitters inside it.

    ``tx`` are their parents inside the cut set, ``cond`` their parents outside
    (conditioned on). Distinct groups are independent given the conditioning.
    """

    receivers: tuple[int, ...]
    tx: tuple[int, ...]
    cond: tuple[int, ...]


def cut_groups(topology: Topology, cut: Cut) -> list[CutGroup]:
    omega = cut.omega
    receivers = sorted({e.dst for e in topology.edges if e.src in omega and e.dst not in omega})
    owner = {j: j for j in receivers}

    def find(j):
        while owner[j] != j:
            owner[j] = owner[owner[j]]
            j = owner[j]
        return j

    by_tx: dict[int, int] = {}
    for j in receivers:
        for i in topology.parents(j):
            if i in omega:
                if i in by_tx:
                    owner[find(j)] = find(by_tx[i])
                else:
                    by_tx[i] = j
    groups: dict[int, list[int]] = {}
    for j in receivers:
        groups.setdefault(find(j), []).append(j)
    out = []
    for members in groups.values():
        parents = sorted({i for j in members for i in topology.parents(j)})
        out.append(CutGroup(tuple(members), tuple(i for i in parents if i in omega),
                            tuple(i for i in parents if i not in omega)))
    return sorted(out, key=lambda g: g.receivers)


def _means(topology: Topology, j: int, nodes: Sequence[int], configs: np.ndarray, sym) -> np.ndarray:
    """Noise-free received value at ``j`` contributed by ``nodes`` for each row of tuple indices."""
    g = np.zeros(configs.shape[0], dtype=complex)
    parents = set(topology.parents(j))
    for pos, i in enumerate(nodes):
        if i in parents:
            g += topology.gain(i, j) * sym[configs[:, pos]]
    return g


def _all_configs(count: int, K: int) -> np.ndarray:
    idx = np.arange(K ** count)
    return np.stack([(idx // K ** (count - 1 - p)) % K for p in range(count)], axis=1) if count else \
        np.zeros((1, 0), dtype=np.int64)


def _joint_rows(g: np.ndarray, n: int, tail_tol: float) -> np.ndarray:
    pr = component_law(g.real, n, tail_tol)
    pi = component_law(g.imag, n, tail_tol)
    return (pr[:, :, None] * pi[:, None, :]).reshape(len(g), -1)


def _mixture(rows: list[np.ndarray]) -> np.ndarray:
    T = rows[0].shape[0]
    if len(rows) == 1:
        return rows[0].mean(axis=0)
    if len(rows) == 2:
        return (rows[0].T @ rows[1]) / T
    letters = "abcdefghijklmnopqrstuvwxyz"
    spec = ",".join("z" + letters[k] for k in range(len(rows))) + "->" + letters[:len(rows)]
    return np.einsum(spec, *rows) / T


def exact_size(group: CutGroup, n: int) -> int:
    K = 4 ** n
    return K ** len(group.cond) * K ** len(group.tx) * K ** len(group.receivers)


def _group_exact(topology: Topology, group: CutGroup, n: int, tail_tol: float) -> float:
    K = 4 ** n
    sym = symbol_table(n)
    tx_cfg = _all_configs(len(group.tx), K)
    c_cfg = _all_configs(len(group.cond), K)
    g_tx = {j: _means(topology, j, group.tx, tx_cfg, sym) for j in group.receivers}
    g_c = {j: _means(topology, j, group.cond, c_cfg, sym) for j in group.receivers}

    h_marg = 0.0
    for c in range(c_cfg.shape[0]):
        rows = [_joint_rows(g_tx[j] + g_c[j][c], n, tail_tol) for j in group.receivers]
        h_marg += entropy_bits(_mixture(rows).ravel())
    h_marg /= c_cfg.shape[0]

    h_cond = 0.0
    for j in group.receivers:
        g = (g_tx[j][:, None] + g_c[j][None, :]).ravel()
        h_cond += float(np.mean(component_entropy(g.real, n, tail_tol) + component_entropy(g.imag, n, tail_tol)))
    return h_marg - h_cond


def discrete_cut_mi_exact(topology: Topology, cut: Cut, n: int, tail_tol: float = DEFAULT_TAIL_TOL,
                          cap: int = EXACT_CAP) -> float:
    """Exact per-symbol cut mutual information of the discrete network under uniform inputs."""
    total = 0.0
    for group in cut_groups(topology, cut):
        size = exact_size(group, n)
        if size > cap:
            raise CapExceeded(f"exact enumeration of {size} states exceeds cap {cap}; "
                              f"use the Monte Carlo or sampled estimator")
        total += _group_exact(topology, group, n, tail_tol)
    return max(total, 0.0)


# --- discrete: plug-in Monte Carlo -----------------------------------------------

def _codes(cols: list[np.ndarray], S: int) -> np.ndarray:
    if not cols:
        return np.zeros(S, dtype=np.int64)
    _, inv = np.unique(np.stack(cols, axis=1), axis=0, return_inverse=True)
    return inv.ravel()


def _plugin_entropy(codes: np.ndarray, weights: np.ndarray) -> float:
    counts = np.bincount(codes, weights=weights)
    total = counts.sum()
    p = counts[counts > 0] / total
    h = float(-(p * np.log2(p)).sum())
    # Miller-Madow correction
    return h + (len(p) - 1) / (2.0 * total * math.log(2))


def _plugin_mi(codes: dict, weights: np.ndarray) -> float:
    return (_plugin_entropy(codes["tc"], weights) + _plugin_entropy(codes["yc"], weights)
            - _plugin_entropy(codes["tyc"], weights) - _plugin_entropy(codes["c"], weights))


def discrete_cut_mi_mc(topology: Topology, cut: Cut, n: int, samples: int, rng,
                       bootstrap: int = 200) -> tuple[float, float]:
    """Plug-in (Miller-Madow corrected) estimate and bootstrap 95% half-width.

    Inputs are drawn uniformly, outputs by simulating the Gaussian reception
    and quantizing. Independent receiver groups are estimated separately and
    summed, which keeps each empirical alphabet small.
    """
    if samples < 1000:
        raise ValueError("samples must be at least 1000")
    groups = cut_groups(topology, cut)
    if not groups:
        return 0.0, 0.0
    K = 4 ** n
    sym = symbol_table(n)
    all_codes = []
    for group in groups:
        nodes = list(group.tx) + list(group.cond)
        x = rng.integers(0, K, size=(samples, len(nodes)))
        ycols = []
        for j in group.receivers:
            g = _means(topology, j, nodes, x, sym)
            z = rng.standard_normal((2, samples)) * NOISE_STD
            vr, vi = quantize_values(g + z[0] + 1j * z[1], n)
            ycols += [vr, vi]
        tcols = [x[:, k] for k in range(len(group.tx))]
        ccols = [x[:, len(group.tx) + k] for k in range(len(group.cond))]
        all_codes.append({"tc": _codes(tcols + ccols, samples), "yc": _codes(ycols + ccols, samples),
                          "tyc": _codes(tcols + ycols + ccols, samples), "c": _codes(ccols, samples)})

    def total(weights):
        return sum(_plugin_mi(codes, weights) for codes in all_codes)

    est = total(np.ones(samples))
    reps = np.empty(bootstrap)
    for b in range(bootstrap):
        w = np.bincount(rng.integers(0, samples, samples), minlength=samples).astype(float)
        reps[b] = total(w)
    lo, hi = np.percentile(reps, [2.5, 97.5])
    return max(est, 0.0), float((hi - lo) / 2)


# --- discrete: sampled inputs with exact conditional laws ---------------------------

def _group_sampled(topology: Topology, group: CutGroup, n: int, samples: int, rng,
                   tail_tol: float, inner_cap: int) -> tuple[float, np.ndarray]:
    """Per-sample terms whose mean is the group's mutual information.

    Outer samples draw inputs and an output; the marginal likelihood of that
    output given the conditioning inputs is summed exactly over every
    transmitter configuration when there are at most ``inner_cap`` of them,
    otherwise over a fixed random subset plus the sample's own configuration.
    """
    K = 4 ** n
    mod = 1 << n
    sym = symbol_table(n)
    recv = group.receivers
    x_tx = rng.integers(0, K, size=(samples, len(group.tx)))
    x_c = rng.integers(0, K, size=(samples, len(group.cond)))
    g_tx_out = {j: _means(topology, j, group.tx, x_tx, sym) for j in recv}
    g_c_out = {j: _means(topology, j, group.cond, x_c, sym) for j in recv}
    v_out, h_cond = {}, np.zeros(samples)
    for j in recv:
        g = g_tx_out[j] + g_c_out[j]
        z = rng.standard_normal((2, samples)) * NOISE_STD
        v_out[j] = quantize_values(g + z[0] + 1j * z[1], n)
        h_cond += component_entropy(g.real, n, tail_tol) + component_entropy(g.imag, n, tail_tol)

    full = K ** len(group.tx) <= inner_cap
    inner = _all_configs(len(group.tx), K) if full else rng.integers(0, K, size=(inner_cap, len(group.tx)))
    g_in = {j: _means(topology, j, group.tx, inner, sym) for j in recv}
    lead = recv[0]
    order = np.argsort(g_in[lead].real, kind="stable")
    lead_sorted = g_in[lead].real[order]
    reach = tail_halfwidth(tail_tol) + 1.0
    top = float(np.max(np.abs(lead_sorted))) if len(lead_sorted) else 0.0

    terms = np.empty(samples)
    for s in range(samples):
        v = int(v_out[lead][0][s])
        c = g_c_out[lead][s].real
        pieces = []
        m = v
        while m <= top + abs(c) + reach:
            for lo, hi in ((m - reach - c, m + 1 + reach - c), (-m - 1 - reach - c, -m + reach - c)):
                a, b = np.searchsorted(lead_sorted, [lo, hi])
                if b > a:
                    pieces.append(order[a:b])
            m += mod
        cand = np.unique(np.concatenate(pieces)) if pieces else np.zeros(0, dtype=np.int64)
        prob = np.ones(len(cand))
        for j in recv:
            g = g_in[j][cand] + g_c_out[j][s]
            prob *= component_prob(v_out[j][0][s], g.real, n, tail_tol)
            prob *= component_prob(v_out[j][1][s], g.imag, n, tail_tol)
        total = prob.sum()
        if full:
            p_marg = total / len(inner)
        else:
            own = 1.0
            for j in recv:
                g = g_tx_out[j][s] + g_c_out[j][s]
                own *= float(component_prob(v_out[j][0][s], g.real, n, tail_tol))
                own *= float(component_prob(v_out[j][1][s], g.imag, n, tail_tol))
            p_marg = (total + own) / (len(inner) + 1)
        terms[s] = -math.log2(p_marg) - h_cond[s]
    return float(terms.mean()), terms


def discrete_cut_mi_sampled(topology: Topology, cut: Cut, n: int, samples: int, rng,
                            tail_tol: float = DEFAULT_TAIL_TOL, inner_cap: int = INNER_CAP
                            ) -> tuple[float, float]:
    """Estimate and 95% half-width of the discrete cut information for large alphabets.

    Unlike the plug-in estimator this stays accurate when the output alphabet
    dwarfs the sample count, because every output likelihood is computed from
    the exact channel law.
    """
    est, var = 0.0, 0.0
    for group in cut_groups(topology, cut):
        mean, terms = _group_sampled(topology, group, n, samples, rng, tail_tol, inner_cap)
        est += mean
        var += terms.var(ddof=1) / len(terms) if len(terms) > 1 else 0.0
    return max(est, 0.0), 1.96 * math.sqrt(var)


# --- bounds ------------------------------------------------------------------------------

@dataclass(frozen=True)
class CutRow:
    cut: Cut
    gaussian_bits: float | None
    discrete_bits: float | None
    discrete_ci: float = 0.0
    method: str = ""


@dataclass
class CutReport:
    destination: int
    n: int
    rows: list[CutRow] = field(default_factory=list)

    def _argmin(self, attr: str) -> CutRow | None:
        vals = [r for r in self.rows if getattr(r, attr) is not None]
        return min(vals, key=lambda r: (getattr(r, attr), r.cut.bitmask)) if vals else None

    @property
    def cs_g_proxy(self) -> float | None:
        r = self._argmin("gaussian_bits")
        return None if r is None else r.gaussian_bits

    @property
    def cs_d(self) -> float | None:
        r = self._argmin("discrete_bits")
        return None if r is None else r.discrete_bits

    @property
    def gaussian_cut(self) -> Cut | None:
        r = self._argmin("gaussian_bits")
        return None if r is None else r.cut

    @property
    def discrete_cut(self) -> Cut | None:
        r = self._argmin("discrete_bits")
        return None if r is None else r.cut

    @property
    def discrete_ci(self) -> float:
        r = self._argmin("discrete_bits")
        return 0.0 if r is None else r.discrete_ci

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cut_bitmask", "gaussian_bits", "discrete_bits", "discrete_ci"])
        for r in self.rows:
            w.writerow([r.cut.bitmask, _fmt(r.gaussian_bits), _fmt(r.discrete_bits),
                        _fmt(None if r.discrete_bits is None else r.discrete_ci)])
        w.writerow(["min", _fmt(self.cs_g_proxy), _fmt(self.cs_d),
                    _fmt(None if self.cs_d is None else self.discrete_ci)])
        return buf.getvalue()


def _fmt(v) -> str:
    return "" if v is None else f"{v:.6f}"


def discrete_cut_mi(topology: Topology, cut: Cut, n: int, method: str = "auto", *, samples: int | None = None,
                    seed: int = 0, tail_tol: float = DEFAULT_TAIL_TOL, cap: int = EXACT_CAP
                    ) -> tuple[float, float, str]:
    """Dispatch to an estimator; returns (bits, 95% half-width, method used).

    ``auto`` is exact when every group fits under ``cap`` and sampled otherwise.
    Randomness comes from ``(seed, cut bitmask)`` so results do not depend on
    evaluation order.
    """
    rng = np.random.default_rng([seed, cut.bitmask, cut.destination])
    if method == "auto":
        fits = all(exact_size(g, n) <= cap for g in cut_groups(topology, cut))
        method = "exact" if fits else "sampled"
    if method == "exact":
        return discrete_cut_mi_exact(topology, cut, n, tail_tol, cap), 0.0, method
    if method == "plugin":
        est, ci = discrete_cut_mi_mc(topology, cut, n, samples or DEFAULT_MC_SAMPLES, rng)
        return est, ci, method
    if method == "sampled":
        est, ci = discrete_cut_mi_sampled(topology, cut, n, samples or DEFAULT_SAMPLED_SAMPLES, rng, tail_tol)
        return est, ci, method
    raise ValueError(f"unknown discrete method {method!r}")


def cutset_bound(topology: Topology, mode: str = "both", destination: int | None = None, *,
                 n: int | None = None, method: str = "auto", samples: int | None = None, seed: int = 0,
                 tail_tol: float = DEFAULT_TAIL_TOL, cap: int = EXACT_CAP, workers: int = 1) -> CutReport:
    """Evaluate every cut separating the source from ``destination``.

    ``mode`` is ``gaussian``, ``discrete`` or ``both``. ``n`` defaults to the
    topology's precision.
    """
    if mode not in ("gaussian", "discrete", "both"):
        raise ValueError(f"unknown mode {mode!r}")
    if destination is None:
        destination = topology.destinations[-1]
    n = compute_precision(topology) if n is None else n
    cuts = enumerate_cuts(topology, destination)

    def row(cut: Cut) -> CutRow:
        gbits = gaussian_cut_mi(topology, cut) if mode in ("gaussian", "both") else None
        dbits, ci, used = None, 0.0, ""
        if mode in ("discrete", "both"):
            dbits, ci, used = discrete_cut_mi(topology, cut, n, method, samples=samples, seed=seed,
                                              tail_tol=tail_tol, cap=cap)
        return CutRow(cut, gbits, dbits, ci, used)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(row, cuts))
    else:
        rows = [row(c) for c in cuts]
    return CutReport(destination, n, rows)


def multicast_bound(topology: Topology, mode: str = "gaussian", **kwargs) -> float:
    """Minimum over destinations of the per-destination cut-set bound."""
    if mode not in ("gaussian", "discrete"):
        raise ValueError("multicast_bound mode must be 'gaussian' or 'discrete'")
    values = []
    for d in topology.destinations:
        rep = cutset_bound(topology, mode, d, **kwargs)
        values.append(rep.cs_g_proxy if mode == "gaussian" else rep.cs_d)
    return min(values)


@dataclass(frozen=True)
class SweepRow:
    k: int
    n: int
    cs_g_proxy: float | None
    cs_d: float | None
    cs_d_ci: float

    @property
    def gap(self) -> float | None:
        if self.cs_g_proxy is None or self.cs_d is None:
            return None
        return self.cs_g_proxy - self.cs_d


def gap_sweep(topology: Topology, scale_exponents: Iterable[int], n_policy="auto", *,
              destination: int | None = None, mode: str = "both", **kwargs) -> list[SweepRow]:
    """Scale every gain by 2^k and recompute the bounds.

    ``n_policy`` is ``"auto"`` (recompute the precision per k) or a fixed int.
    """
    out = []
    for k in scale_exponents:
        scaled = topology.scaled(2.0 ** k)
        n = compute_precision(scaled) if n_policy == "auto" else int(n_policy)
        rep = cutset_bound(scaled, mode, destination, n=n, **kwargs)
        out.append(SweepRow(k, n, rep.cs_g_proxy, rep.cs_d, rep.discrete_ci))
    return out


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "n", "cs_g_proxy", "cs_d", "cs_d_ci", "gap"])
    for r in rows:
        w.writerow([r.k, r.n, _fmt(r.cs_g_proxy), _fmt(r.cs_d),
                    _fmt(None if r.cs_d is None else r.cs_d_ci), _fmt(r.gap)])
    return buf.getvalue()
