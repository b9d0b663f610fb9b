"""Monte Carlo block-error-rate runs of the linear network code."""
from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import binomtest

from . import lincode
from .channel import simulate_network_block, transition_tables
from .topology import Topology, compute_precision

DECODERS = ("ml-exact", "typicality")
CSV_HEADER = "N,B,decoder,trials,errors,bler,wilson95_lo,wilson95_hi"


@dataclass(frozen=True)
class SimulationConfig:
    topology: Topology
    N: int
    B: int
    trials: int
    decoder: str = "ml-exact"
    epsilon: float = lincode.DEFAULT_EPSILON
    L: int = 64
    seed: int = 0
    n: int | None = None
    destination: int | None = None
    competitors: int | None = None
    workers: int = 1

    def problems(self) -> list[str]:
        out = []
        if self.N < 1:
            out.append("block length N must be at least 1")
        if self.B < 0:
            out.append("message bits B must be non-negative")
        if self.trials < 1:
            out.append("trials must be at least 1")
        if self.decoder not in DECODERS:
            out.append(f"unknown decoder {self.decoder!r}")
        if not self.epsilon > 0:
            out.append("epsilon must be positive")
        if self.L < 1:
            out.append("association samples L must be at least 1")
        if self.n is not None and self.n < 1:
            out.append("precision n must be at least 1")
        if self.competitors is not None and self.competitors < 2:
            out.append("competitors must be at least 2")
        if self.workers < 1:
            out.append("workers must be at least 1")
        if self.destination is not None and self.destination not in self.topology.destinations:
            out.append(f"node {self.destination} is not a destination")
        return out


@dataclass(frozen=True)
class BlerRow:
    N: int
    B: int
    decoder: str
    trials: int
    errors: int
    wilson95_lo: float
    wilson95_hi: float

    @property
    def bler(self) -> float:
        return self.errors / self.trials

    def csv(self) -> str:
        return (f"{self.N},{self.B},{self.decoder},{self.trials},{self.errors},"
                f"{self.bler:.6f},{self.wilson95_lo:.6f},{self.wilson95_hi:.6f}")


def wilson_interval(errors: int, trials: int) -> tuple[float, float]:
    ci = binomtest(errors, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def intervals_overlap(a: BlerRow, b: BlerRow) -> bool:
    return a.wilson95_lo <= b.wilson95_hi and b.wilson95_lo <= a.wilson95_hi


def bler_csv(rows) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in rows:
        buf.write(r.csv() + "\n")
    return buf.getvalue()


class _Runner:
    def __init__(self, cfg: SimulationConfig):
        self.cfg = cfg
        top = cfg.topology
        self.n = cfg.n if cfg.n is not None else compute_precision(top)
        code_rng = np.random.default_rng([cfg.seed, 0, 0])
        if cfg.competitors is None:
            self.codebook = lincode.generate_codebook(cfg.B, cfg.N, self.n, code_rng)
        else:
            self.codebook = None
        self.relays = lincode.random_relay_matrices(top, self.n, cfg.N, code_rng)
        self.tables = transition_tables(top, self.n)
        self.dests = top.destinations if cfg.destination is None else (cfg.destination,)

    def _trial_codebook(self, rng):
        """Full codebook, or the true codeword among fresh competitors at a random slot."""
        cfg = self.cfg
        if self.codebook is not None:
            return self.codebook, int(rng.integers(self.codebook.size))
        K = min(cfg.competitors, 2 ** cfg.B)
        words = rng.integers(0, 2, size=(K, 2 * self.n * cfg.N), dtype=np.uint8)
        slot = int(rng.integers(K))
        return lincode.Codebook(cfg.B, cfg.N, self.n, words), slot

    def trial(self, t: int) -> bool:
        """True when some destination decodes the wrong message."""
        cfg = self.cfg
        rng = np.random.default_rng([cfg.seed, 1, t])
        codebook, w = self._trial_codebook(rng)
        received = simulate_network_block(cfg.topology, codebook[w], self.relays, self.n, cfg.N, rng)
        for d in self.dests:
            if cfg.decoder == "ml-exact":
                w_hat = lincode.decode_ml_exact(received[d], codebook, cfg.topology, self.relays,
                                                self.tables, destination=d)
            else:
                w_hat = lincode.decode_typicality(received[d], codebook, cfg.topology, self.relays,
                                                  cfg.epsilon, cfg.L, rng, destination=d,
                                                  tables=self.tables).message
            if w_hat != w:
                return True
        return False


def run_simulation(cfg: SimulationConfig) -> BlerRow:
    """Run ``cfg.trials`` independent blocks; results do not depend on ``cfg.workers``."""
    problems = cfg.problems()
    if problems:
        raise ValueError("; ".join(problems))
    runner = _Runner(cfg)
    if cfg.workers == 1:
        outcomes = [runner.trial(t) for t in range(cfg.trials)]
    else:
        with ThreadPoolExecutor(cfg.workers) as pool:
            outcomes = list(pool.map(runner.trial, range(cfg.trials)))
    errors = int(sum(outcomes))
    lo, hi = wilson_interval(errors, cfg.trials)
    return BlerRow(cfg.N, cfg.B, cfg.decoder, cfg.trials, errors, lo, hi)
