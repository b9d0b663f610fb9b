"""Command-line front end: ``relaynet {precision,cutset,transition,simulate}``.

Exit codes: 0 success, 1 runtime or numeric error, 2 configuration error.
"""
from __future__ import annotations

import argparse
import io
import sys
from pathlib import Path

from . import cutset, experiment, lincode
from .channel import transition_tables
from .topology import TopologyError, check, compute_precision, load_topology

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    def __init__(self, problems):
        self.problems = [problems] if isinstance(problems, str) else list(problems)
        super().__init__("; ".join(self.problems))


def _sweep_range(text: str) -> range:
    try:
        lo, hi = (int(p) for p in text.split(".."))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected K0..K1, got {text!r}") from None
    if hi < lo:
        raise argparse.ArgumentTypeError("sweep upper end below lower end")
    return range(lo, hi + 1)


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relaynet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path, help="topology YAML/JSON file")
    common.add_argument("--seed", type=_seed, default=None, help="master seed (u64)")
    common.add_argument("--out", type=Path, default=None, help="output file (default stdout)")

    sub.add_parser("precision", parents=[common], help="print the quantizer precision n")

    c = sub.add_parser("cutset", parents=[common], help="cut-set bounds as CSV")
    c.add_argument("--mode", choices=("gaussian", "discrete", "both"), default="both")
    c.add_argument("--destination", type=int, default=None)
    c.add_argument("--sweep", type=_sweep_range, default=None, metavar="K0..K1",
                   help="scale all gains by 2^k for k in K0..K1 and report the gap")
    c.add_argument("--mc-samples", type=int, default=None)
    c.add_argument("--method", choices=("auto", "exact", "plugin", "sampled"), default="auto",
                   help="discrete mutual-information estimator")
    c.add_argument("--precision", type=int, default=None, help="override n (not with --sweep)")
    c.add_argument("--workers", type=int, default=1)

    t = sub.add_parser("transition", parents=[common], help="per-symbol channel law as CSV")
    t.add_argument("--node", type=int, action="append", default=None,
                   help="receiver to tabulate (repeatable; default all)")
    t.add_argument("--precision", type=int, default=None)

    s = sub.add_parser("simulate", parents=[common], help="block error rate as CSV")
    s.add_argument("--block-len", type=int, required=True, metavar="N")
    s.add_argument("--msg-bits", type=int, required=True, metavar="B")
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--decoder", choices=experiment.DECODERS, default="ml-exact")
    s.add_argument("--epsilon", type=float, default=lincode.DEFAULT_EPSILON)
    s.add_argument("--assoc-samples", type=int, default=64, metavar="L")
    s.add_argument("--destination", type=int, default=None)
    s.add_argument("--precision", type=int, default=None)
    s.add_argument("--competitors", type=int, default=None,
                   help="decode against the true codeword and K-1 fresh random codewords")
    s.add_argument("--workers", type=int, default=1)
    return p


def _load(path: Path):
    try:
        return check(load_topology(path))
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except TopologyError as exc:
        raise ConfigError(exc.problems) from None


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def cmd_precision(args) -> str:
    top = _load(args.config)
    try:
        return f"{compute_precision(top)}\n"
    except TopologyError as exc:
        raise ConfigError(exc.problems) from None


def cmd_cutset(args) -> str:
    top = _load(args.config)
    problems = []
    if args.destination is not None and args.destination not in top.destinations:
        problems.append(f"node {args.destination} is not a destination")
    if args.mc_samples is not None and args.mc_samples < 1000:
        problems.append("--mc-samples must be at least 1000")
    if args.precision is not None and (args.precision < 1 or args.sweep is not None):
        problems.append("--precision must be >= 1 and cannot be combined with --sweep")
    if args.workers < 1:
        problems.append("--workers must be at least 1")
    if problems:
        raise ConfigError(problems)
    kw = dict(method=args.method, samples=args.mc_samples, seed=args.seed or 0, workers=args.workers)
    if args.sweep is not None:
        rows = cutset.gap_sweep(top, args.sweep, destination=args.destination, mode=args.mode, **kw)
        return cutset.sweep_csv(rows)
    reports = [cutset.cutset_bound(top, args.mode, d, n=args.precision, **kw)
               for d in ([args.destination] if args.destination is not None else top.destinations)]
    if len(reports) == 1:
        return reports[0].to_csv()
    buf = io.StringIO()
    for rep in reports:
        body = rep.to_csv().splitlines()
        if not buf.tell():
            buf.write("destination," + body[0] + "\n")
        for line in body[1:]:
            buf.write(f"{rep.destination},{line}\n")
    return buf.getvalue()


def cmd_transition(args) -> str:
    top = _load(args.config)
    nodes = args.node or list(range(1, top.node_count))
    bad = [j for j in nodes if not 0 < j < top.node_count or not top.parents(j)]
    if bad or (args.precision is not None and args.precision < 1):
        raise ConfigError([f"node {j} is not a receiver" for j in bad]
                          + (["--precision must be >= 1"] if args.precision is not None
                             and args.precision < 1 else []))
    n = args.precision or compute_precision(top)
    tables = transition_tables(top, n, nodes)
    buf = io.StringIO()
    buf.write("node,config,output,probability\n")
    for j in nodes:
        probs = tables[j].probs
        for cfg in range(probs.shape[0]):
            for y in range(probs.shape[1]):
                buf.write(f"{j},{cfg},{y},{probs[cfg, y]:.12e}\n")
    return buf.getvalue()


def cmd_simulate(args) -> str:
    top = _load(args.config)
    problems = []
    if args.seed is None:
        problems.append("--seed is required for simulate")
    cfg = experiment.SimulationConfig(
        topology=top, N=args.block_len, B=args.msg_bits, trials=args.trials, decoder=args.decoder,
        epsilon=args.epsilon, L=args.assoc_samples, seed=args.seed or 0, n=args.precision,
        destination=args.destination, competitors=args.competitors, workers=args.workers)
    problems += cfg.problems()
    if problems:
        raise ConfigError(problems)
    return experiment.bler_csv([experiment.run_simulation(cfg)])


COMMANDS = {"precision": cmd_precision, "cutset": cmd_cutset,
            "transition": cmd_transition, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _emit(COMMANDS[args.command](args), args.out)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RuntimeError, MemoryError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
