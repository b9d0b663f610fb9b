import hashlib
import subprocess
import sys
from pathlib import Path

import pytest
import yaml

from relaynet.cli import main
from relaynet.topology import compute_precision, diamond, dump_topology, load_topology

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
DIAMOND = str(CONFIGS / "diamond.yaml")
DIAMOND_N1 = str(CONFIGS / "diamond_n1.yaml")
MULTICAST = str(CONFIGS / "multicast.yaml")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("cmd", [[], ["precision"], ["cutset"], ["transition"], ["simulate"]])
def test_help_exits_zero(capsys, cmd):
    assert run(capsys, *cmd, "--help")[0] == 0


def test_precision(capsys):
    code, out, _ = run(capsys, "precision", "--config", DIAMOND)
    assert code == 0 and int(out) == compute_precision(load_topology(DIAMOND)) == 2


def test_malformed_config(capsys, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("nodes: [\n")
    code, _, err = run(capsys, "precision", "--config", str(bad))
    assert code == 2 and "not valid" in err
    code, _, err = run(capsys, "precision", "--config", str(tmp_path / "missing.yaml"))
    assert code == 2 and "no such file" in err


def test_invalid_topology_reports_everything(capsys, tmp_path):
    doc = {"nodes": [{"id": 0, "layer": 0}, {"id": 1, "layer": 2}, {"id": 2, "layer": 0}],
           "edges": [{"from": 0, "to": 1, "re": 1.0, "im": 0.0}, {"from": 0, "to": 1, "re": 1.0, "im": 0.0}],
           "destinations": [0]}
    path = tmp_path / "t.yaml"
    path.write_text(yaml.safe_dump(doc))
    code, _, err = run(capsys, "cutset", "--config", str(path))
    assert code == 2
    assert err.count("config error") >= 4


def test_cutset_gaussian(capsys):
    code, out, _ = run(capsys, "cutset", "--config", DIAMOND, "--mode", "gaussian")
    lines = out.splitlines()
    assert code == 0 and len(lines) == 6
    assert lines[0] == "cut_bitmask,gaussian_bits,discrete_bits,discrete_ci"
    assert lines[-1].startswith("min,5.672")


def test_cutset_sweep_monotone_n(capsys):
    code, out, _ = run(capsys, "cutset", "--config", DIAMOND, "--mode", "gaussian", "--sweep", "0..6")
    rows = [line.split(",") for line in out.splitlines()[1:]]
    assert code == 0 and len(rows) == 7
    ns = [int(r[1]) for r in rows]
    assert ns == sorted(ns) and ns[0] < ns[-1]


def test_cutset_discrete_and_multicast(capsys, tmp_path):
    code, out, _ = run(capsys, "cutset", "--config", MULTICAST, "--mode", "both", "--method", "plugin",
                       "--mc-samples", "2000", "--seed", "3")
    lines = out.splitlines()
    assert code == 0 and lines[0].startswith("destination,")
    assert sum(line.split(",")[1] == "min" for line in lines) == 2
    code, _, err = run(capsys, "cutset", "--config", MULTICAST, "--destination", "1")
    assert code == 2 and "not a destination" in err


def test_cutset_zero_gain(capsys, tmp_path):
    path = tmp_path / "zero.yaml"
    path.write_text(yaml.safe_dump(dump_topology(diamond(0))))
    code, out, _ = run(capsys, "cutset", "--config", str(path), "--mode", "both")
    assert code == 0
    assert all(float(v) == 0 for line in out.splitlines()[1:] for v in line.split(",")[1:3])


def test_transition(capsys):
    code, out, _ = run(capsys, "transition", "--config", DIAMOND_N1, "--precision", "1", "--node", "3")
    lines = out.splitlines()
    assert code == 0 and len(lines) == 1 + 16 * 4
    total = sum(float(line.split(",")[3]) for line in lines[1:5])
    assert total == pytest.approx(1.0, abs=1e-10)


def test_simulate_requires_seed_and_valid_params(capsys):
    code, _, err = run(capsys, "simulate", "--config", DIAMOND_N1, "--block-len", "0", "--msg-bits", "-1",
                       "--trials", "0")
    assert code == 2
    for needle in ("--seed", "block length", "message bits", "trials"):
        assert needle in err


def test_simulate_b0_is_error_free(capsys):
    code, out, _ = run(capsys, "simulate", "--config", DIAMOND_N1, "--precision", "1", "--seed", "1",
                       "--block-len", "8", "--msg-bits", "0", "--trials", "50")
    assert code == 0
    assert out.splitlines()[1].startswith("8,0,ml-exact,50,0,0.000000,")


def test_simulate_cap_message(capsys):
    code, _, err = run(capsys, "simulate", "--config", DIAMOND_N1, "--precision", "1", "--seed", "1",
                       "--block-len", "8", "--msg-bits", "1", "--trials", "2")
    assert code == 1 and "cap" in err


def test_simulate_deterministic_across_workers(tmp_path):
    digests = set()
    for workers in (1, 3):
        out = tmp_path / f"w{workers}.csv"
        assert main(["simulate", "--config", DIAMOND_N1, "--precision", "1", "--seed", "42", "--block-len", "2",
                     "--msg-bits", "1", "--trials", "200", "--workers", str(workers), "--out", str(out)]) == 0
        digests.add(hashlib.sha256(out.read_bytes()).hexdigest())
    assert len(digests) == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "relaynet", "precision", "--config", DIAMOND],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "2"
