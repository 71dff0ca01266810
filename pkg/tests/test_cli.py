import json
from pathlib import Path

import pytest

from ftbp.check_matrix import read_matrix_text
from ftbp.cli import alpha_sweep, main
from ftbp.threshold import read_records

from oracles import SYN_TAU

HERE = Path(__file__).parent


@pytest.mark.parametrize("stage,name", [("raw", "toy_raw"), ("sparse", "toy_sparse"), ("consolidated", "toy_consolidated")])
def test_dump_matrix_golden(tmp_path, stage, name):
    out = tmp_path / f"{name}.txt"
    assert main(["dump-matrix", "--toy", "--rounds", "3", "--stage", stage, "--labels", "-o", str(out)]) == 0
    assert out.read_text() == (HERE / "golden" / f"{name}.txt").read_text()


def test_dump_matrix_stdout(capsys):
    assert main(["dump-matrix", "--toy", "--rounds", "2", "--no-tail"]) == 0
    M, N, r, _ = read_matrix_text(capsys.readouterr().out)
    assert (M, N, r) == (4, 20, 2)


def test_lifetime_zero_noise(tmp_path):
    out = tmp_path / "zero.jsonl"
    code = main(["lifetime", "--family", "toric", "--d", "4", "--eps", "0", "--trials", "3",
                 "--max-rounds", "20", "-o", str(out)])
    assert code == 0
    headers, trials = read_records(out)
    assert len(headers) == 1 and len(trials) == 3
    assert all(t["censored"] and t["rounds"] == 20 for t in trials)


def test_lifetime_reproducible_and_resumable(tmp_path):
    args = ["lifetime", "--family", "toric", "--d", "4", "--eps", "0.01", "--r", "4", "--trials", "3",
            "--t-max", "20", "--max-rounds", "300", "--seed", "4"]
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(args + ["-o", str(a)]) == 0
    # an interrupted run: keep the header, one full trial and half a line
    lines = a.read_text().splitlines(keepends=True)
    b.write_text(lines[0] + lines[1] + lines[2][:15])
    assert main(args + ["-o", str(b), "--resume"]) == 0
    ta = sorted((t["index"], t["seed"], t["rounds"]) for t in read_records(a)[1])
    tb = sorted((t["index"], t["seed"], t["rounds"]) for t in read_records(b)[1])
    assert ta == tb


def test_fit_synthetic_fixture(capsys):
    assert main(["fit", "--csv-input", str(HERE / "data" / "synthetic_ansatz.csv")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert abs(report["tau"] - SYN_TAU) / SYN_TAU < 0.05


def test_decode_sampled(capsys):
    assert main(["decode", "--toy", "--rounds", "3", "--tail", "--eps", "0.02", "--seed", "3"]) in (0, 3)
    rec = json.loads(capsys.readouterr().out)
    assert rec["status"] in ("Converge", "Fail")


def test_decode_syndrome_file(tmp_path, capsys):
    syn = tmp_path / "s.txt"
    syn.write_text("10 00 00 00\n")  # one measurement flip, raw bits
    assert main(["decode", "--toy", "--rounds", "3", "--tail", "--syndrome", str(syn)]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["status"] == "Converge" and len(rec["estimate"]) == 1


@pytest.mark.parametrize("argv", [
    ["lifetime", "--family", "toric", "--d", "4", "--eps", "0.9"],
    ["lifetime", "--family", "toric", "--d", "4", "--eps", "0.001", "--mode", "C8"],
    ["lifetime", "--family", "toric", "--d", "4", "--eps", "0.001", "--r", "1"],
    ["lifetime", "--family", "toric", "--eps", "0.001"],
    ["dump-matrix", "--family", "toric"],
    ["fit"],
])
def test_invalid_config_exits_nonzero(argv, capsys):
    assert main(argv) == 1
    assert "error" in capsys.readouterr().err


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"family": "toric", "d": 4, "eps": [0.001], "policy": "sliding"}))
    assert main(["lifetime", "--config", str(cfg)]) == 1


def test_alpha_sweep():
    a = alpha_sweep()
    assert a[0] == 1.0 and a[-1] == 0.4 and len(a) == 61
    assert alpha_sweep(0.5, 0.1) == (1.0, 0.9, 0.8, 0.7, 0.6, 0.5)


def test_bundled_campaign_configs():
    from ftbp.cli import _load_config
    for path in (Path(__import__("ftbp").__file__).parent / "campaigns").glob("*.json"):
        assert _load_config(path)
