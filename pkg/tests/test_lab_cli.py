import csv
import io
import json
import math
from pathlib import Path

import pytest

from qseal import __version__
from qseal import adversaries as adv
from qseal import lab
from qseal import lab_cli
from qseal import qbc_session as qs
from qseal import seal_string as ss
from qseal.stats import within_sigma

GOLDEN = Path(__file__).parent / "golden" / "basic-honest-seed3.csv"
GOLDEN_ARGS = ["commit-basic", "--trials", "200", "--s", "48,64", "--seed", "3"]


def rows_of(path: Path) -> list[dict]:
    return list(csv.DictReader(io.StringIO(path.read_text())))


def run_cli(argv, capsys):
    code = lab_cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_golden_report(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code, _, _ = run_cli(GOLDEN_ARGS + ["--out", str(out)], capsys)
    assert code == lab_cli.EXIT_OK
    assert out.read_bytes() == GOLDEN.read_bytes()
    header = out.read_text().splitlines()[0].split(",")
    assert header == lab.COLUMNS


def test_rerun_is_byte_identical_and_worker_independent(tmp_path, capsys):
    paths = []
    for j, workers in enumerate(["1", "1", "2"]):
        p = tmp_path / f"r{j}.csv"
        run_cli(["attack", "--strategy", "read-error", "--N", "8,16", "--trials", "2500",
                 "--seed", "9", "--workers", workers, "--out", str(p)], capsys)
        paths.append(p)
    blobs = {p.read_bytes() for p in paths}
    assert len(blobs) == 1
    metas = {Path(str(p) + ".meta.json").read_text() for p in paths}
    assert len(metas) == 1


def test_adding_cells_leaves_other_cells_alone(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_cli(["commit-basic", "--trials", "300", "--s", "64", "--seed", "4", "--out", str(a)], capsys)
    run_cli(["commit-basic", "--trials", "300", "--s", "40,64,80", "--seed", "4", "--out", str(b)], capsys)
    [only] = rows_of(a)
    grown = [r for r in rows_of(b) if r["s"] == "64"]
    assert len(grown) == 1
    drop = lambda r: {k: v for k, v in r.items() if k != "cell"}  # noqa: E731
    assert drop(only) == drop(grown[0])


def test_honest_basic_sweep_with_exact_decoding(tmp_path):
    spec = lab.ExperimentSpec("basic", "honest", {"s": [48, 64, 80], "Theta": [1e-9]}, trials=500, seed=1)
    rows, ok = lab.run_experiment(spec)
    assert ok and len(rows) == 3
    assert [r["rate"] for r in rows] == [1.0, 1.0, 1.0]


def test_honest_basic_sweep_at_default_wobble():
    spec = lab.ExperimentSpec("basic", "honest", {"s": [48, 64, 80]}, trials=2000, seed=2)
    rows, ok = lab.run_experiment(spec)
    assert ok and len(rows) == 3
    for r in rows:
        params = qs.ProtocolParams.standard(s=r["s"], n=None)
        assert r["reference"] == pytest.approx(qs.honest_acceptance_basic(params), abs=1e-15)


def test_measure_all_sweep_decreases_and_respects_escape_bound():
    spec = lab.ExperimentSpec("seal", "measure-all", {"N": [8, 16, 32]}, trials=4000, seed=5)
    rows, ok = lab.run_experiment(spec)
    assert ok
    rates = [r["rate"] for r in rows]
    assert rates[0] > rates[1] > rates[2]
    for r in rows:
        assert r["rate"] <= r["escape_bound"]
        p = ss.SealParams(math.pi / 8, 0.25, r["N"])
        assert r["reference"] == pytest.approx(adv.measure_all_escape_mean(p), abs=1e-15)
        assert within_sigma(r["rate"], r["reference"], r["trials"])


def test_every_rate_has_ci_and_reference_or_na(tmp_path, capsys):
    out = tmp_path / "r.csv"
    run_cli(["attack", "--strategy", "collective-search", "--s", "40", "--m", "16", "--n", "3",
             "--trials", "100", "--seed", "1", "--out", str(out)], capsys)
    [row] = rows_of(out)
    assert row["reference"] == "n/a"
    assert float(row["ci_lo"]) <= float(row["rate"]) <= float(row["ci_hi"])
    assert row["target_success"] != "n/a" and row["info_proxy"] != "n/a"


# exit codes


def test_exit_one_when_a_flag_fails(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr(qs, "honest_acceptance_basic", lambda params: 0.5)
    code, out, _ = run_cli(["commit-basic", "--trials", "200", "--out", str(tmp_path / "r.csv")], capsys)
    assert code == lab_cli.EXIT_FLAGGED
    assert "[FAIL] cell 0" in out
    assert rows_of(tmp_path / "r.csv")[0]["pass"] == "false"


def test_invalid_spec_lists_every_problem(tmp_path, capsys):
    code, _, err = run_cli(["attack", "--strategy", "flip", "--protocol", "seal", "--trials", "50",
                            "--out", str(tmp_path / "r.csv")], capsys)
    assert code == lab_cli.EXIT_INVALID
    assert "does not apply" in err and "trials=50" in err
    assert not (tmp_path / "r.csv").exists()


def test_invalid_cells_are_all_reported(capsys):
    code, _, err = run_cli(["commit-advanced", "--s", "20,24", "--n", "8"], capsys)
    assert code == lab_cli.EXIT_INVALID
    assert "cell 0" in err and "cell 1" in err


def test_subset_parity_capacity_is_invalid():
    with pytest.raises(lab.InvalidSpec) as exc:
        lab.validate(lab.ExperimentSpec("seal", "subset-parity", {"N": [16, 40], "payload": [4]}))
    assert len(exc.value.problems) == 1 and "N=16" in exc.value.problems[0]


# output location and metadata


def test_env_var_sets_default_output_dir(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(lab.OUT_DIR_ENV, str(tmp_path / "reports"))
    code, out, _ = run_cli(["commit-basic", "--trials", "100", "--seed", "8"], capsys)
    path = tmp_path / "reports" / "basic-honest-seed8.csv"
    assert code == 0 and path.exists() and str(path) in out
    meta = json.loads(Path(str(path) + ".meta.json").read_text())
    assert meta["seed"] == 8 and meta["version"] == __version__
    assert meta["columns"] == lab.COLUMNS
    assert meta["spec"]["protocol"] == "basic" and meta["spec"]["trials"] == 100


def test_sweep_from_config(tmp_path, capsys):
    cfg = tmp_path / "exp.yaml"
    cfg.write_text(
        "protocol: advanced\n"
        "strategy: random-index\n"
        "trials: 400\n"
        "seed: 11\n"
        "grid:\n  s: [64]\n  n: [8]\n"
        "G:\n  - '11110000'\n  - '00111100'\n  - '00001111'\n  - '10101010'\n"
    )
    out = tmp_path / "r.csv"
    code, _, _ = run_cli(["sweep", "--config", str(cfg), "--out", str(out)], capsys)
    assert code == 0
    [row] = rows_of(out)
    assert row["k"] == "4" and float(row["reference"]) == pytest.approx(1 / 16)


def test_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "exp.yaml"
    cfg.write_text("protocol: basic\nbogus: 1\n")
    with pytest.raises(lab.InvalidSpec):
        lab.ExperimentSpec.from_config(cfg)


def test_sweep_requires_config(capsys):
    assert run_cli(["sweep"], capsys)[0] == lab_cli.EXIT_INVALID


# seal demo


def demo_events(argv, capsys):
    code, out, _ = run_cli(["seal-demo"] + argv, capsys)
    assert code == 0
    return [json.loads(line) for line in out.splitlines()]


def test_seal_demo_no_read_is_unread(capsys):
    for seed in range(20):
        events = demo_events(["--seed", str(seed), "--no-read"], capsys)
        assert [e["event"] for e in events] == ["seal", "check"]
        assert events[-1]["verdict"] == "Unread" and events[-1]["failed"] == []


def test_seal_demo_read_detection_rate(capsys):
    p = ss.SealParams(math.pi / 8, 0.25, 8)
    want = 1 - adv.measure_all_escape_mean(p)
    T = 600
    detected = sum(
        demo_events(["--seed", str(seed), "--read"], capsys)[-1]["verdict"] == "ReadDetected" for seed in range(T)
    )
    assert within_sigma(detected / T, want, T)


def test_seal_demo_rotated_pair_fifteen_degrees(capsys):
    for bit in (0, 1):
        events = demo_events(["--seed", "3", "--rule", "rotated-pair", "--angle", "15", "--N", "40",
                              "--Theta", "1e-9", "--bit", str(bit)], capsys)
        seal, read, check = events
        assert seal["layout"]["header"] == "0010" + format(38, "012b") + format(39, "012b") + "1111"
        assert seal["layout"]["payload_positions"] == [38, 39]
        assert sum(map(int, seal["layout"]["payload"])) % 2 == bit
        assert read["decoded"] == bit
        assert check["verdict"] == "Unread"
