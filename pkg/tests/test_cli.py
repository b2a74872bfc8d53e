"""Command line interface: exit codes, determinism, file outputs."""

import importlib.resources
import json
import math
import subprocess
import sys
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from kws import KeywordSpec, LatticeData, save_lattice
from kws.cli import main

GEN_FLAGS = [
    "--keywords", "alpha", "bravo",
    "--n-pos", "1",
    "--n-neg", "2",
    "--frames-min", "24",
    "--frames-max", "30",
    "--duration-min", "2",
    "--duration-max", "3",
    "--epsilon", "0.0",
    "--epsilon", "0.5",
    "--d-max", "3",
]


def load_schema(name):
    return json.loads(importlib.resources.files("kws").joinpath(f"schemas/{name}").read_text())


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()
    }


@pytest.fixture(scope="module")
def base_suite(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli") / "suite"
    assert main(["gen", "--out", str(root), *GEN_FLAGS, "--seed", "7"]) == 0
    return root


@pytest.fixture(scope="module")
def ones_suite(tmp_path_factory):
    # All segment durations are 1, so a TDT decode cannot skip anything.
    root = tmp_path_factory.mktemp("cli-ones") / "suite"
    argv = [
        "gen", "--out", str(root),
        "--keywords", "alpha",
        "--n-pos", "1", "--n-neg", "1",
        "--frames-min", "12", "--frames-max", "16",
        "--duration-min", "1", "--duration-max", "1",
        "--epsilon", "0.3", "--d-max", "2", "--seed", "3",
    ]
    assert main(argv) == 0
    return root


def test_gen_is_deterministic(base_suite, tmp_path):
    again = tmp_path / "again"
    assert main(["gen", "--out", str(again), *GEN_FLAGS, "--seed", "7"]) == 0
    assert tree_bytes(again) == tree_bytes(base_suite)


def test_kws_seed_env_fallback(base_suite, tmp_path, monkeypatch):
    monkeypatch.setenv("KWS_SEED", "7")
    from_env = tmp_path / "from-env"
    assert main(["gen", "--out", str(from_env), *GEN_FLAGS]) == 0
    assert tree_bytes(from_env) == tree_bytes(base_suite)

    monkeypatch.setenv("KWS_SEED", "not-a-number")
    assert main(["gen", "--out", str(tmp_path / "junk"), *GEN_FLAGS]) == 1


def test_decode_writes_valid_scorestream_jsonl(base_suite, tmp_path):
    out = tmp_path / "scores.jsonl"
    assert main(["decode", "--suite", str(base_suite), "--out", str(out)]) == 0
    schema = load_schema("scorestream.schema.json")
    records = [json.loads(line) for line in out.read_text().splitlines()]
    assert len(records) == 8  # (2 keywords x 1 pos + 2 neg) x 2 epsilons
    for record in records:
        jsonschema.validate(record, schema)
    assert [r["utt_id"] for r in records] == sorted(r["utt_id"] for r in records)


def test_decode_stdout_default(base_suite, capsys):
    assert main(["decode", "--suite", str(base_suite)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 8
    json.loads(lines[0])


def test_decode_jobs_do_not_change_output(base_suite, tmp_path):
    serial = tmp_path / "serial.jsonl"
    parallel = tmp_path / "parallel.jsonl"
    assert main(["decode", "--suite", str(base_suite), "--out", str(serial)]) == 0
    assert main(["decode", "--suite", str(base_suite), "--jobs", "3", "--out", str(parallel)]) == 0
    assert serial.read_bytes() == parallel.read_bytes()


def test_tdt_equals_rnnt_on_all_ones_durations(ones_suite, tmp_path):
    rnnt_out = tmp_path / "rnnt.jsonl"
    tdt_out = tmp_path / "tdt.jsonl"
    assert main(["decode", "--suite", str(ones_suite), "--mode", "rnnt", "--out", str(rnnt_out)]) == 0
    assert (
        main(
            [
                "decode", "--suite", str(ones_suite),
                "--mode", "tdt", "--d-max", "2",
                "--out", str(tdt_out),
            ]
        )
        == 0
    )
    assert rnnt_out.read_bytes() == tdt_out.read_bytes()


def test_tdt_on_suite_without_duration_track_fails(tmp_path):
    root = tmp_path / "no-durations"
    argv = [
        "gen", "--out", str(root),
        "--keywords", "alpha",
        "--n-pos", "1", "--n-neg", "1",
        "--frames-min", "12", "--frames-max", "14",
        "--duration-min", "2", "--duration-max", "3",
        "--d-max", "0", "--seed", "1",
    ]
    assert main(argv) == 0
    assert main(["decode", "--suite", str(root), "--mode", "tdt", "--d-max", "2"]) == 1


def test_threshold_prob_is_an_alias_for_threshold_log(base_suite, tmp_path):
    via_prob = tmp_path / "prob.jsonl"
    via_log = tmp_path / "log.jsonl"
    args = ["decode", "--suite", str(base_suite)]
    assert main([*args, "--threshold-prob", "0.5", "--out", str(via_prob)]) == 0
    assert main([*args, "--threshold-log", str(math.log(0.5)), "--out", str(via_log)]) == 0
    assert via_prob.read_bytes() == via_log.read_bytes()

    assert main([*args, "--threshold-prob", "0.0"]) == 1
    assert main([*args, "--threshold-prob", "0.5", "--threshold-log", "-1.0"]) == 1


def test_dump_delta_hand_traced(tmp_path):
    # Constant emissions: y = 0.6, phi = (0.4, 0.5). The best path into u=1 is
    # always the fresh vertical step, so delta(t,1) = log 0.6 on every row.
    log_y = np.log(np.full((3, 1), 0.6, dtype=np.float32))
    log_phi = np.log(np.tile(np.float32([0.4, 0.5]), (3, 1)))
    path = tmp_path / "tiny.kwl"
    save_lattice(LatticeData(KeywordSpec("kw", (4,)), 0.03, log_y, log_phi), path)

    out = tmp_path / "delta.csv"
    assert main(["dump-delta", "--lattice", str(path), "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "t,u0,u1"
    assert len(lines) == 4
    for t, line in enumerate(lines[1:], start=1):
        cells = line.split(",")
        assert cells[0] == str(t)
        assert float(cells[1]) == 0.0
        assert float(cells[2]) == pytest.approx(math.log(0.6), abs=1e-6)


def test_dump_delta_source_flags(base_suite, tmp_path, capsys):
    utt_id = json.loads((base_suite / "manifest.json").read_text())["utterances"][0]["utt_id"]
    assert main(["dump-delta", "--suite", str(base_suite), "--utt", utt_id]) == 0
    header = capsys.readouterr().out.splitlines()[0]
    assert header.startswith("t,u0,")

    lattice = str(base_suite / "lattices" / f"{utt_id}.kwl")
    assert main(["dump-delta", "--lattice", lattice, "--suite", str(base_suite)]) == 1
    assert main(["dump-delta", "--suite", str(base_suite)]) == 1
    assert main(["dump-delta", "--lattice", str(tmp_path / "missing.kwl")]) == 2


def test_truncated_lattice_exits_2(base_suite, tmp_path):
    source = next((base_suite / "lattices").glob("*.kwl"))
    clipped = tmp_path / source.name
    clipped.write_bytes(source.read_bytes()[:-7])
    (tmp_path / source.with_suffix(".json").name).write_bytes(
        source.with_suffix(".json").read_bytes()
    )
    assert main(["dump-delta", "--lattice", str(clipped)]) == 2


def test_missing_suite_exits_2(tmp_path):
    assert main(["decode", "--suite", str(tmp_path / "nope")]) == 2


def test_oracle_check_exit_contract(capsys):
    argv = ["oracle-check", "--cases", "5", "--t-max", "6", "--u-max", "3", "--seed", "2"]
    assert main(argv) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["cases"] == 5
    assert result["max_abs_deviation"] <= 1e-9

    assert main([*argv, "--tolerance", "-1.0"]) == 1


def test_bench_report_and_exit_codes(base_suite, tmp_path, capsys):
    report_path = tmp_path / "report.json"
    argv = [
        "bench", "--suite", str(base_suite),
        "--baseline", "rnnt", "--candidate", "tdt", "--d-max", "3",
        "--report", str(report_path),
        "--also-asr-baselines", "--beam-width", "3",
    ]
    assert main(argv) == 0
    table = capsys.readouterr().out
    assert "macro-recall" in table
    report = json.loads(report_path.read_text())
    jsonschema.validate(report, load_schema("report.schema.json"))
    assert report["schema"] == "kws-bench-report@1"
    assert {g["epsilon"] for g in report["groups"]} == {0.0, 0.5}

    assert main(["bench", "--suite", str(base_suite), "--target-far", "-1"]) == 1


def test_module_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "kws.cli", "oracle-check", "--cases", "2", "--t-max", "5", "--u-max", "2"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["cases"] == 2
