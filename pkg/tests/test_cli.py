"""Command-line front end: exit codes, outputs, written files."""

import csv
import json

import pytest

from rolecrypt.cli import main
from rolecrypt.workload import load_dataset


def test_no_arguments_is_a_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_cost_table_default_profiles(capsys):
    assert main(["cost-table"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 10  # header plus nine operation rows
    assert out[0].split()[:2] == ["party", "op"]
    by_key = {tuple(line.split()[:2]): line.split()[2:] for line in out[1:]}
    assert by_key[("invoker", "assignU")] == ["41", "63.5", "103.5"]
    assert by_key[("monitor", "write")] == ["38", "54", "54"]


def test_cost_table_all_profiles(capsys):
    assert main(["cost-table", "--profiles", "all"]) == 0
    header = capsys.readouterr().out.splitlines()[0].split()
    assert len(header) == 2 + 40


def test_cost_table_unknown_profile(capsys):
    assert main(["cost-table", "--profiles", "BF+NOPE"]) == 2
    assert "unknown scheme profile" in capsys.readouterr().err


def test_check_passes(capsys):
    assert main(["check", "--traces", "4", "--labels", "20", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "ok" in out and "4 traces" in out and "2 variant(s)" in out


def test_check_options(capsys):
    rc = main([
        "check", "--traces", "2", "--labels", "12",
        "--variant", "ibe", "--no-costs", "--step-congruence",
    ])
    assert rc == 0


def test_gen_dataset_writes_file(tmp_path, capsys):
    out = tmp_path / "hc.json"
    assert main(["gen-dataset", "--name", "healthcare", "--seed", "2",
                 "--out", str(out)]) == 0
    ds = load_dataset(str(out))
    assert ds.name == "healthcare"
    assert len(ds.users) == 46 and len(ds.roles) == 13 and len(ds.perms) == 46
    assert len(ds.ur) == 55 and len(ds.pa) == 359
    assert "wrote" in capsys.readouterr().out


def test_gen_dataset_unknown_name():
    with pytest.raises(SystemExit) as exc:
        main(["gen-dataset", "--name", "mystery"])
    assert "unknown dataset" in str(exc.value)


def test_gen_dataset_is_seed_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["gen-dataset", "--name", "healthcare", "--seed", "9", "--out", str(a)])
    main(["gen-dataset", "--name", "healthcare", "--seed", "9", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_simulate_bundled_dataset(tmp_path, capsys):
    rc = main([
        "simulate", "--dataset", "healthcare", "--runs", "2",
        "--seed", "3", "--out", str(tmp_path),
    ])
    assert rc == 0
    rows = list(csv.DictReader((tmp_path / "runs.csv").open()))
    assert len(rows) == 2
    assert {r["variant"] for r in rows} == {"ibe"}
    assert (tmp_path / "summary.csv").exists()
    out = capsys.readouterr().out
    assert "healthcare [ibe]" in out and "runs.csv" in out


def test_simulate_both_variants_with_events(tmp_path):
    rc = main([
        "simulate", "--dataset", "healthcare", "--runs", "1", "--seed", "5",
        "--variant", "both", "--events", "--duration-days", "20",
        "--out", str(tmp_path),
    ])
    assert rc == 0
    rows = list(csv.DictReader((tmp_path / "runs.csv").open()))
    assert [r["variant"] for r in rows] == ["ibe", "pki"]
    # identical seeds: both variants saw the same arrival sequence
    assert rows[0]["arrivals"] == rows[1]["arrivals"]
    assert rows[0]["ibe_enc"] == rows[1]["ibe_enc"]  # neutral-named counters
    events = list(csv.DictReader((tmp_path / "events.csv").open()))
    assert events and {e["variant"] for e in events} == {"ibe", "pki"}


def test_simulate_dataset_file_and_check_costs(tmp_path):
    path = tmp_path / "ds.json"
    ds = {
        "name": "micro",
        "users": ["u1", "u2", "u3"],
        "roles": ["r1", "r2"],
        "perms": ["p1", "p2"],
        "ur": [["u1", "r1"], ["u2", "r2"]],
        "pa": [["r1", "p1"], ["r2", "p2"]],
    }
    path.write_text(json.dumps(ds))
    rc = main([
        "simulate", "--dataset", str(path), "--runs", "3", "--seed", "1",
        "--duration-days", "60", "--check-costs", "--revocation-window", "7",
        "--out", str(tmp_path),
    ])
    assert rc == 0
    rows = list(csv.DictReader((tmp_path / "runs.csv").open()))
    assert len(rows) == 3 and rows[0]["dataset"] == "micro"
    assert "max_revocations_per_window" in rows[0]


def test_simulate_unknown_dataset(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--dataset", "atlantis", "--out", str(tmp_path)])
    assert "neither a file nor a known dataset" in str(exc.value)
