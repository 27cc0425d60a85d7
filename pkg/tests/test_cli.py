import json

import pytest

from heatlab.baseline import MissingBaseline, compare_baseline, freeze_baseline, load_baseline
from heatlab.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, EXIT_RESOURCE, load_config, main

SMALL_MAXREG = """\
[block_decay]
trials = 3
[t_independence]
cases = 2
M = 64
persistent_cases = 1
"""


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_lp_verify_passes_and_writes_bundle(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["lp-verify", "--out", str(out)]) == EXIT_OK
    assert "pass" in capsys.readouterr().out
    assert (out / "criterion_01" / "partition.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert {"subcommand", "config_hash", "seed", "versions", "wall_time"} <= set(manifest)
    summary = json.loads((out / "summary.json").read_text())
    claims = summary["results"][0]["claims"]
    assert all({"tol", "passed"} <= set(c) for c in claims)


def test_csv_bodies_replay_byte_identically(tmp_path):
    cfg = write(tmp_path, SMALL_MAXREG)
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        # freezing skips the drift check, which a reduced suite would fail against the packaged baseline
        args = ["maxreg", "--config", str(cfg), "--seed", "7", "--out", str(out), "--freeze", str(out / "b.json")]
        assert main(args) == EXIT_OK
    files = sorted(p.relative_to(a) for p in a.rglob("*.csv"))
    assert files
    for rel in files:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel
        assert b"\r" not in (a / rel).read_bytes()


def test_broken_cutoff_is_numeric_failure(tmp_path):
    cfg = write(tmp_path, "[partition_of_unity]\noffset = 0.01\n")
    assert main(["lp-verify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_NUMERIC


@pytest.mark.parametrize("text,needle", [
    ("[partition_of_unity]\noffset = abc\n", ":2: [partition_of_unity] offset"),
    ("[partition_of_unity]\ncolour = 1\n", "unknown field 'colour'"),
    ("[nowhere]\nx = 1\n", "unknown section [nowhere]"),
    ("offset = 0.01\n", "File contains no section headers"),
])
def test_malformed_config_exits_2_with_diagnostics(tmp_path, capsys, text, needle):
    cfg = write(tmp_path, text)
    assert main(["lp-verify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert needle in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["lp-verify", "--config", str(tmp_path / "absent.ini")]) == EXIT_CONFIG


def test_config_values_are_typed(tmp_path):
    cfg = load_config(write(tmp_path, "[run]\nseed = 0x10\njobs = 2  # workers\n[halfspace]\nM = 128\n"))
    assert cfg == {"run": {"seed": 16, "jobs": 2}, "halfspace": {"M": 128}}


def test_unknown_subcommand_prints_usage(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve-everything"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_bad_seed(tmp_path):
    assert main(["absorb", "--seed", "-1", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_missing_baseline_is_instructive(tmp_path, capsys):
    path = tmp_path / "none.json"
    assert main(["absorb", "--baseline", str(path), "--out", str(tmp_path / "o")]) == EXIT_NUMERIC
    assert "--freeze" in capsys.readouterr().err
    with pytest.raises(MissingBaseline, match="run a suite"):
        load_baseline(path)


def test_freeze_then_compare_has_zero_drift(tmp_path):
    suites = {"demo": {"c": 0.31, "C": 1.2}}
    path = tmp_path / "b.json"
    freeze_baseline(suites, path)
    freeze_baseline({"other": {"x": 1.0}}, path)
    base = load_baseline(path)
    assert set(base) == {"demo", "other"}
    rep = compare_baseline("demo", suites["demo"], base)
    assert rep.ok and rep.max_drift == 0
    moved = compare_baseline("demo", {"c": 0.31 * 1.03, "C": 1.2}, base)
    assert moved.ok and 0 < moved.max_drift < 0.05
    assert not compare_baseline("demo", {"c": 0.31 * 1.2, "C": 1.2}, base).ok
    with pytest.raises(MissingBaseline):
        compare_baseline("absent", {}, base)


def test_cli_freeze_compare_round_trip(tmp_path):
    cfg = write(tmp_path, SMALL_MAXREG)
    base = tmp_path / "frozen.json"
    args = ["maxreg", "--config", str(cfg)]
    assert main(args + ["--out", str(tmp_path / "a"), "--freeze", str(base)]) == EXIT_OK
    assert {"block_decay", "maxreg_sweep"} <= set(load_baseline(base))
    assert main(args + ["--out", str(tmp_path / "b"), "--baseline", str(base)]) == EXIT_OK
    drift = (tmp_path / "b" / "criterion_02" / "block_decay_drift.csv").read_text().splitlines()
    assert drift[0].startswith("suite,key") and all(row.split(",")[4] == "0.0" for row in drift[1:])


def test_threshold_certificate_and_budget(tmp_path, capsys):
    cfg = write(tmp_path, "[threshold]\nnonlinearity = square\ntransport = zero\nshape = constant\n")
    assert main(["threshold", "--config", str(cfg), "--out", str(tmp_path / "a")]) == EXIT_OK
    assert "no positive threshold" in json.loads((tmp_path / "a" / "threshold.json").read_text())["note"]
    cfg = write(tmp_path, "[threshold]\nbudget = 2\nT = 10.0\nM = 32\n", "small.ini")
    assert main(["threshold", "--config", str(cfg), "--out", str(tmp_path / "b")]) == EXIT_RESOURCE
    probes = (tmp_path / "b" / "threshold_probes.csv").read_text().splitlines()
    assert probes[0] == "amplitude,success" and len(probes) == 3


def test_threshold_rejects_unknown_family(tmp_path):
    cfg = write(tmp_path, "[threshold]\nnonlinearity = cubic\n")
    assert main(["threshold", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
