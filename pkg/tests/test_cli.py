import csv
import json
from pathlib import Path

import pytest

from polybubble import cli

ROOT = Path(__file__).resolve().parents[1]
QUICK = str(ROOT / "configs" / "quick.ini")


def _write(tmp_path, text):
    p = tmp_path / "c.ini"
    p.write_text(text)
    return str(p)


def test_invalid_config_exits_2_without_output(tmp_path, capsys):
    cfgp = _write(tmp_path, "[space]\nN = 6\nm = 2\n")
    out = tmp_path / "out"
    assert cli.main(["integrals", "--config", cfgp, "--out", str(out)]) == cli.EXIT_CONFIG
    assert not out.exists()
    assert "N" in capsys.readouterr().err


@pytest.mark.parametrize("text,needle", [
    ("[bogus]\nx = 1\n", "unknown config sections"),
    ("[regime]\ncase = Case4\n", "unknown case"),
    ("[sweep]\nerror_k = 2 3\n", "error_k"),
    ("[potential]\nmodel = table\n", "builtin"),
    ("[quadrature]\nqmc_log2_n = 40\n", "qmc_log2_n"),
    ("[potential]\nc = 0.9\nb = 0.5\n", "nonnegative"),
    ("[space]\nN = six\n", "bad value"),
])
def test_config_errors_name_the_constraint(tmp_path, text, needle):
    with pytest.raises(cli.ConfigError, match=needle):
        cli.load_config(_write(tmp_path, text))


def test_missing_config_file():
    with pytest.raises(cli.ConfigError):
        cli.load_config("/nonexistent/polybubble.ini")


def test_bad_seed_and_threads(tmp_path):
    out = str(tmp_path / "o")
    assert cli.main(["lattice", "--seed", "-1", "--out", out]) == cli.EXIT_CONFIG
    assert cli.main(["lattice", "--threads", "0", "--out", out]) == cli.EXIT_CONFIG


def test_defaults_load_and_digest_is_stable():
    a, b = cli.load_config(None), cli.load_config(None)
    assert a.digest == b.digest and len(a.digest) == 64
    assert cli.load_config(QUICK).digest != a.digest


def test_integrals_outputs(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["integrals", "--config", QUICK, "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "integrals.csv").open()))
    claims = {r["claim"] for r in rows}
    assert {"moment-closed-form", "moment-odd-vanishes", "moment-zero"} <= claims
    rep = json.loads((out / "integrals.json").read_text())
    assert rep["schema_version"] == cli.SCHEMA_VERSION and rep["seed"] == 0
    assert all(c["passed"] for c in rep["checks"])
    man = (out / "manifest.txt").read_text()
    for key in ("tool: polybubble", "config_sha256: ", "seed: 0", "timestamp: ", "file: integrals.csv"):
        assert key in man


def test_balance_columns(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["balance", "--config", QUICK, "--out", str(out)]) == 0
    header = (out / "balance.csv").read_text().splitlines()[0].split(",")
    for col in ("k", "t_k", "lam_k", "slope_to_date"):
        assert col in header


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert cli.main(["lattice", "--config", QUICK]) == 0
    assert (tmp_path / "env" / "lattice.csv").exists()


def test_failed_runner_is_reported(tmp_path, monkeypatch):
    def boom(cfg, seed):
        raise RuntimeError("nope")
    monkeypatch.setitem(cli.RUNNERS, "lattice", boom)
    out = tmp_path / "o"
    assert cli.main(["lattice", "--config", QUICK, "--out", str(out)]) == 1
    rep = json.loads((out / "lattice.json").read_text())
    assert rep["checks"][0]["claim"] == "run" and not rep["checks"][0]["passed"]


def test_seeded_runs_repeat_across_thread_counts(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["all", "--config", QUICK, "--out", str(a), "--seed", "11"]) == 0
    assert cli.main(["all", "--config", QUICK, "--out", str(b), "--seed", "11", "--threads", "3"]) == 0
    for name in cli.SUBCOMMANDS:
        assert (a / f"{name}.csv").read_bytes() == (b / f"{name}.csv").read_bytes()
