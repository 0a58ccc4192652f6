"""Argument grammar, exit codes, report formats, and reproducibility."""

import json
import os

import pytest

from cltlab.cli import (
    EXIT_FAIL,
    EXIT_IO,
    EXIT_OK,
    EXIT_USAGE,
    main,
    parse_args,
    parse_report,
    run,
)


def run_cli(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_clt_verify_example():
    config = parse_args(
        ["clt-verify", "--dist", "rademacher", "--n", "4,16", "--samples", "1e5", "--seed", "7"]
    )
    assert config.subcommand == "clt-verify"
    assert config.params["n"] == [4, 16]
    assert config.params["samples"] == 100_000
    assert config.params["seed"] == 7
    assert str(config.params["dist"]) == "rademacher"


def test_scientific_notation_samples():
    config = parse_args(["moments", "--samples", "1e6"])
    assert config.params["samples"] == 1_000_000


def test_bad_twopoint_parameter_is_usage_error(capsys):
    code, _, err = run_cli(["clt-verify", "--dist", "twopoint:1.5", "--n", "4"], capsys)
    assert code == EXIT_USAGE
    assert "twopoint" in err


def test_missing_dist_names_the_flag(capsys):
    code, _, err = run_cli(["swap-chain"], capsys)
    assert code == EXIT_USAGE
    assert "--dist" in err


def test_unknown_flag_is_usage_error(capsys):
    code, _, err = run_cli(["moments", "--nope", "1"], capsys)
    assert code == EXIT_USAGE


def test_malformed_n_list_is_usage_error(capsys):
    code, _, err = run_cli(["clt-verify", "--dist", "rademacher", "--n", "4,x"], capsys)
    assert code == EXIT_USAGE


def test_seed_env_fallback(monkeypatch):
    monkeypatch.setenv("CLT_LAB_SEED", "99")
    config = parse_args(["moments"])
    assert config.params["seed"] == 99
    monkeypatch.delenv("CLT_LAB_SEED")
    config = parse_args(["moments"])
    assert config.params["seed"] == 0


def test_flag_overrides_env(monkeypatch):
    monkeypatch.setenv("CLT_LAB_SEED", "99")
    config = parse_args(["moments", "--seed", "3"])
    assert config.params["seed"] == 3


# --- runs and exit codes ------------------------------------------------------


def test_swap_chain_run_passes(capsys):
    code, out, _ = run_cli(
        ["swap-chain", "--dist", "rademacher", "--n", "32", "--samples", "20000", "--seed", "1"],
        capsys,
    )
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["verdict"] == "pass"
    body = doc["body"]
    assert len(body["estimates"]) == 33
    assert body["flagged"] == []
    assert doc["header"]["subcommand"] == "swap-chain"
    assert doc["header"]["seed"] == "1"
    assert doc["header"]["version"]


def test_lindeberg_spike_is_informational_success(capsys):
    code, out, _ = run_cli(
        ["lindeberg", "--array", "spike:rademacher", "--n", "10,100", "--delta", "0.5"],
        capsys,
    )
    assert code == EXIT_OK
    parsed = parse_report(out)
    comments = dict(parsed.comments)
    assert comments["decay_0.5"] == "non-vanishing"
    assert comments["verdict"] == "informational"


def test_lindeberg_iid_vanishing_verdict(capsys):
    code, out, _ = run_cli(
        ["lindeberg", "--array", "iid:rademacher", "--n", "50,200", "--delta", "0.1",
         "--format", "json"],
        capsys,
    )
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["body"]["decay"]["0.1"] == "vanishing"
    tails = [r["tail_sum"] for r in doc["body"]["rows"]]
    assert tails == [1.0, 0.0]


def test_output_to_missing_directory_is_io_error(tmp_path, capsys):
    missing = tmp_path / "no" / "such" / "dir" / "out.json"
    code, _, err = run_cli(["moments", "--samples", "1e4", "--out", str(missing)], capsys)
    assert code == EXIT_IO
    assert str(missing) in err


def test_unreadable_custom_array_is_io_error(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    code, _, err = run_cli(["lindeberg", "--array", f"custom:{missing}"], capsys)
    assert code == EXIT_IO


def test_custom_array_file(tmp_path, capsys):
    path = tmp_path / "row.json"
    path.write_text(
        json.dumps(
            [
                {"kind": "rademacher", "scale": 0.5},
                {"kind": "normal", "param": 0.75},
            ]
        )
    )
    code, out, _ = run_cli(
        ["lindeberg", "--array", f"custom:{path}", "--format", "json"], capsys
    )
    assert code == EXIT_OK
    doc = json.loads(out)
    assert len(doc["body"]["rows"]) == 2  # one per delta on the default grid


def test_invalid_custom_array_is_usage_error(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps([{"kind": "rademacher", "scale": 0.9}]))
    code, _, err = run_cli(["lindeberg", "--array", f"custom:{path}"], capsys)
    assert code == EXIT_USAGE
    assert "sum to 1" in err


def test_moments_pass(capsys):
    code, out, _ = run_cli(["moments", "--samples", "1e5", "--seed", "4"], capsys)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["verdict"] == "pass"
    assert abs(doc["body"]["second_moment"]["mean"] - 1.0) < 0.05
    assert abs(doc["body"]["fourth_moment"]["mean"] - 3.0) < 0.3


def test_phi_table(capsys):
    code, out, _ = run_cli(["phi", "--t-range", "0,1,2", "--format", "csv"], capsys)
    assert code == EXIT_OK
    parsed = parse_report(out)
    assert parsed.columns == ("t", "density", "cdf")
    assert parsed.rows[0][0] == "0.0"
    assert float(parsed.rows[0][2]) == 0.5


def test_transition_table_columns(capsys):
    code, out, _ = run_cli(["transition", "--x", "0", "--eta", "0.5"], capsys)
    assert code == EXIT_OK
    parsed = parse_report(out)
    assert parsed.columns == ("t", "f", "d1", "d2", "d3")
    comments = dict(parsed.comments)
    assert float(comments["sup_f1"]) == pytest.approx(4.375)


def test_clt_verify_oracle_column_and_verdict(capsys):
    code, out, _ = run_cli(
        ["clt-verify", "--dist", "rademacher", "--n", "4,16", "--samples", "50000",
         "--seed", "2"],
        capsys,
    )
    assert code == EXIT_OK
    parsed = parse_report(out)
    assert parsed.columns == ("n", "ks", "n_samples", "seed", "exact_ks")
    assert parsed.rows[0][4] != ""
    assert dict(parsed.comments)["verdict"] == "pass"


def test_clt_verify_blank_oracle_for_scaled_dist(capsys):
    code, out, _ = run_cli(
        ["clt-verify", "--dist", "normal:1", "--n", "4", "--samples", "20000"], capsys
    )
    assert code == EXIT_OK
    parsed = parse_report(out)
    assert parsed.rows[0][4] == ""
    assert dict(parsed.comments)["verdict"] == "informational"


def test_clt_verify_array_family(capsys):
    code, out, _ = run_cli(
        ["clt-verify", "--array", "spike:rademacher", "--n", "100", "--samples", "20000"],
        capsys,
    )
    assert code == EXIT_OK
    parsed = parse_report(out)
    assert parsed.rows[0][4] == ""


# --- reproducibility and round trips -------------------------------------------


IDENTICAL_ARGS = [
    ["swap-chain", "--dist", "uniform", "--n", "8", "--samples", "30000", "--seed", "5"],
    ["clt-verify", "--dist", "rademacher", "--n", "4,9", "--samples", "30000", "--seed", "5"],
    ["moments", "--samples", "3e4", "--seed", "5"],
    ["lindeberg", "--array", "iid:uniform", "--n", "10,100", "--delta", "0.5,0.1"],
]


@pytest.mark.parametrize("argv", IDENTICAL_ARGS, ids=lambda a: a[0])
def test_reports_byte_identical_across_reruns_and_workers(argv, capsys):
    outputs = []
    for workers in ("1", "8", "1"):
        code, out, _ = run_cli(argv + ["--workers", workers], capsys)
        assert code == EXIT_OK
        outputs.append(out)
    assert outputs[0] == outputs[1] == outputs[2]


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_emit_parse_emit_identity(fmt, capsys):
    argv = [
        "swap-chain", "--dist", "rademacher", "--n", "4", "--samples", "5000",
        "--seed", "9", "--format", fmt,
    ]
    code, out, _ = run_cli(argv, capsys)
    assert code == EXIT_OK
    assert parse_report(out).to_text() == out


def test_out_file_matches_stdout(tmp_path, capsys):
    # ranges starting with a negative number use the --flag=value form
    argv = ["phi", "--t-range=-1,1,5", "--format", "csv"]
    code, out, _ = run_cli(argv, capsys)
    path = tmp_path / "phi.csv"
    code2, _, _ = run_cli(argv + ["--out", str(path)], capsys)
    assert code == code2 == EXIT_OK
    assert path.read_text() == out
