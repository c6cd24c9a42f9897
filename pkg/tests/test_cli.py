"""Command line behavior: exit codes, artifacts, determinism."""

from __future__ import annotations

import json
import subprocess
import sys

from evmcfg.cli import EXIT_ERROR, EXIT_OK, EXIT_UNSOUND, RunConfig, main, run

from conftest import BRANCH_HEX, LINEAR_HEX, SHARED_HEX


def run_main(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_blocks_listing(capsys):
    code, out, err = run_main(capsys, "--hex", LINEAR_HEX, "--blocks")
    assert code == EXIT_OK
    assert err == ""
    assert out.splitlines() == [
        "block 0x00..0x02  [jump]  PUSH1 0x03; JUMP",
        "block 0x03..0x04  [end]  JUMPDEST; STOP",
    ]


def test_blocks_listing_reports_filler(capsys):
    code, out, _ = run_main(capsys, "--hex", SHARED_HEX, "--blocks")
    assert code == EXIT_OK
    assert out.splitlines()[-1] == "unreached: 0xd, 0xe, 0xf"


def test_check_pass(capsys):
    code, out, err = run_main(capsys, "--hex", SHARED_HEX, "--check")
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["verdict"] == "pass"
    assert report["vertices"] == 5
    assert report["jumps_to"]["coverage"]["states"] == 13
    assert report["walk"]["verdict"] == "pass"
    assert err == ""


def test_artifacts_written(tmp_path, capsys):
    dot = tmp_path / "g.dot"
    js = tmp_path / "g.json"
    code, out, _ = run_main(
        capsys, "--hex", BRANCH_HEX, "--dot", str(dot), "--json", str(js)
    )
    assert code == EXIT_OK
    assert out == ""
    assert dot.read_text().startswith("digraph cfg {")
    doc = json.loads(js.read_text())
    assert doc["format_version"] == 1
    assert doc["entry"] == {"block": 0, "id": 1}


def test_file_input(tmp_path, capsys):
    source = tmp_path / "prog.hex"
    source.write_text(LINEAR_HEX + "\n")
    code, out, _ = run_main(capsys, "--file", str(source), "--blocks")
    assert code == EXIT_OK
    assert "block 0x00" in out


def test_missing_file_is_io_error(capsys):
    code, out, err = run_main(capsys, "--file", "/nonexistent/prog.hex", "--blocks")
    assert code == EXIT_ERROR
    assert out == ""
    payload = json.loads(err)
    assert payload["error"]["kind"] == "io_error"


def test_decode_error_reported(capsys):
    code, _, err = run_main(capsys, "--hex", "60xz", "--blocks")
    assert code == EXIT_ERROR
    payload = json.loads(err)
    assert payload["error"]["kind"] == "decode_error"
    assert payload["error"]["offset"] == 2


def test_unresolved_jump_reported(capsys):
    code, _, err = run_main(capsys, "--hex", "600056", "--blocks")
    assert code == EXIT_ERROR
    payload = json.loads(err)
    assert payload["error"]["kind"] == "unresolved_jump"
    assert payload["error"]["pc"] == 2


def test_nothing_requested_is_usage_error(capsys):
    code, _, err = run_main(capsys, "--hex", LINEAR_HEX)
    assert code == EXIT_ERROR
    payload = json.loads(err)
    assert payload["error"]["kind"] == "usage_error"


def test_argparse_usage_errors_remapped(capsys):
    # no input source at all
    assert main([]) == EXIT_ERROR
    capsys.readouterr()
    # unknown flag
    assert main(["--hex", "00", "--frobnicate"]) == EXIT_ERROR
    capsys.readouterr()
    # --hex and --file together
    assert main(["--hex", "00", "--file", "x", "--blocks"]) == EXIT_ERROR
    capsys.readouterr()


def test_truncated_check_is_unsound_exit(capsys):
    code, out, _ = run_main(
        capsys, "--hex", SHARED_HEX, "--check", "--max-steps", "2"
    )
    assert code == EXIT_UNSOUND
    report = json.loads(out)
    assert report["verdict"] == "inconclusive"
    assert report["jumps_to"]["coverage"]["truncated"] is True


def test_cycle_is_inconclusive(capsys):
    code, out, _ = run_main(capsys, "--hex", "5b600056", "--check")
    assert code == EXIT_UNSOUND
    assert json.loads(out)["verdict"] == "inconclusive"


def test_truncated_push_diagnostic_on_stderr(capsys):
    code, _, err = run_main(capsys, "--hex", "60", "--blocks")
    assert code == EXIT_OK
    assert err.startswith("note:")


def test_verbose_solver_trace(capsys):
    code, _, err = run_main(capsys, "--hex", LINEAR_HEX, "--blocks", "-v")
    assert code == EXIT_OK
    assert "grow" in err


def test_solver_choice_matches_default_output(tmp_path, capsys):
    paths = []
    for i, solver in enumerate(["worklist", "naive"]):
        dot = tmp_path / f"{i}.dot"
        js = tmp_path / f"{i}.json"
        code, _, _ = run_main(
            capsys,
            "--hex", SHARED_HEX,
            "--solver", solver,
            "--dot", str(dot),
            "--json", str(js),
        )
        assert code == EXIT_OK
        paths.append((dot.read_bytes(), js.read_bytes()))
    assert paths[0] == paths[1]


def test_repeated_runs_byte_identical(tmp_path, capsys):
    artifacts = []
    for i in range(2):
        js = tmp_path / f"run{i}.json"
        code, _, _ = run_main(capsys, "--hex", SHARED_HEX, "--json", str(js))
        assert code == EXIT_OK
        artifacts.append(js.read_bytes())
    assert artifacts[0] == artifacts[1]


def test_run_config_direct():
    config = RunConfig(hex_text=LINEAR_HEX)
    assert not config.wants_something()
    config = RunConfig(hex_text=LINEAR_HEX, check=True)
    assert config.wants_something()
    assert run(config) == EXIT_OK


def test_subprocess_smoke(tmp_path):
    js = tmp_path / "out.json"
    proc = subprocess.run(
        [sys.executable, "-m", "evmcfg", "--hex", SHARED_HEX, "--check",
         "--json", str(js)],
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert proc.returncode == EXIT_OK, proc.stderr
    assert json.loads(proc.stdout)["verdict"] == "pass"
    assert json.loads(js.read_text())["format_version"] == 1
