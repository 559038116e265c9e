import json
from pathlib import Path

import pytest

from goiqc.cli import main

PROGRAMS = Path(__file__).resolve().parent.parent / "demos" / "programs"


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_prints_the_type(capsys):
    code, out, _ = _run(capsys, "check", PROGRAMS / "coin.lq")
    assert code == 0 and "bit" in out


def test_missing_file_is_a_user_error(capsys, tmp_path):
    code, _, err = _run(capsys, "check", tmp_path / "nope.lq")
    assert code == 1 and err


def test_syntax_errors_are_user_errors(capsys, tmp_path):
    bad = tmp_path / "bad.lq"
    bad.write_text("(\\x. ")
    assert _run(capsys, "check", bad)[0] == 1


def test_unknown_flags_are_user_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["compile", "--nonsense"])
    assert exc.value.code == 1


def test_analyze_reports_the_deadlock(capsys):
    code, out, _ = _run(capsys, "analyze", PROGRAMS / "ruw.lq")
    assert code == 0
    assert "digraph" in out and "synchronous: DEADLOCK" in out and "cycle: 1 -> 2 -> 1" in out


def test_analyze_json(capsys):
    code, out, _ = _run(capsys, "analyze", PROGRAMS / "bell.lq", "--format", "json")
    assert code == 0 and json.loads(out)["cycle"] is None


def test_sync_only_compilation_of_a_deadlocking_term_fails(capsys):
    code, _, err = _run(capsys, "compile", PROGRAMS / "ruw.lq", "--mode", "sync-only")
    assert code == 1 and "deadlock" in err.lower()


def test_compile_then_simulate(capsys, tmp_path):
    code, out, _ = _run(capsys, "compile", PROGRAMS / "coin.lq")
    assert code == 0
    qc = tmp_path / "coin.qc"
    qc.write_text(out)
    code, out, _ = _run(capsys, "simulate", qc, "--format", "json")
    assert code == 0
    probs = {b["bits"]["l1"]: b["probability"] for b in json.loads(out)["blocks"]}
    assert abs(probs[0] - 0.5) <= 1e-9 and abs(probs[1] - 0.5) <= 1e-9


def test_trace_goes_to_stderr_as_json_lines(capsys):
    code, _, err = _run(capsys, "compile", PROGRAMS / "bell.lq", "--trace")
    lines = [json.loads(x) for x in err.splitlines() if x.strip()]
    assert code == 0 and lines


@pytest.mark.parametrize("name", ["bell", "coin", "ruw", "pq", "teleport_free"])
def test_verify_programs(capsys, name):
    code, out, _ = _run(capsys, "verify", PROGRAMS / f"{name}.lq", "--eliminate-ite", "--format", "json")
    assert code == 0
    assert json.loads(out)["verification"]["ok"]


def test_verify_directory(capsys):
    code, _, _ = _run(capsys, "verify", "--dir", PROGRAMS)
    assert code == 0


def test_reports_are_deterministic(capsys):
    args = ("verify", PROGRAMS / "pq.lq", "--format", "json")
    first = _run(capsys, *args)[1]
    assert first == _run(capsys, *args)[1]
    assert "timings" not in json.loads(first)
