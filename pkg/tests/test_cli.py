"""The nt command line: check, eval, grad, zoo."""

import subprocess
import sys
from pathlib import Path

from ntensor import NamedTensor
from ntensor.cli import main

CORPUS = Path(__file__).parent / "corpus"
MATRIX = str(CORPUS / "valid" / "matrix_basics.nt")


def test_check_valid_exits_zero(capsys):
    assert main(["check", MATRIX]) == 0
    captured = capsys.readouterr()
    assert captured.err == ""


def test_check_invalid_exits_nonzero_with_diagnostics(capsys):
    bad = str(CORPUS / "invalid" / "inv01_add_mismatch.nt")
    assert main(["check", bad]) == 1
    captured = capsys.readouterr()
    assert captured.err.startswith("5:7: error:")


def test_check_reports_parse_errors(tmp_path, capsys):
    source = tmp_path / "broken.nt"
    source.write_text("C = dot{}(A\n")
    assert main(["check", str(source)]) == 1
    captured = capsys.readouterr()
    assert "error:" in captured.err
    assert captured.err.split(":")[0].isdigit()


def test_eval_outputs_tensor_text(capsys):
    assert main(["eval", MATRIX]) == 0
    out = capsys.readouterr().out
    assert "# SumH\nshape: width=3\n6 12 18\n" in out
    assert "# Dot\nshape: height=3\n11 30 31\n" in out
    assert "# Flat\nshape: layer=9\n3 1 4 1 5 9 2 6 5\n" in out


def test_eval_byte_identical_across_runs(capsys):
    main(["eval", MATRIX])
    first = capsys.readouterr().out
    main(["eval", MATRIX])
    second = capsys.readouterr().out
    assert first == second


def test_eval_seed_changes_random_literals(capsys):
    program = str(CORPUS / "valid" / "feedforward.nt")
    main(["eval", program, "--seed", "1"])
    one = capsys.readouterr().out
    main(["eval", program, "--seed", "1"])
    one_again = capsys.readouterr().out
    main(["eval", program, "--seed", "2"])
    two = capsys.readouterr().out
    assert one == one_again
    assert one != two


def test_grad_prints_tensor(capsys):
    program = str(CORPUS / "valid" / "softmax_grad.nt")
    assert main(["grad", program, "--of", "Loss", "--wrt", "X"]) == 0
    out = capsys.readouterr().out
    tensor = NamedTensor.from_text(out)
    assert tensor.shape.names == ("ax",)


def test_grad_uses_grad_directive_for_default_target(capsys):
    program = str(CORPUS / "valid" / "softmax_grad.nt")
    assert main(["grad", program, "--wrt", "X"]) == 0
    default_out = capsys.readouterr().out
    main(["grad", program, "--of", "Loss", "--wrt", "X"])
    explicit_out = capsys.readouterr().out
    assert default_out == explicit_out


def test_grad_error_for_non_literal_wrt(capsys):
    program = str(CORPUS / "valid" / "softmax_grad.nt")
    assert main(["grad", program, "--of", "Loss", "--wrt", "Y"]) == 1
    assert "literal" in capsys.readouterr().err


def test_zoo_list_and_run(capsys):
    assert main(["zoo", "list"]) == 0
    names = capsys.readouterr().out.split()
    assert "attention" in names and "transformer" in names and "sudoku" in names
    assert main(["zoo", "run", "attention", "--seed", "3"]) == 0
    out = capsys.readouterr().out
    assert "max deviation" in out
    assert main(["zoo", "run", "nonexistent"]) == 1


def test_missing_file(capsys):
    assert main(["check", "no_such_file.nt"]) == 1
    assert "error" in capsys.readouterr().err


def test_installed_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "ntensor.cli", "eval", MATRIX],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "# Total\nshape:\n36\n" in proc.stdout
