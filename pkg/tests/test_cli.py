import subprocess
import sys

import numpy as np
import pytest

from ligocr.alphabet import default_alphabet_text
from ligocr.cli import EXIT_DATA, EXIT_DIVERGED, EXIT_OK, EXIT_USAGE, run
from ligocr.pgm import write_pgm


def files(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    assert run(["gen-dataset", "--styles", "2", "--size", "16", "--max-degree", "2", "--val-fraction", "0.5",
                "--out", str(out), "--deterministic"]) == EXIT_OK
    return out


def test_gen_alphabet(tmp_path, capsys):
    assert run(["gen-alphabet", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "alphabet.txt").read_text() == default_alphabet_text()


def test_gen_dataset_is_byte_identical(tmp_path, corpus_dir):
    assert run(["gen-dataset", "--styles", "2", "--size", "16", "--max-degree", "2", "--val-fraction", "0.5",
                "--out", str(tmp_path), "--deterministic"]) == EXIT_OK
    assert files(tmp_path) == files(corpus_dir)


def test_out_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("LIGOCR_OUT", str(tmp_path / "env"))
    assert run(["gen-alphabet"]) == EXIT_OK
    assert (tmp_path / "env" / "alphabet.txt").exists()


def test_gradcheck_level0(capsys):
    assert run(["gradcheck", "--preset", "level0", "--size", "8"]) == EXIT_OK
    assert float(capsys.readouterr().out.strip()) < 1e-4


@pytest.mark.parametrize("argv", [
    ["train", "--corpus", "nowhere", "--level", "1"],
    ["train", "--corpus", "nowhere", "--hierarchy", "--level", "0"],
    ["train", "--corpus", "nowhere"],
    ["train", "--corpus", "nowhere", "--level", "0", "--desk"],
    ["gen-dataset", "--size", "8"],
    ["gen-dataset", "--val-fraction", "1.5"],
    ["bogus"],
    [],
])
def test_usage_errors(argv, tmp_path, capsys):
    assert run(argv + ["--out", str(tmp_path / "o")] if argv else argv) == EXIT_USAGE
    assert "usage error" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_data_errors(tmp_path, capsys):
    assert run(["train", "--corpus", str(tmp_path / "missing"), "--level", "0", "--out", str(tmp_path)]) == EXIT_DATA
    bad = tmp_path / "bad.txt"
    bad.write_text("name broken\nglyph 0 base 0\n")
    assert run(["gen-dataset", "--alphabet", str(bad), "--out", str(tmp_path / "c")]) == EXIT_DATA
    assert run(["inspect-cc", str(tmp_path / "nope.pgm")]) == EXIT_DATA
    assert "error" in capsys.readouterr().err


def test_inspect_cc_format(tmp_path, capsys):
    r = np.zeros((10, 10), np.uint8)
    r[1:6, 1:6] = 255  # area 25
    r[8, 8] = 255      # area 1, below a tenth of 25
    write_pgm(tmp_path / "a.pgm", r)
    assert run(["inspect-cc", str(tmp_path / "a.pgm")]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "L=2"
    assert lines[1] == "label,area,min_x,min_y,max_x,max_y"
    assert lines[2] == "1,25,1,1,5,5" and lines[3] == "2,1,8,8,8,8"
    assert lines[4].startswith("#") and lines[4].endswith("L=1")


def test_train_eval_predict(corpus_dir, tmp_path, capsys):
    models = tmp_path / "models"
    assert run(["train", "--corpus", str(corpus_dir), "--level", "0", "--epochs", "1", "--filters", "2",
                "--out", str(models), "--deterministic"]) == EXIT_OK
    assert (models / "level0.ucnn").exists() and (models / "level0_history.csv").exists()
    for d in (1, 2):
        assert run(["train", "--corpus", str(corpus_dir), "--level", "1", "--degree", str(d), "--preset", "degree3",
                    "--epochs", "1", "--filters", "2", "--out", str(models)]) == EXIT_OK
    capsys.readouterr()
    assert run(["eval", "--models", str(models), "--corpus", str(corpus_dir), "--out", str(tmp_path / "ev")]) == 0
    out = capsys.readouterr().out
    assert "path valid: True" in out
    assert (tmp_path / "ev" / "metrics.csv").exists() and (tmp_path / "ev" / "confusion_degree2.csv").exists()
    img = next(corpus_dir.glob("2_*.pgm"))
    assert run(["predict", str(img), "--models", str(models)]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("degree ") and out[2].startswith("class_key [")


def test_eval_without_models(corpus_dir, tmp_path):
    assert run(["eval", "--models", str(tmp_path), "--corpus", str(corpus_dir)]) == EXIT_DATA


def test_divergence_exit_code(corpus_dir, tmp_path, capsys):
    with np.errstate(all="ignore"):
        code = run(["train", "--corpus", str(corpus_dir), "--level", "1", "--degree", "1", "--preset",
                    "degree3", "--filters", "2", "--epochs", "2", "--lr", "1e300", "--out", str(tmp_path)])
    assert code == EXIT_DIVERGED
    assert "lower --lr" in capsys.readouterr().err


def test_console_script_entry():
    proc = subprocess.run([sys.executable, "-m", "ligocr.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("ligocr ")
