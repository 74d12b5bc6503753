import json

import pytest

from ndprop.cli import main
from ndprop.evaluate import read_csv
from ndprop.generators import list_files

from .conftest import APPENDIX_A


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def prog(tmp_path):
    path = tmp_path / "p.lp"
    path.write_text(APPENDIX_A)
    return path


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli") / "ds"
    assert main(["generate", "--out", str(root), "--counts", "12,4,6", "--seed", "3"]) == 0
    return root


def test_solve_random_and_guided(capsys, prog):
    code, out, _ = run(capsys, "solve", "--program", prog, "--seed", 4)
    model, stats = out.splitlines()
    assert code == 0 and model in ("a", "b")
    assert stats == "runs=1 decisions=1 ms=0"
    code, out, _ = run(capsys, "solve", "--program", prog, "--policy", "guided", "--target", "b")
    assert out.splitlines()[0] == "b"


def test_solve_unsat(capsys, tmp_path):
    p = tmp_path / "u.lp"
    p.write_text("a :- not a.\n")
    code, out, _ = run(capsys, "solve", "--program", p, "--restarts", 5)
    assert code == 0
    assert out.splitlines() == ["UNSAT-WITHIN-BUDGET", "runs=5 decisions=5 ms=0"]
    code, out, _ = run(capsys, "solve", "--program", p, "--policy", "guided")
    assert out.splitlines()[0] == "UNSAT-WITHIN-BUDGET"


def test_solve_usage_errors(capsys, prog):
    assert run(capsys, "solve", "--program", prog, "--max-iters", 1)[0] == 1
    assert run(capsys, "solve", "--program", prog, "--restarts", 0)[0] == 1
    assert run(capsys, "solve")[0] == 1
    assert run(capsys, "solve", "--program", "/no/such/file")[0] == 1


def test_syntax_error_exit_code(capsys, tmp_path):
    p = tmp_path / "bad.lp"
    p.write_text("a :- .")
    code, _, err = run(capsys, "enumerate", "--program", p)
    assert code == 1 and "line 1" in err


def test_enumerate(capsys, prog):
    code, out, err = run(capsys, "enumerate", "--program", prog, "--count")
    assert code == 0 and out == "a\nb\n" and "models=2" in err


def test_check(capsys, prog):
    code, out, _ = run(capsys, "check", "--program", prog, "--tau", "1,0", "--phi", "0,1")
    assert out.splitlines() == ["STABLE", "a"]
    code, out, _ = run(capsys, "check", "--program", prog, "--tau", "0,0", "--phi", "0,0",
                       "--tnorm", "product")
    assert out.splitlines()[0] == "NOT-BINARY"
    assert run(capsys, "check", "--program", prog, "--tau", "1", "--phi", "0,1")[0] == 1
    assert run(capsys, "check", "--program", prog, "--tau", "1,x", "--phi", "0,1")[0] == 1


def test_generate_single_is_deterministic(capsys):
    a = run(capsys, "generate", "--kind", "3lp", "--n", 6, "--seed", 5)[1]
    b = run(capsys, "generate", "--kind", "3lp", "--n", 6, "--seed", 5)[1]
    assert a == b and a.startswith("#atoms") and a.count("\n") == 31


def test_generate_dataset_deterministic(capsys, tmp_path):
    for d in ("x", "y"):
        assert run(capsys, "generate", "--out", tmp_path / d, "--counts", "5,2,2", "--seed", 1)[0] == 0
    files = list_files(tmp_path / "x")
    assert files == list_files(tmp_path / "y") and len(files) == 19
    assert all((tmp_path / "x" / f).read_bytes() == (tmp_path / "y" / f).read_bytes() for f in files)
    assert run(capsys, "generate", "--out", tmp_path / "z", "--split", "hard", "--counts", "1,0,0")[0] == 1


def test_train_and_eval_deterministic(capsys, tmp_path, dataset):
    outs = []
    for tag in ("a", "b"):
        w = tmp_path / f"{tag}.bin"
        code, out, err = run(capsys, "train", "--data", dataset, "--epochs", 2, "--hidden", 4,
                             "--logical", 2, "--batch-size", 4, "--iters", 3, "--sweeps", 3,
                             "--val-every", 1, "--out", w, "--log", tmp_path / f"{tag}.json")
        assert code == 0 and "val=" in err
        csv_path = tmp_path / f"{tag}.csv"
        code, table, _ = run(capsys, "eval", "--data", dataset, "--weights", w, "--iters", 5,
                             "--mode", "ndprop", "--mode", "rdprop-10", "--mode", "random",
                             "--csv", csv_path)
        assert code == 0
        outs.append((w.read_bytes(), csv_path.read_bytes(), table,
                     (tmp_path / f"{tag}.json").read_bytes()))
    assert outs[0] == outs[1]
    rows = read_csv(outs[0][1].decode())
    assert [r["mode"] for r in rows] == ["ndprop", "rdprop-10", "random"]
    assert set(rows[0]) == {"split", "mode", "solve_rate", "mean_decisions", "wall_ms", "seed"}
    assert all(r["wall_ms"] == "0" for r in rows)
    assert json.loads(outs[0][3])["config"]["hidden_dim"] == 4


def test_eval_errors(capsys, tmp_path, dataset):
    assert run(capsys, "eval", "--data", dataset)[0] == 1          # ndprop without weights
    assert run(capsys, "eval", "--data", dataset, "--mode", "dfs")[0] == 1
    assert run(capsys, "eval", "--data", tmp_path / "missing", "--mode", "rdprop-1")[0] == 1
    bad = tmp_path / "w.bin"
    bad.write_bytes(b"NDPW")
    assert run(capsys, "eval", "--data", dataset, "--weights", bad)[0] == 1


def test_eval_timing_flag(capsys, tmp_path, dataset):
    code, table, _ = run(capsys, "eval", "--data", dataset, "--mode", "rdprop", "--restarts", 3,
                         "--timing")
    assert code == 0 and "rdprop-3" in table


def test_gradcheck(capsys):
    code, out, _ = run(capsys, "gradcheck", "--programs", 2, "--hidden", 3, "--tnorm", "product")
    assert code == 0 and "max_rel_err" in out
    # an impossible tolerance is reported as a failure
    code, _, err = run(capsys, "gradcheck", "--programs", 1, "--hidden", 2, "--tol", 0)
    assert code == 2 and "FAIL" in err


def test_suite_epochs_zero(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"counts": [6, 3, 8], "modes": ["rdprop-1", "ndprop"],
                               "train": {"hidden_dim": 4, "logical_dim": 2}}))
    outs = []
    for d in ("s1", "s2"):
        code, out, _ = run(capsys, "suite", "--config", cfg, "--output-dir", tmp_path / d,
                           "--epochs", 0)
        assert code == 0
        outs.append(out.replace(str(tmp_path / d), ""))
    assert outs[0] == outs[1]
    for name in ("report.csv", "weights.bin", "solve_rates.png", "training.png", "config.json"):
        assert (tmp_path / "s1" / name).read_bytes() == (tmp_path / "s2" / name).read_bytes()
    resolved = json.loads((tmp_path / "s1" / "config.json").read_text())
    assert resolved["train"]["epochs"] == 0 and resolved["train"]["lr"] == 1e-3


def test_suite_rejects_unknown_keys(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochz": 3}))
    assert run(capsys, "suite", "--config", cfg, "--output-dir", tmp_path / "o")[0] == 1
