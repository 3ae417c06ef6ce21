import json
import subprocess
import sys

from barron_risk import cli


def _files(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_train_then_report(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "train", "m": 8, "data": {"n": 32, "test_size": 50}, "train": {"T": 20}}))
    assert cli.main(["train", "--config", str(cfg), "--out", str(tmp_path / "a"), "-q"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["m"] == 8
    rep = tmp_path / "r.json"
    rep.write_text(json.dumps({"model": str(tmp_path / "a/model.bin"), "data": str(tmp_path / "a/train_data.csv")}))
    assert cli.main(["bound-report", "--config", str(rep), "--out", str(tmp_path / "b"), "-q"]) == 0
    assert "posterior gap bound" in capsys.readouterr().out


def test_rerun_is_byte_identical(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"m": 8, "data": {"n": 32, "test_size": 50}, "train": {"T": 20}}))
    for name in ("a", "b"):
        assert cli.main(["train", "--config", str(cfg), "--out", str(tmp_path / name), "--seed", "99", "-q"]) == 0
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_seed_changes_results(tmp_path):
    for seed in ("1", "2"):
        cli.main(["train", "--out", str(tmp_path / seed), "--seed", seed, "-q",
                  "--config", str(_small(tmp_path))])
    assert (tmp_path / "1/model.bin").read_bytes() != (tmp_path / "2/model.bin").read_bytes()


def _small(tmp_path):
    cfg = tmp_path / "small.json"
    cfg.write_text(json.dumps({"m": 4, "data": {"n": 16, "test_size": 10}, "train": {"T": 5}}))
    return cfg


def test_errors_exit_nonzero(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"unknown": 1}))
    assert cli.main(["train", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "unknown" in capsys.readouterr().err
    other = tmp_path / "other.json"
    other.write_text(json.dumps({"command": "width-sweep"}))
    assert cli.main(["train", "--config", str(other), "--out", str(tmp_path)]) == 2
    assert cli.main(["train", "--config", str(tmp_path / "missing.json")]) == 2
    assert cli.main(["train", "--config", str(_small(tmp_path)), "--seed", "-1"]) == 2


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "barron_risk.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for command in ("train", "rate-study", "width-sweep", "init-sweep", "mnist-bench", "bound-report"):
        assert command in res.stdout
