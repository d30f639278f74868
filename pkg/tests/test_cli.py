"""End-to-end tests of the command-line interface."""

import os

import pytest

from blowup_pinn import cli
from blowup_pinn.harness import load_records, load_summary


def run_cli(argv, capsys):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


TRAIN_FAST = ["--width", "6", "--depth", "3", "--iters", "40", "--lr", "1e-3",
              "--n-int", "32", "--n-tb", "8", "--n-sb", "8"]


class TestTrain:
    def test_smoke(self, tmp_path, capsys):
        code, out, err = run_cli(
            ["train", "--problem", "burgers1d", "--delta", "0.5", "--seed", "0",
             "--out-dir", str(tmp_path)] + TRAIN_FAST, capsys)
        assert code == 0, err
        assert "loss_final" in out
        recs = load_records(tmp_path / "runs.csv")
        assert len(recs) == 1
        assert os.path.exists(recs[0].checkpoint)
        assert (tmp_path / "effective-config.txt").exists()

    def test_invalid_delta_is_usage_error(self, tmp_path, capsys):
        code, _, err = run_cli(
            ["train", "--problem", "burgers1d", "--delta", "1.2",
             "--out-dir", str(tmp_path)] + TRAIN_FAST, capsys)
        assert code == 1
        assert "delta" in err.lower()

    def test_determinism_across_invocations(self, tmp_path, capsys):
        args = ["train", "--problem", "burgers1d", "--delta", "0.5", "--seed", "3",
                "--out-dir", str(tmp_path)] + TRAIN_FAST
        code, out_a, _ = run_cli(args, capsys)
        assert code == 0
        code, out_b, _ = run_cli(args, capsys)
        assert code == 0
        best_a = [l for l in out_a.splitlines() if l.startswith("loss_best")]
        best_b = [l for l in out_b.splitlines() if l.startswith("loss_best")]
        assert best_a == best_b


class TestBound:
    def test_exact_surrogate_theorem2(self, tmp_path, capsys):
        code, out, err = run_cli(
            ["bound", "--problem", "burgers1d", "--delta", "0.5",
             "--surrogate", "exact", "--theorem", "2", "--grid-n", "24",
             "--out-dir", str(tmp_path)], capsys)
        assert code == 0, err
        assert "rhs" in out and "lhs" in out
        files = os.listdir(tmp_path)
        assert any(f.startswith("bound-") and f.endswith(".csv") for f in files)
        assert any(f.startswith("bound-") and f.endswith(".txt") for f in files)

    def test_trained_checkpoint_dominates(self, tmp_path, capsys):
        code, _, _ = run_cli(
            ["train", "--problem", "burgers1d", "--delta", "0.5", "--seed", "0",
             "--out-dir", str(tmp_path)] + TRAIN_FAST, capsys)
        assert code == 0
        ckpt = load_records(tmp_path / "runs.csv")[0].checkpoint
        code, out, err = run_cli(
            ["bound", "--problem", "burgers1d", "--delta", "0.5",
             "--checkpoint", ckpt, "--theorem", "2", "--grid-n", "24",
             "--out-dir", str(tmp_path)], capsys)
        assert code == 0, err
        vals = {}
        for line in out.splitlines():
            parts = line.split()
            if len(parts) == 2 and parts[0] in ("lhs", "rhs", "margin"):
                vals[parts[0]] = float(parts[1])
        assert vals["rhs"] >= vals["lhs"]
        assert vals["margin"] >= 0

    def test_b1_requires_quadrature_scheme(self, tmp_path, capsys):
        code, _, err = run_cli(
            ["bound", "--problem", "burgers1d", "--delta", "0.5",
             "--surrogate", "exact", "--theorem", "b1", "--scheme", "random",
             "--out-dir", str(tmp_path)], capsys)
        assert code == 1
        assert "gauss-legendre" in err

    def test_checkpoint_shape_mismatch(self, tmp_path, capsys):
        code, _, _ = run_cli(
            ["train", "--problem", "burgers1d", "--delta", "0.5", "--seed", "0",
             "--out-dir", str(tmp_path)] + TRAIN_FAST, capsys)
        assert code == 0
        ckpt = load_records(tmp_path / "runs.csv")[0].checkpoint
        code, _, err = run_cli(
            ["bound", "--problem", "burgers2d", "--delta", "0.2",
             "--checkpoint", ckpt, "--theorem", "1",
             "--out-dir", str(tmp_path)], capsys)
        assert code == 2
        assert "does not match" in err

    def test_missing_surrogate_is_usage_error(self, tmp_path, capsys):
        code, _, err = run_cli(
            ["bound", "--problem", "burgers1d", "--delta", "0.5",
             "--theorem", "2", "--out-dir", str(tmp_path)], capsys)
        assert code == 1


def write_spec(path, **kv):
    lines = ["# sweep spec"]
    lines += [f"{k} = {v}" for k, v in kv.items()]
    path.write_text("\n".join(lines) + "\n")


SPEC_FAST = dict(problem="burgers1d", widths="6", depth=3, seeds="0",
                 iterations=40, lr=1e-3, n_int=32, n_tb=8, n_sb=8,
                 grid_n=24, sup_res=32)


class TestSweep:
    def test_minimal_delta_sweep(self, tmp_path, capsys):
        spec = tmp_path / "sweep.cfg"
        write_spec(spec, kind="delta", deltas="0.3,0.7", **SPEC_FAST)
        code, out, err = run_cli(
            ["sweep", "--spec", str(spec), "--out-dir", str(tmp_path)], capsys)
        assert code == 0, err
        recs = load_records(tmp_path / "runs.csv")
        assert len(recs) == 2
        rows = load_summary(tmp_path / "summary.csv")
        assert any(r["metric"] == "pearson_lhs_rhs" for r in rows)

    def test_unknown_key_named_in_error(self, tmp_path, capsys):
        spec = tmp_path / "sweep.cfg"
        write_spec(spec, kind="delta", deltas="0.3,0.7", bogus_key=1, **SPEC_FAST)
        code, _, err = run_cli(
            ["sweep", "--spec", str(spec), "--out-dir", str(tmp_path)], capsys)
        assert code == 1
        assert "bogus_key" in err

    def test_malformed_line_named_in_error(self, tmp_path, capsys):
        spec = tmp_path / "sweep.cfg"
        spec.write_text("kind = delta\nnot a key value line\n")
        code, _, err = run_cli(
            ["sweep", "--spec", str(spec), "--out-dir", str(tmp_path)], capsys)
        assert code == 1
        assert "line 2" in err

    def test_timing_kind(self, tmp_path, capsys):
        spec = tmp_path / "sweep.cfg"
        write_spec(spec, kind="timing", deltas="0.3,0.6", **SPEC_FAST)
        code, _, err = run_cli(
            ["sweep", "--spec", str(spec), "--out-dir", str(tmp_path)], capsys)
        assert code == 0, err
        rows = load_summary(tmp_path / "summary.csv")
        assert any(r["metric"] == "timing_cv" for r in rows)


class TestReport:
    def test_resummary(self, tmp_path, capsys):
        spec = tmp_path / "sweep.cfg"
        write_spec(spec, kind="delta", deltas="0.3,0.7", **SPEC_FAST)
        code, _, _ = run_cli(
            ["sweep", "--spec", str(spec), "--out-dir", str(tmp_path)], capsys)
        assert code == 0
        out_csv = tmp_path / "resummary.csv"
        code, out, err = run_cli(
            ["report", "--runs", str(tmp_path / "runs.csv"),
             "--out", str(out_csv)], capsys)
        assert code == 0, err
        fresh = {r["metric"]: float(r["value"]) for r in load_summary(out_csv)
                 if r["metric"] == "pearson_lhs_rhs"}
        orig = {r["metric"]: float(r["value"])
                for r in load_summary(tmp_path / "summary.csv")
                if r["metric"] == "pearson_lhs_rhs"}
        assert fresh["pearson_lhs_rhs"] == pytest.approx(
            orig["pearson_lhs_rhs"], abs=1e-12)

    def test_export_grid(self, tmp_path, capsys):
        code, _, _ = run_cli(
            ["train", "--problem", "burgers1d", "--delta", "0.5", "--seed", "0",
             "--out-dir", str(tmp_path)] + TRAIN_FAST, capsys)
        assert code == 0
        ckpt = load_records(tmp_path / "runs.csv")[0].checkpoint
        grid_csv = tmp_path / "grid.csv"
        code, out, err = run_cli(
            ["report", "--export-grid", "--checkpoint", ckpt,
             "--problem", "burgers1d", "--delta", "0.5", "--res", "10",
             "--out", str(grid_csv)], capsys)
        assert code == 0, err
        lines = grid_csv.read_text().strip().splitlines()
        assert lines[0] == "x,t,u1_exact,u1_pred"
        assert len(lines) == 1 + 100


class TestConfigPrecedence:
    def test_env_overrides_default(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("BLOWUP_PINN_ITERS", "25")
        code, _, _ = run_cli(
            ["train", "--problem", "burgers1d", "--delta", "0.5", "--seed", "0",
             "--width", "6", "--depth", "3", "--lr", "1e-3",
             "--n-int", "32", "--n-tb", "8", "--n-sb", "8",
             "--out-dir", str(tmp_path)], capsys)
        assert code == 0
        assert load_records(tmp_path / "runs.csv")[0].iters == 25

    def test_flag_overrides_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "train.cfg"
        cfg.write_text("iters = 99\nwidth = 6\n")
        code, _, _ = run_cli(
            ["train", "--problem", "burgers1d", "--delta", "0.5", "--seed", "0",
             "--config", str(cfg), "--iters", "30", "--depth", "3",
             "--lr", "1e-3", "--n-int", "32", "--n-tb", "8", "--n-sb", "8",
             "--out-dir", str(tmp_path)], capsys)
        assert code == 0
        rec = load_records(tmp_path / "runs.csv")[0]
        assert rec.iters == 30
        assert rec.width == 6

    def test_effective_config_echoed(self, tmp_path, capsys):
        code, _, _ = run_cli(
            ["train", "--problem", "burgers1d", "--delta", "0.5", "--seed", "0",
             "--out-dir", str(tmp_path)] + TRAIN_FAST, capsys)
        assert code == 0
        text = (tmp_path / "effective-config.txt").read_text()
        assert "width = 6" in text
        assert "delta = 0.5" in text


class TestHelp:
    def test_help_lists_subcommands(self, capsys):
        with pytest.raises(SystemExit):
            cli.main(["--help"])
        out = capsys.readouterr().out
        for sub in ("train", "bound", "sweep", "report"):
            assert sub in out
