import csv
import json

import jsonschema
import pytest

from spsafs import baselines, cli

SMALL = """
[experiment]
methods = {methods}
repetitions = {reps}
[dataset]
n = 60
p = 8
informative = 0, 3
noise_sd = 0.3
[model]
kind = gnb
[cv]
folds = 3
[method.spsafs]
iterations = {iters}
[method.bspsa]
iterations = {iters}
"""


def write_config(tmp_path, methods="spsafs, sfs, exhaustive, full", reps=3, iters=20, extra=""):
    path = tmp_path / "exp.ini"
    path.write_text(SMALL.format(methods=methods, reps=reps, iters=iters) + extra)
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestRun:
    def test_table_and_exhaustive_minimum(self, tmp_path):
        cfg = write_config(tmp_path)
        assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
        table = read_rows(tmp_path / "out" / "table.csv")
        assert [r["method"] for r in table] == ["spsafs", "sfs", "exhaustive", "full"]
        means = {r["method"]: float(r["mean_loss"]) for r in table}
        assert means["exhaustive"] == min(means.values())

    def test_single_method_single_trace(self, tmp_path):
        cfg = write_config(tmp_path, methods="spsafs", reps=1, iters=15)
        cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
        traces = list((tmp_path / "o" / "traces").iterdir())
        assert [t.name for t in traces] == ["spsafs_rep0.csv"]
        rows = read_rows(traces[0])
        assert len(rows) == 15
        assert tuple(rows[0]) == cli.TRACE_COLUMNS

    def test_summaries_validate_and_count_evaluations(self, tmp_path):
        cfg = write_config(tmp_path, methods="spsafs, bspsa, sfs, sffs, correlation, relief, full", reps=1)
        cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
        schema = json.loads((tmp_path / "o" / "summary.schema.json").read_text())
        for path in (tmp_path / "o" / "summaries").iterdir():
            summary = json.loads(path.read_text())
            jsonschema.validate(summary, schema)
            assert summary["status"] == "ok"
            if summary["method"] in ("spsafs", "bspsa"):
                assert summary["evaluations"] <= 2 * summary["iterations"]

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write_config(tmp_path, methods="spsafs, bspsa, sfs", reps=2)
        for name in ("a", "b"):
            cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / name)])
        for sub in ("traces", "summaries"):
            for f in (tmp_path / "a" / sub).iterdir():
                assert f.read_bytes() == (tmp_path / "b" / sub / f.name).read_bytes()
        strip = lambda rows: [{k: v for k, v in r.items() if k != "mean_runtime"} for r in rows]
        assert strip(read_rows(tmp_path / "a" / "table.csv")) == strip(read_rows(tmp_path / "b" / "table.csv"))

    @pytest.mark.slow
    def test_parallel_matches_serial(self, tmp_path):
        cfg = write_config(tmp_path, methods="spsafs, sfs", reps=2)
        cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "s")])
        cli.main(["run", "--config", str(cfg), "--jobs", "2", "--out", str(tmp_path / "p")])
        for f in (tmp_path / "s" / "summaries").iterdir():
            assert f.read_bytes() == (tmp_path / "p" / "summaries" / f.name).read_bytes()

    def test_seed_flag_changes_results(self, tmp_path):
        cfg = write_config(tmp_path, methods="spsafs", reps=1)
        cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")])
        cli.main(["run", "--config", str(cfg), "--seed", "5", "--out", str(tmp_path / "b")])
        a = json.loads((tmp_path / "a" / "summaries" / "spsafs_rep0.json").read_text())
        b = json.loads((tmp_path / "b" / "summaries" / "spsafs_rep0.json").read_text())
        assert a["method_seed"] != b["method_seed"]

    def test_partial_failure_exit_one(self, tmp_path, monkeypatch):
        def broken(*args, **kwargs):
            raise RuntimeError("solver exploded")

        monkeypatch.setattr(baselines, "sfs", broken)
        cfg = write_config(tmp_path, methods="sfs, full", reps=1)
        assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
        summary = json.loads((tmp_path / "o" / "summaries" / "sfs_rep0.json").read_text())
        assert summary["status"] == "failed" and "solver exploded" in summary["error"]
        table = read_rows(tmp_path / "o" / "table.csv")
        assert table[0]["failures"] == "1" and table[1]["failures"] == "0"

    def test_output_dir_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env-out"))
        cfg = write_config(tmp_path, methods="full", reps=1)
        assert cli.main(["run", "--config", str(cfg)]) == 0
        assert (tmp_path / "env-out" / "table.csv").is_file()


class TestConfigErrors:
    def test_missing_csv_names_path(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        args = ["run", "--config", str(cfg), "--set", "dataset.source=csv", "--set", "dataset.path=nowhere.csv"]
        assert cli.main(args) == 2
        assert "nowhere.csv" in capsys.readouterr().err

    @pytest.mark.parametrize(
        "override, field",
        [
            ("experiment.repetitions=0", "experiment.repetitions"),
            ("experiment.methods=spsafs, magic", "experiment.methods"),
            ("model.kind=svm", "model.kind"),
            ("model.kind=ols", "model.kind"),
            ("method.spsafs.iterations=abc", "method.spsafs.iterations"),
            ("dataset.informative=0, 99", "dataset.informative"),
            ("dataset.bogus=1", "dataset.bogus"),
            ("cv.folds=0", "cv.folds"),
        ],
    )
    def test_field_paths_in_errors(self, tmp_path, capsys, override, field):
        cfg = write_config(tmp_path)
        assert cli.main(["validate-config", "--config", str(cfg), "--set", override]) == 2
        assert field in capsys.readouterr().err

    def test_exhaustive_limit(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert cli.main(["validate-config", "--config", str(cfg), "--set", "dataset.p=25"]) == 2
        assert "exhaustive needs p <= 20" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert cli.main(["validate-config", "--config", str(tmp_path / "none.ini")]) == 2

    def test_print_effective_config(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert cli.main(["validate-config", "--config", str(cfg), "--print-effective-config", "--set", "model.k=7"]) == 0
        out = capsys.readouterr().out
        assert "k = 7" in out and "[method.spsafs]" in out and "config ok" in out


class TestRankAndRegress:
    def test_rank_rows_and_full_degeneracy(self, tmp_path):
        extra = "[rank]\nm_list = 2, 4, 8\nmodels = gnb, knn\n"
        cfg = write_config(tmp_path, methods="spsafs, correlation, relief, sfs, full", reps=2, extra=extra)
        assert cli.main(["rank", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        rows = read_rows(tmp_path / "o" / "rank.csv")
        assert tuple(rows[0]) == cli.RANK_COLUMNS
        assert len(rows) == 5 * 3 * 2
        for model in ("gnb", "knn5"):
            at_p = {r["mean_loss"] for r in rows if r["m"] == "8" and r["model"] == model}
            assert len(at_p) == 1

    def test_rank_rejects_oversized_m(self, tmp_path):
        cfg = write_config(tmp_path, methods="correlation", reps=1, extra="[rank]\nm_list = 2, 9\n")
        assert cli.main(["rank", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
        assert [r["m"] for r in read_rows(tmp_path / "o" / "rank.csv")] == ["2"]

    def test_regress_curves(self, tmp_path):
        text = """
[experiment]
methods = spsafs, correlation, full
repetitions = 1
[dataset]
task = regression
n = 60
p = 10
informative = 0, 4
noise_sd = 0.0
[model]
kind = ols
[method.spsafs]
iterations = 20
"""
        cfg = tmp_path / "reg.ini"
        cfg.write_text(text)
        assert cli.main(["regress", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        rows = read_rows(tmp_path / "o" / "regress.csv")
        assert len(rows) == 3 * 10
        at_100 = {r["mean_loss"] for r in rows if r["percent"] == "100"}
        assert len(at_100) == 1
        corr = {int(r["percent"]): float(r["mean_loss"]) for r in rows if r["method"] == "correlation"}
        assert corr[20] <= 1e-9  # top two correlated features are the informative ones

    def test_regress_needs_ols(self, tmp_path):
        cfg = write_config(tmp_path, methods="correlation", reps=1)
        assert cli.main(["regress", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
