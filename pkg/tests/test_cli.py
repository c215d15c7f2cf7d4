import csv
import json

import numpy as np
import pytest

import mtgp.cli as cli
from mtgp import model_io
from mtgp.benchmark import forrester
from mtgp.data import read_task_csv
from mtgp.errors import TrainingFailedError
from mtgp.gp import gp_predict
from mtgp.multitask import mtgp_predict
from mtgp.seeding import make_rng


def write_two_task_csv(path, n0=6, n1=5, seed=0):
    rng = make_rng("cli-data", seed)
    rows = []
    for _ in range(n0):
        x = float(rng.uniform(0, 1))
        rows.append((x, 0, forrester(x)))
    for _ in range(n1):
        x = float(rng.uniform(0, 1))
        rows.append((x, 1, 0.5 * forrester(x) + 1.0))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x1", "task", "y"])
        for x, task, y in rows:
            writer.writerow([repr(x), task, repr(y)])
    return path


def write_config(path, **overrides):
    config = {
        "family": "mtgp-slfm",
        "max_iterations": 60,
        "num_restarts": 2,
        "seed": 0,
    }
    config.update(overrides)
    path.write_text(json.dumps(config), encoding="utf-8")
    return path


def read_csv_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


class TestTrainPredict:
    def test_mtgp_round_trip(self, tmp_path):
        data = write_two_task_csv(tmp_path / "data.csv")
        config = write_config(tmp_path / "config.json")
        out = tmp_path / "run"
        assert cli.main(["train", "--data", str(data), "--config", str(config), "--out", str(out)]) == 0
        assert (out / "model.json").exists()
        metrics = json.loads((out / "metrics.json").read_text())
        assert np.isfinite(metrics["log_marginal_likelihood"])

        query = tmp_path / "query.csv"
        query.write_text("x1,task\n0.25,0\n0.5,1\n0.75,0\n", encoding="utf-8")
        preds = tmp_path / "preds.csv"
        assert cli.main(["predict", "--model", str(out / "model.json"), "--data", str(query), "--out", str(preds)]) == 0
        rows = read_csv_rows(preds)
        assert [r["task"] for r in rows] == ["0", "1", "0"]
        assert all(float(r["stddev"]) >= 0 for r in rows)

        # round trip against the in-process model
        model = model_io.load_model(out / "model.json")
        expected0 = mtgp_predict(model, 0, np.array([[0.25], [0.75]])).mean
        got0 = [float(r["mean"]) for r in rows if r["task"] == "0"]
        np.testing.assert_allclose(got0, expected0, atol=1e-10)

    def test_gp_family_single_task(self, tmp_path):
        rng = make_rng("cli-gp", 0)
        data = tmp_path / "one.csv"
        with open(data, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x1", "task", "y"])
            for _ in range(8):
                x = float(rng.uniform(0, 1))
                writer.writerow([repr(x), 0, repr(forrester(x))])
        config = write_config(tmp_path / "config.json", family="gp")
        out = tmp_path / "run"
        assert cli.main(["train", "--data", str(data), "--config", str(config), "--out", str(out)]) == 0
        query = tmp_path / "query.csv"
        query.write_text("x1,task\n0.4,0\n", encoding="utf-8")
        preds = tmp_path / "p.csv"
        assert cli.main(["predict", "--model", str(out / "model.json"), "--data", str(query), "--out", str(preds)]) == 0
        model = model_io.load_model(out / "model.json")
        expected = gp_predict(model, np.array([[0.4]])).mean[0]
        assert float(read_csv_rows(preds)[0]["mean"]) == pytest.approx(expected, abs=1e-10)

    def test_gp_family_rejects_multi_task_data(self, tmp_path):
        data = write_two_task_csv(tmp_path / "data.csv")
        config = write_config(tmp_path / "config.json", family="gp")
        code = cli.main(["train", "--data", str(data), "--config", str(config), "--out", str(tmp_path / "o")])
        assert code == 2

    def test_task_gap_exits_2(self, tmp_path, capsys):
        data = tmp_path / "gap.csv"
        data.write_text("x1,task,y\n0.1,0,1.0\n0.2,2,2.0\n", encoding="utf-8")
        config = write_config(tmp_path / "config.json")
        code = cli.main(["train", "--data", str(data), "--config", str(config), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "missing [1]" in capsys.readouterr().err

    def test_unknown_config_key_exits_2(self, tmp_path, capsys):
        data = write_two_task_csv(tmp_path / "data.csv")
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"family": "mtgp-slfm", "kernl": "matern52"}), encoding="utf-8")
        code = cli.main(["train", "--data", str(data), "--config", str(config), "--out", str(tmp_path / "o")])
        assert code == 2
        assert "kernl" in capsys.readouterr().err

    def test_training_failure_exits_3(self, tmp_path, monkeypatch):
        data = write_two_task_csv(tmp_path / "data.csv")
        config = write_config(tmp_path / "config.json")

        def boom(*args, **kwargs):
            raise TrainingFailedError("all restarts failed", [{"restart": 0}])

        monkeypatch.setattr(cli, "train_mtgp", boom)
        code = cli.main(["train", "--data", str(data), "--config", str(config), "--out", str(tmp_path / "o")])
        assert code == 3

    def test_empty_query_gives_header_only(self, tmp_path):
        data = write_two_task_csv(tmp_path / "data.csv")
        config = write_config(tmp_path / "config.json")
        out = tmp_path / "run"
        cli.main(["train", "--data", str(data), "--config", str(config), "--out", str(out)])
        query = tmp_path / "query.csv"
        query.write_text("x1,task\n", encoding="utf-8")
        preds = tmp_path / "p.csv"
        assert cli.main(["predict", "--model", str(out / "model.json"), "--data", str(query), "--out", str(preds)]) == 0
        assert preds.read_text(encoding="utf-8") == "x1,task,mean,stddev\n"

    def test_query_task_out_of_range_exits_2(self, tmp_path):
        data = write_two_task_csv(tmp_path / "data.csv")
        config = write_config(tmp_path / "config.json")
        out = tmp_path / "run"
        cli.main(["train", "--data", str(data), "--config", str(config), "--out", str(out)])
        query = tmp_path / "query.csv"
        query.write_text("x1,task\n0.5,7\n", encoding="utf-8")
        assert cli.main(["predict", "--model", str(out / "model.json"), "--data", str(query), "--out", str(tmp_path / "p.csv")]) == 2

    def test_seed_flag_overrides_config(self, tmp_path):
        data = write_two_task_csv(tmp_path / "data.csv")
        config = write_config(tmp_path / "config.json", seed=0)
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        cli.main(["train", "--data", str(data), "--config", str(config), "--out", str(out_a), "--seed", "9"])
        cli.main(["train", "--data", str(data), "--config", str(config), "--out", str(out_b)])
        doc_a = json.loads((out_a / "model.json").read_text())
        doc_b = json.loads((out_b / "model.json").read_text())
        assert doc_a["parameters"]["values_hex"] != doc_b["parameters"]["values_hex"]

    def test_byte_identical_reruns(self, tmp_path):
        data = write_two_task_csv(tmp_path / "data.csv")
        config = write_config(tmp_path / "config.json")
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        cli.main(["train", "--data", str(data), "--config", str(config), "--out", str(out_a)])
        cli.main(["train", "--data", str(data), "--config", str(config), "--out", str(out_b)])
        assert (out_a / "model.json").read_bytes() == (out_b / "model.json").read_bytes()
        query = tmp_path / "query.csv"
        query.write_text("x1,task\n0.3,0\n0.6,1\n", encoding="utf-8")
        pa, pb = tmp_path / "pa.csv", tmp_path / "pb.csv"
        cli.main(["predict", "--model", str(out_a / "model.json"), "--data", str(query), "--out", str(pa)])
        cli.main(["predict", "--model", str(out_b / "model.json"), "--data", str(query), "--out", str(pb)])
        assert pa.read_bytes() == pb.read_bytes()

    def test_trace_written(self, tmp_path):
        data = write_two_task_csv(tmp_path / "data.csv")
        config = write_config(tmp_path / "config.json", max_iterations=5)
        trace = tmp_path / "trace.jsonl"
        cli.main(["train", "--data", str(data), "--config", str(config), "--out", str(tmp_path / "o"), "--trace", str(trace)])
        lines = [json.loads(line) for line in trace.read_text().splitlines()]
        assert {rec["restart"] for rec in lines} == {0, 1}
        assert all({"iteration", "objective", "grad_norm"} <= set(rec) for rec in lines)


class TestModelIO:
    def test_version_check(self, tmp_path):
        data = write_two_task_csv(tmp_path / "data.csv")
        config = write_config(tmp_path / "config.json")
        out = tmp_path / "run"
        cli.main(["train", "--data", str(data), "--config", str(config), "--out", str(out)])
        doc = json.loads((out / "model.json").read_text())
        doc["schema_version"] = 99
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc), encoding="utf-8")
        assert cli.main(["predict", "--model", str(bad), "--data", str(data), "--out", str(tmp_path / "p.csv")]) == 2

    def test_fingerprint_stable(self, tmp_path):
        data = write_two_task_csv(tmp_path / "data.csv")
        dataset, _ = read_task_csv(data)
        assert model_io.dataset_fingerprint(dataset) == model_io.dataset_fingerprint(dataset)

    def test_lmc_round_trip(self, tmp_path):
        data = write_two_task_csv(tmp_path / "data.csv")
        config = write_config(tmp_path / "config.json", family="mtgp-lmc", rank=1, q=2)
        out = tmp_path / "run"
        assert cli.main(["train", "--data", str(data), "--config", str(config), "--out", str(out)]) == 0
        model = model_io.load_model(out / "model.json")
        assert any(np.any(t.gamma > 0) for t in model.kernel.terms)
        saved_again = tmp_path / "again.json"
        model_io.save_model(model, saved_again, "mtgp-lmc")
        assert (out / "model.json").read_text() == saved_again.read_text()


class TestBenchmarkCommand:
    def test_single_cell_run(self, tmp_path):
        config = tmp_path / "study.json"
        config.write_text(
            json.dumps(
                {
                    "correlations": [0.89],
                    "sizes": [[4, 4]],
                    "replicates": 2,
                    "n_test": 20,
                    "train": {"max_iterations": 40, "num_restarts": 2},
                }
            ),
            encoding="utf-8",
        )
        out = tmp_path / "study"
        assert cli.main(["benchmark", "--config", str(config), "--out", str(out)]) == 0
        rows = read_csv_rows(out / "study_rows.csv")
        assert len(rows) == 2
        summary = json.loads((out / "summary.json").read_text())
        assert len(summary["aggregates"]) == 1
        assert abs(summary["calibrations"]["0.89"]["achieved"] - 0.89) <= 0.03
        assert (out / "series_functions_r0.89.csv").exists()
        assert (out / "series_predictions_r0.89_t1-4_t2-4.csv").exists()

    def test_flag_overrides(self, tmp_path):
        config = tmp_path / "study.json"
        config.write_text(
            json.dumps({"train": {"max_iterations": 30, "num_restarts": 1}}),
            encoding="utf-8",
        )
        out = tmp_path / "study"
        code = cli.main(
            [
                "benchmark",
                "--config", str(config),
                "--out", str(out),
                "--correlations", "0.89",
                "--sizes", "4,4",
                "--replicates", "1",
                "--seed", "5",
            ]
        )
        assert code == 0
        assert len(read_csv_rows(out / "study_rows.csv")) == 1

    def test_bad_sizes_flag_exits_2(self, tmp_path):
        assert cli.main(["benchmark", "--out", str(tmp_path / "s"), "--sizes", "4"]) == 2

    def test_unknown_study_key_exits_2(self, tmp_path):
        config = tmp_path / "study.json"
        config.write_text(json.dumps({"replicate": 3}), encoding="utf-8")
        assert cli.main(["benchmark", "--config", str(config), "--out", str(tmp_path / "s")]) == 2


class TestCheckCommand:
    def test_exits_zero_and_lists_checks(self, capsys):
        assert cli.main(["check", "--seed", "0"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") >= 4

    def test_fault_injection_exits_one(self, monkeypatch, capsys):
        import mtgp.gp

        original = mtgp.gp.gp_log_marginal_likelihood

        def flipped(*args, **kwargs):
            value, grad = original(*args, **kwargs)
            grad = np.asarray(grad).copy()
            grad[0] = -grad[0]
            return value, grad

        monkeypatch.setattr(mtgp.gp, "gp_log_marginal_likelihood", flipped)
        assert cli.main(["check"]) == 1
        assert "FAIL" in capsys.readouterr().out
