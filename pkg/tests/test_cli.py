import csv
import json
from fractions import Fraction
from pathlib import Path

import jsonschema
import pytest

from venn_calib.cli import main
from venn_calib.data_io import bundled_spec, derive_seed, load_dataset, split_indices
from venn_calib.evaluation import REPORT_SCHEMA
from venn_calib.merging import merge_log

GOLDEN = Path(__file__).parent / "golden" / "calibrate_sample_1d_sva_identity.csv"


def isotonic_value_minmax(data, s):
    """Isotonic fit at ``s`` via the max-min formula over pooled cell means."""
    domain = sorted({t for t, _ in data})
    ones = [sum(y for t, y in data if t == d) for d in domain]
    counts = [sum(1 for t, _ in data if t == d) for d in domain]
    j = domain.index(s)
    return max(
        min(Fraction(sum(ones[i:k + 1]), sum(counts[i:k + 1])) for k in range(j, len(domain)))
        for i in range(j + 1))


def read_rows(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


class TestPava:
    def test_pooling(self, tmp_path):
        src = tmp_path / "in.csv"
        src.write_text("1,1\n2,0\n")
        assert main(["pava", str(src), "-o", str(tmp_path / "out.csv")]) == 0
        assert read_rows(tmp_path / "out.csv") == [["score", "fitted_value"], ["1", "0.5"], ["2", "0.5"]]

    def test_isotonic_input_with_header(self, tmp_path, capsys):
        src = tmp_path / "in.csv"
        src.write_text("score,label\n3,1\n1,0\n2,1\n")
        assert main(["pava", str(src)]) == 0
        assert capsys.readouterr().out.splitlines()[1:] == ["1,0", "2,1", "3,1"]

    def test_empty(self, tmp_path):
        src = tmp_path / "in.csv"
        src.write_text("")
        assert main(["pava", str(src)]) == 2

    def test_parse_error_names_line(self, tmp_path, capsys):
        src = tmp_path / "in.csv"
        src.write_text("1,1\n2,0\nx,1\n")
        assert main(["pava", str(src)]) == 2
        assert "line 3" in capsys.readouterr().err


class TestCalibrate:
    def test_golden(self, tmp_path):
        out = tmp_path / "out.csv"
        args = ["calibrate", "--dataset", "sample_1d", "--classifier", "identity", "--method", "SVA", "--seed", "0"]
        assert main(args + ["-o", str(out)]) == 0
        assert out.read_bytes() == GOLDEN.read_bytes()

    def test_golden_matches_independent_oracle(self):
        ds = load_dataset(bundled_spec("sample_1d"))
        train_idx, test_idx = split_indices(len(ds), derive_seed(0, "main", 0))
        scored = [(float(ds.X[i, 0]), int(ds.y[i])) for i in train_idx]
        rows = read_rows(GOLDEN)[1:]
        assert len(rows) == len(test_idx)
        for i, (p0, p1, merged, y) in zip(test_idx, rows):
            s = float(ds.X[i, 0])
            e0 = isotonic_value_minmax(scored + [(s, 0)], s)
            e1 = isotonic_value_minmax(scored + [(s, 1)], s)
            assert (float(p0), float(p1)) == (float(e0), float(e1))
            assert float(merged) == merge_log((e0, e1))
            assert int(y) == ds.y[i]

    def test_va_log_merge_interior(self, capsys):
        assert main(["calibrate", "--dataset", "sample_mixed", "--classifier", "logistic", "--method", "VA",
                     "--param", "iterations=100"]) == 0
        rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
        assert rows and all(0 < float(r["merged_p"]) < 1 for r in rows)

    def test_env_seed(self, monkeypatch, capsys):
        args = ["calibrate", "--dataset", "sample_1d", "--classifier", "identity"]
        monkeypatch.setenv("VENN_CALIB_SEED", "0")
        main(args)
        assert capsys.readouterr().out.encode() == GOLDEN.read_bytes()

    def test_unknown_classifier(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["calibrate", "--dataset", "sample_1d", "--classifier", "j48"])
        assert info.value.code == 2
        assert "usage" in capsys.readouterr().err

    def test_unknown_dataset(self):
        assert main(["calibrate", "--dataset", "nowhere.cfg"]) == 2

    def test_data_error(self, tmp_path):
        (tmp_path / "d.csv").write_text("a,label\n1,0\n2,1\n3\n")
        (tmp_path / "d.cfg").write_text("path = d.csv\nlabel_column = label\n")
        assert main(["calibrate", "--dataset", str(tmp_path / "d.cfg")]) == 3

    def test_explicit_test_file(self, tmp_path, capsys):
        (tmp_path / "train.csv").write_text("x,label\n1,0\n2,1\n3,0\n4,1\n")
        (tmp_path / "test.csv").write_text("x,label\n2.5,1\n")
        for name in ("train", "test"):
            (tmp_path / f"{name}.cfg").write_text(f"path = {name}.csv\nlabel_column = label\n")
        assert main(["calibrate", "--dataset", str(tmp_path / "train.cfg"), "--test-file",
                     str(tmp_path / "test.cfg"), "--classifier", "identity"]) == 0
        row = capsys.readouterr().out.splitlines()[1].split(",")
        assert (Fraction(row[0]).limit_denominator(), Fraction(row[1]).limit_denominator()) == (
            Fraction(1, 3), Fraction(2, 3))


class TestExperiment:
    def run(self, out, *extra):
        return main(["experiment", "--datasets", "sample_1d,sample_mixed", "--classifiers", "logistic,knn",
                     "--methods", "RAW,SVA,DIR", "--repeats", "5", "--out", str(out), *extra])

    def test_outputs_and_rerun(self, tmp_path, capsys):
        assert self.run(tmp_path / "a") == 0
        assert self.run(tmp_path / "b") == 0
        files = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert "sample_1d__knn.csv" in files and "sample_mixed__logistic.json" in files and "summary.txt" in files
        for name in files:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert "best" in capsys.readouterr().out

    def test_va_default_repeats(self, tmp_path):
        assert main(["experiment", "--datasets", "sample_1d", "--classifiers", "identity", "--methods", "SVA,VA",
                     "--out", str(tmp_path), "--format", "json"]) == 0
        doc = json.loads((tmp_path / "sample_1d__identity.json").read_text())
        assert doc["methods"]["VA"]["repeats"] == 16
        assert doc["methods"]["SVA"]["repeats"] == 100

    def test_json_schema(self, tmp_path):
        assert self.run(tmp_path, "--format", "json") == 0
        for path in tmp_path.glob("*.json"):
            jsonschema.validate(json.loads(path.read_text()), REPORT_SCHEMA)
        assert not list(tmp_path.glob("*.csv"))

    def test_config_file_and_override(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("datasets = sample_1d\nclassifiers = knn\nmethods = SVA\nrepeats = 7\nparam.knn.k = 3\n")
        assert main(["experiment", "--config", str(cfg), "--repeats", "2", "--out", str(tmp_path / "o")]) == 0
        doc = json.loads((tmp_path / "o" / "sample_1d__knn.json").read_text())
        assert doc["methods"]["SVA"]["repeats"] == 2
        assert doc["config"]["classifier_params"] == {"k": 3}

    def test_bad_config_key(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("datasets = sample_1d\nbogus = 1\n")
        assert main(["experiment", "--config", str(cfg), "--out", str(tmp_path)]) == 2

    def test_no_datasets(self, tmp_path):
        assert main(["experiment", "--out", str(tmp_path)]) == 2


class TestValidity:
    def test_identity(self, capsys):
        assert main(["validity", "--scenario", "identity", "--trials", "50"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert set(doc["max_deviation"].values()) == {"0"}

    def test_unbiasedness(self, capsys):
        assert main(["validity", "--scenario", "unbiasedness", "--l", "10", "--trials", "500", "--p", "0.9"]) == 0
        assert json.loads(capsys.readouterr().out)["holds"]

    def test_membership_counterexample(self, capsys):
        assert main(["validity", "--scenario", "prop2", "--l", "1000", "--trials", "100", "--seed", "1"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["upper_min"] == 1 and 0.63 <= doc["lower_mean"] <= 0.70

    def test_membership_counterexample_deterministic(self, capsys):
        args = ["validity", "--scenario", "prop2", "--l", "200", "--trials", "100", "--seed", "3"]
        main(args)
        first = capsys.readouterr().out
        main(args + ["--jobs", "2"])
        assert capsys.readouterr().out == first

    def test_bad_args(self):
        with pytest.raises(SystemExit) as info:
            main(["validity", "--scenario", "nonsense"])
        assert info.value.code == 2
        assert main(["validity", "--scenario", "unbiasedness", "--trials", "5"]) == 2
