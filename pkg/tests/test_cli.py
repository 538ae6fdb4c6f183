import json

import pytest

from nestseq.cli import main


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    assert main(["generate", "--seed", "1", "--patients", "100", "--out", str(out)]) == 0
    return out


def test_generate_writes_csv_and_manifest(generated):
    assert (generated / "cohort.csv").exists()
    man = json.loads((generated / "manifest.json").read_text())
    assert man["config"]["seed"] == 1 and man["config"]["n_patients"] == 100
    assert "tool_version" in man and "intercept" in man


def test_stats_consistent_with_manifest(generated, capsys):
    assert main(["stats", str(generated / "cohort.csv")]) == 0
    st = json.loads(capsys.readouterr().out)
    assert st == json.loads((generated / "manifest.json").read_text())["stats"]
    assert st["patients"] == 100


def test_generate_jsonl_and_stats_md(tmp_path, capsys):
    assert main(["generate", "--patients", "30", "--signal", "none", "--format", "jsonl",
                 "--out", str(tmp_path)]) == 0
    assert main(["stats", str(tmp_path / "cohort.jsonl"), "--format", "md"]) == 0
    assert "| patients | 30 |" in capsys.readouterr().out


def test_train(generated, tmp_path, capsys):
    out = tmp_path / "t"
    assert main(["train", "--data", str(generated / "cohort.csv"), "--epochs", "2", "--out", str(out)]) == 0
    assert {"trial.json", "params.json", "manifest.json"} <= {p.name for p in out.iterdir()}
    assert "final_validation" in json.loads(capsys.readouterr().out)


def test_experiment_and_report(generated, tmp_path, capsys):
    cfg = {"seed": 3, "n_trials": 1, "dataset": str(generated / "cohort.csv"),
           "grid": [{"model": "MLP", "structure": "MARKOV", "aggregation": "SUM", "hidden_units": 5}],
           "training": {"epochs": 2}, "split": {"seed": 1}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "res"
    assert main(["experiment", "--config", str(path), "--out", str(out), "--svg"]) == 0
    table = (out / "table.csv").read_text().splitlines()
    assert table[0] == "HU,Model,Input Struct,LL,AUPRC,AUROC" and len(table) == 2
    assert (out / "trials" / "H5-MLP-MARKOV-SUM" / "trial_000.json").exists()
    assert any((out / "svg").iterdir())
    capsys.readouterr()
    assert main(["report", str(out), "--format", "csv"]) == 0
    assert "HU,Model,Input Struct" in capsys.readouterr().out
    before = (out / "table.md").read_bytes()
    assert main(["report", str(out)]) == 0
    assert (out / "table.md").read_bytes() == before


@pytest.mark.parametrize("doc", ['{"n_trials": 1}', "not json", '{"generator": {}, "bogus": 1}',
                                 '{"generator": {}, "n_trials": 0}'])
def test_invalid_config_exit_2(tmp_path, doc, capsys):
    path = tmp_path / "bad.json"
    path.write_text(doc)
    assert main(["experiment", "--config", str(path)]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_data_exit_2(tmp_path):
    assert main(["stats", str(tmp_path / "nope.csv")]) == 2


def test_gradcheck_exit_codes(capsys):
    assert main(["gradcheck", "--cases", "3", "--seed", "5"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 3
    assert main(["gradcheck", "--cases", "0"]) == 0
    assert "vacuous" in capsys.readouterr().err
    assert main(["gradcheck", "--model", "NEST", "--cases", "2", "--inject-fault"]) == 1
    assert "failing case seeds" in capsys.readouterr().out


def test_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
