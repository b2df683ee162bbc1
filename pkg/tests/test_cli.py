import json
import subprocess
import sys

import pytest

from carfir.cli import main
from carfir.evaluation import parse_report

SMALL = [
    ["gen", "--length", "1600", "--seed", "3"],
    ["partition", "--train", "0:999", "--classes", "5"],
    ["identify", "--mask", "-1 -2 / 0 +1"],
    ["extract", "--epochs", "10"],
    ["errors"],
    ["sweep", "--tests", "1000:1299,1300:1599", "--percents", "0,20"],
    ["predict", "--tests", "1000:1299", "--percent", "20"],
]


def run_pipeline(workdir, steps=SMALL):
    for step in steps:
        assert main(step + ["--workdir", str(workdir)]) == 0, step


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    work = tmp_path_factory.mktemp("pipe")
    run_pipeline(work)
    return work


def test_artifacts(pipeline):
    for name in ("data.csv", "partitions.json", "mask.txt", "prb.json", "sugeno.json",
                 "errors.json", "report.tsv", "curves.csv", "mixed.json", "predict_mixed.csv"):
        assert (pipeline / name).exists(), name
    assert (pipeline / "mask.txt").read_text().strip() == "-1 -2 / 0 +1"
    sugeno = json.loads((pipeline / "sugeno.json").read_text())
    assert sugeno["shape"] == [5, 5] and len(sugeno["epoch_history"]) == 10


def test_zero_percent_rows_equal_fis(pipeline, capsys):
    assert main(["sweep", "--workdir", str(pipeline), "--tests", "1000:1299", "--percents", "0"]) == 0
    rep = parse_report((pipeline / "report.tsv").read_text())
    for row in rep["rows"].values():
        assert row == [rep["fis"]]


def test_identify_finds_quality_one(tmp_path, capsys):
    # static plant without noise: the lagged input determines the output class
    steps = [
        ["gen", "--length", "3000", "--feedback", "0", "--noise", "0", "--ripple", "0"],
        ["partition"],
        ["identify", "--depth", "3"],
    ]
    run_pipeline(tmp_path, steps)
    out = capsys.readouterr().out
    assert "mask: 0 0 / -1 0 / 0 +1" in out
    assert "quality: 1.0\n" in out


def test_unknown_flag(tmp_path, capsys):
    assert main(["sweep", "--workdir", str(tmp_path), "--bogus"]) != 0
    assert "usage" in capsys.readouterr().err


def test_missing_artifact(tmp_path, capsys):
    assert main(["extract", "--workdir", str(tmp_path)]) == 1
    assert "prb.json" in capsys.readouterr().err


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# options\nlength = 300\nnoise = 0\n")
    assert main(["gen", "--workdir", str(tmp_path), "--config", str(cfg)]) == 0
    assert len((tmp_path / "data.csv").read_text().splitlines()) == 301
    # the command line wins over the file
    assert main(["gen", "--workdir", str(tmp_path), "--config", str(cfg), "--length", "200"]) == 0
    assert len((tmp_path / "data.csv").read_text().splitlines()) == 201


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("epochs = 3\n")
    assert main(["gen", "--workdir", str(tmp_path), "--config", str(cfg)]) == 1
    assert "epochs" in capsys.readouterr().err


def test_bad_csv_reports_row(tmp_path, capsys):
    (tmp_path / "data.csv").write_text("t,u,y\n0,0.1,0.2\n1,oops,0.3\n")
    assert main(["partition", "--workdir", str(tmp_path)]) == 1
    assert "row 2" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "carfir", "gen", "--length", "50", "--workdir", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and (tmp_path / "data.csv").exists()
