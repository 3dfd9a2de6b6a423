import json
import shutil
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from abcd_oracle import FIG2
from abcdpiml import cli
from abcdpiml.calib import CalibrationResult

SCHEMA = Path(cli.__file__).parent / "data" / "report.schema.json"
REPORT_FILES = ("report.json", "report.md")


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def evaluated(tmp_path_factory, bundled_path):
    first = tmp_path_factory.mktemp("eval1")
    second = tmp_path_factory.mktemp("eval2")
    assert run("evaluate", "--forcing", bundled_path, "--out", first) == 0
    assert run("evaluate", "--forcing", bundled_path, "--out", second) == 0
    return first, second


def test_simulate_matches_oracle_trajectory(tmp_path, bundled_path, data_dir):
    params = ",".join(str(FIG2[k]) for k in "abcd")
    assert run("simulate", "--forcing", bundled_path, "--params", params, "--out", tmp_path) == 0
    got = np.genfromtxt(tmp_path / "trajectory.csv", delimiter=",", names=True, dtype=None, encoding="utf-8")
    ref = np.genfromtxt(data_dir / "golden_trajectory_fig2.csv", delimiter=",", names=True, dtype=None,
                        encoding="utf-8")
    assert got.dtype.names == ref.dtype.names
    assert got["date"].tolist() == ref["date"].tolist()
    for name in ref.dtype.names[1:]:
        np.testing.assert_allclose(got[name], ref[name], rtol=1e-12, atol=1e-12, err_msg=name)


def test_simulate_zero_forcing(tmp_path):
    csv = tmp_path / "zero.csv"
    csv.write_text("date,p_mm,t_c,pet_mm\n" + "".join(f"2000-{m:02d},0,10,0\n" for m in range(1, 13)))
    out = tmp_path / "out"
    code = run("simulate", "--forcing", csv, "--params", "0.9,100,0.5,0.5", "--init-sm", 0, "--init-gw", 0,
               "--out", out)
    assert code == 0
    rows = (out / "trajectory.csv").read_text().splitlines()[1:]
    assert len(rows) == 12
    assert all(set(r.split(",")[1:]) == {"0.0"} for r in rows)


def test_malformed_csv_fails_cleanly(tmp_path, capsys):
    csv = tmp_path / "bad.csv"
    csv.write_text("date,p_mm,t_c,pet_mm\n2000-01,1,10,0\n2000-03,1,10,0\n")
    assert run("simulate", "--forcing", csv, "--params", "0.9,100,0.5,0.5", "--out", tmp_path / "o") != 0
    err = capsys.readouterr().err
    assert err.startswith("error:") and "row 2" in err and "date" in err
    assert not (tmp_path / "o").exists()


def test_missing_latitude_is_reported(tmp_path, capsys):
    csv = tmp_path / "nopet.csv"
    csv.write_text("date,p_mm,t_c\n2000-01,1,10\n2000-02,1,10\n")
    assert run("simulate", "--forcing", csv, "--params", "0.9,100,0.5,0.5", "--out", tmp_path) == 1
    assert "latitude" in capsys.readouterr().err


def test_calibrate_writes_result(tmp_path, bundled_path, capsys):
    assert run("calibrate", "--forcing", bundled_path, "--out", tmp_path) == 0
    printed = json.loads(capsys.readouterr().out)
    saved = json.loads((tmp_path / "calibration.json").read_text())
    assert printed == saved
    result = CalibrationResult.from_dict(saved)
    assert result.train_nse >= 0.999
    assert result.warmup_months == 24


def test_evaluate_report_schema_and_files(evaluated):
    out, _ = evaluated
    doc = json.loads((out / "report.json").read_text())
    jsonschema.validate(doc, json.loads(SCHEMA.read_text()))
    assert doc["split"] == {
        "train_start": "1979-01", "train_end": "2008-12", "test_start": "2009-01", "test_end": "2014-12",
        "warmup_months": 24,
    }
    for kind in ("ridge", "lasso", "gpr"):
        for name in (f"predictions_ml_{kind}_q.csv", f"predictions_piml_{kind}_et.csv",
                     f"predictions_piml_{kind}_q.csv", f"model_piml_{kind}.json"):
            assert (out / name).is_file()
        lines = (out / f"predictions_piml_{kind}_q.csv").read_text().splitlines()
        assert lines[0] == "date,observed,predicted" and len(lines) == 73


def test_evaluate_metrics_are_pinned(evaluated, data_dir):
    # regression pin frozen from a verified run; guards against silent numeric drift
    doc = json.loads((evaluated[0] / "report.json").read_text())
    pin = json.loads((data_dir / "evaluate_expected.json").read_text())
    got = {
        "calibration": doc["calibration"]["params"] | {"train_nse": doc["calibration"]["train_nse"]},
        "abcd": doc["abcd"],
        "ml": {k: v["q"] for k, v in doc["ml"].items()},
        "piml": {k: {"et": v["et"], "q": v["q"]} for k, v in doc["piml"].items()},
    }

    def compare(a, b, path=""):
        if isinstance(b, dict):
            assert set(a) == set(b), path
            for k in b:
                compare(a[k], b[k], f"{path}.{k}")
        else:
            assert a == pytest.approx(b, rel=1e-9, abs=1e-9), path

    compare(got, pin)


def test_evaluate_is_byte_identical(evaluated):
    first, second = evaluated
    names = sorted(p.name for p in first.iterdir())
    assert names == sorted(p.name for p in second.iterdir())
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_evaluate_reuses_calibration(tmp_path, evaluated, bundled_path):
    out, _ = evaluated
    cal = out / "calibration.json"
    assert run("evaluate", "--forcing", bundled_path, "--calibration", cal, "--regressors", "ridge",
               "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    ref = json.loads((out / "report.json").read_text())
    assert doc["piml"]["ridge"] == ref["piml"]["ridge"]
    assert list(doc["ml"]) == ["ridge"]


def test_config_file_and_flag_override(tmp_path, bundled_path):
    shutil.copy(bundled_path, tmp_path / "data.csv")
    (tmp_path / "run.cfg").write_text(
        "# settings\nforcing = data.csv\nout = result\nsplit = 2010-01\nregressors = ridge, lasso\n"
        "grid.ridge.lam = 0.5, 5\nwarmup_months = 12\n"
    )
    args = cli._parser().parse_args(["evaluate", "--config", str(tmp_path / "run.cfg"), "--split", "2011-01"])
    cfg = cli.build_config(args)
    assert cfg.forcing == tmp_path / "data.csv"
    assert cfg.out == tmp_path / "result"
    assert str(cfg.split) == "2011-01"
    assert cfg.regressors == ("ridge", "lasso")
    assert cfg.effective_grids()["ridge"] == {"lam": [0.5, 5.0]}
    assert cfg.warmup_months == 12


@pytest.mark.parametrize("text", ["nonsense", "colour = blue", "grid.svr.c = 1", "split = 2010-13",
                                  "random_free = false"])
def test_config_errors(text):
    with pytest.raises(cli.ConfigError):
        cli.parse_config_text(text)


def test_config_hash_ignores_paths(tmp_path):
    a = cli.RunConfig(forcing=Path("x.csv"), out=Path("o"))
    b = cli.RunConfig(forcing=tmp_path / "y.csv", out=tmp_path)
    assert cli.config_hash(a) == cli.config_hash(b)
    b.k_folds = 4
    assert cli.config_hash(a) != cli.config_hash(b)


def test_gen_synthetic_reproduces_bundled_file(tmp_path, bundled_path):
    assert run("gen-synthetic", "--out", tmp_path) == 0
    assert (tmp_path / "synthetic.csv").read_bytes() == bundled_path.read_bytes()
