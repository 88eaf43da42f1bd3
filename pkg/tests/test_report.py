import csv
import json

import pytest

from lrdlab.errors import DataError
from lrdlab.experiments import default_plan, run_experiment
from lrdlab.report import format_report, load_report, report_to_json, write_columns, write_report


@pytest.fixture(scope="module")
def report():
    plan = default_plan("coupling_rate_S", truncation=512, replicates=4,
                        horizons=(128, 256, 512, 1024))
    return run_experiment(plan)


def test_write_and_load(tmp_path, report):
    paths = write_report(report, tmp_path)
    assert paths["figure"].exists() and paths["figure"].stat().st_size > 1000
    data = json.loads(paths["report"].read_text())
    for key in ("plan", "seeds", "stats", "slopes", "flags", "tolerances", "version",
                "config_hash", "timestamp", "passed"):
        assert key in data
    back = load_report(paths["report"])
    assert back.flags == report.flags and back.stats == report.stats
    with open(paths["replicates"]) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    assert float(rows[2]["resid_T256"]) == report.raw["resid_T256"][2]


def test_json_is_deterministic_apart_from_timestamp(report):
    plan = default_plan("coupling_rate_S", truncation=512, replicates=4,
                        horizons=(128, 256, 512, 1024))
    again = run_experiment(plan)
    a, b = json.loads(report_to_json(report)), json.loads(report_to_json(again))
    a.pop("timestamp"), b.pop("timestamp")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_format_report(report):
    text = format_report(report)
    assert "coupling_rate_S" in text and "slope residual" in text


def test_bad_report_file(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("not json")
    with pytest.raises(DataError):
        load_report(p)
    p.write_text('{"plan": {}}')
    with pytest.raises(DataError):
        load_report(p)


def test_write_columns(tmp_path):
    p = write_columns(tmp_path / "c.csv", {"index": [1, 2], "value": [0.1, None]})
    assert p.read_text() == "index,value\n1,0.1\n2,\n"
    with pytest.raises(DataError):
        write_columns(tmp_path / "d.csv", {"a": [1], "b": [1, 2]})


@pytest.mark.parametrize("kind", ["variance_asymptote", "identity_sweep", "bk_marginal",
                                  "reduction_residual"])
def test_figures_for_each_kind(tmp_path, kind):
    kw = dict(replicates=3, truncation=256)
    if kind == "variance_asymptote":
        kw = dict(truncation=1024, horizons=(64, 128, 256))
    elif kind == "reduction_residual":
        kw["horizons"] = (64, 128, 256)
    else:
        kw["n"] = 128
    paths = write_report(run_experiment(default_plan(kind, **kw)), tmp_path)
    assert paths["figure"].exists()
