import xml.etree.ElementTree as ET

import pytest

from linfest.errors import CsvParseError
from linfest.experiments import CSV_HEADER, ExperimentConfig, run_experiment
from linfest.plot import emit_plot, read_records, summarize

SVG = "{http://www.w3.org/2000/svg}"


def _write(path, rows):
    path.write_text(CSV_HEADER + "\n" + "".join(r + "\n" for r in rows))
    return path


def test_empty_record_set_writes_nothing(tmp_path):
    out = tmp_path / "plot.svg"
    with pytest.raises(CsvParseError):
        emit_plot(_write(tmp_path / "a.csv", []), out)
    assert not out.exists()
    (tmp_path / "b.csv").write_text("")
    with pytest.raises(CsvParseError):
        emit_plot(tmp_path / "b.csv", out)
    assert not out.exists()


def test_malformed_line_number(tmp_path):
    path = _write(tmp_path / "a.csv", ["x,10,10,0,1,p=5,5,0.1,0.2,0",
                                       "x,10,10,1,1,p=5,5,oops,0.2,0"])
    with pytest.raises(CsvParseError) as info:
        read_records(path)
    assert info.value.line == 3 and "line 3" in str(info.value)
    path = _write(tmp_path / "b.csv", ["x,10,10,0,1,p=5"])
    with pytest.raises(CsvParseError) as info:
        read_records(path)
    assert info.value.line == 2
    (tmp_path / "c.csv").write_text("a,b\n")
    with pytest.raises(CsvParseError) as info:
        read_records(tmp_path / "c.csv")
    assert info.value.line == 1


def test_single_point_series_has_markers_only(tmp_path):
    path = _write(tmp_path / "a.csv", ["x,100,100,0,1,Wiener,,0.3,0.4,0",
                                       "x,100,100,1,1,Wiener,,0.5,0.6,0"])
    svg = emit_plot(path, tmp_path / "p.svg").read_text()
    root = ET.fromstring(svg)
    assert not root.findall(f".//{SVG}polyline")
    assert len(root.findall(f".//{SVG}circle")) == 1


def test_summary_mean_and_se(tmp_path):
    path = _write(tmp_path / "a.csv", ["x,100,100,0,1,W1,,1.0,1,0", "x,100,100,1,1,W1,,3.0,1,0",
                                       "x,10,10,0,1,W1,,2.0,1,0"])
    series = summarize(read_records(path))
    assert series == {"W1": [(10, 2.0, 0.0), (100, 2.0, 1.0)]}


def test_sweep_csv_gives_labeled_series(tmp_path):
    cfg = ExperimentConfig.from_dict({
        "experiment": "popt-sweep", "prior": {"kind": "sparse_gaussian", "s": 0.05, "mu_x": 1.0},
        "snr_db": 20, "N": [100, 300], "p": [5, 10, 15], "estimators": ["wiener", "lp"],
        "trials": 3, "seed": 1})
    csv_file = tmp_path / "sweep.csv"
    run_experiment(cfg, out_path=csv_file)
    svg = emit_plot(csv_file, tmp_path / "sweep.svg", title="sweep").read_text()
    root = ET.fromstring(svg)
    groups = root.findall(f".//{SVG}g[@class='series']")
    assert [g.get("data-label") for g in groups] == ["Wiener", "p=5", "p=10", "p=15"]
    assert all(len(g.findall(f"{SVG}polyline")) == 1 for g in groups)
