import csv
import json

import numpy as np
import pytest
import yaml

from flyqc.cli import main
from flyqc.report import strip_volatile, to_builtin, write_trace

SMALL_RUN = {
    "experiment": {"name": "generate", "shape": {"kind": "exp_decay", "delay_ns": 5.0}},
    "grid": {"T_ns": 200.0, "dt_ns": 1.0},
    "model": {"dim": 3},
    "controls": {"gamma_fixed_MHz": 10.0},
    "optimizer": {"max_iters": 15, "restarts": 2},
}


def _write_config(tmp_path, doc):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(doc))
    return str(path)


def test_simulate_reproduces_analytic_shape(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "results.json").read_text())
    assert doc["metrics"]["max_abs_error_vs_analytic"] <= 1e-9
    assert doc["config"]["experiment"]["shape"]["kind"] == "exp_decay"
    with open(tmp_path / "simulate_trace.csv") as fh:
        header = next(csv.reader(fh))
    assert header[0] == "t_ns" and "xi1_re" in header and "gamma" in header


def test_run_writes_results_traces_and_figures(tmp_path):
    cfg = _write_config(tmp_path, SMALL_RUN)
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "results.json").read_text())
    assert doc["config"]["optimizer"]["max_iters"] == 15
    assert doc["config"]["constraints"]["filter_std_ns"] == 1.0  # defaults echoed
    for key in ("J2", "E_vac", "E_photon", "termination", "wall_time_s"):
        assert key in doc["metrics"]
    trace = out / doc["files"]["traces"]["generate"]
    with open(trace) as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "t_ns"
    assert {"ux", "uy", "gamma", "xi1_re", "xi1_im", "xi1_target"} <= set(rows[0])
    assert len(rows) == 201
    assert all((out / f).stat().st_size > 0 for f in doc["files"]["figures"])
    assert any(f.endswith(".svg") for f in doc["files"]["figures"])


def test_identical_runs_are_identical(tmp_path):
    cfg = _write_config(tmp_path, SMALL_RUN)
    docs = []
    for tag in ("a", "b"):
        assert main(["run", "--config", cfg, "--out", str(tmp_path / tag), "--no-figures"]) == 0
        docs.append(json.loads((tmp_path / tag / "results.json").read_text()))
    assert json.dumps(strip_volatile(docs[0])) == json.dumps(strip_volatile(docs[1]))
    assert (tmp_path / "a" / "generate_trace.csv").read_bytes() == \
        (tmp_path / "b" / "generate_trace.csv").read_bytes()


def test_seed_override_changes_result(tmp_path):
    cfg = _write_config(tmp_path, SMALL_RUN)
    main(["run", "--config", cfg, "--out", str(tmp_path / "a"), "--no-figures", "--seed", "1"])
    main(["run", "--config", cfg, "--out", str(tmp_path / "b"), "--no-figures", "--seed", "2"])
    a = json.loads((tmp_path / "a" / "results.json").read_text())
    b = json.loads((tmp_path / "b" / "results.json").read_text())
    assert a["config"]["optimizer"]["seed"] == 1
    assert a["metrics"]["J2"] != b["metrics"]["J2"]


def test_strict_mode_escalates_tail_warning(tmp_path, capsys):
    doc = dict(SMALL_RUN, grid={"T_ns": 20.0, "dt_ns": 1.0})
    doc["experiment"] = {"name": "generate", "shape": {"kind": "exp_rise"}}
    cfg = _write_config(tmp_path, doc)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o"), "--strict",
                 "--no-figures"]) == 3
    assert "TailWarning" in capsys.readouterr().err


def test_invalid_config_exit_code(tmp_path, capsys):
    cfg = _write_config(tmp_path, {"grid": {"dt_ns": -1.0}})
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_unknown_experiment_rejected(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--experiment", "nope", "--out", str(tmp_path)])
    assert exc.value.code != 0
    cfg = _write_config(tmp_path, {"experiment": {"name": "nope"}})
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_gradcheck_small(tmp_path, capsys):
    assert main(["gradcheck", "--steps", "20", "--dt", "0.5", "--out", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert "J1_QSDE" in text and "J3" in text and "pullback error" in text
    rep = json.loads((tmp_path / "gradcheck.json").read_text())
    assert set(rep["J3"]["ratio"]) == {"ux", "uy", "gamma", "all"}


def test_trace_precision_and_complex_split(tmp_path):
    path = tmp_path / "t.csv"
    x = np.array([1 / 3, np.pi])
    write_trace(path, {"t_ns": [0.0, 1.0], "a": x, "z": x * (1 + 2j)})
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t_ns", "a", "z_re", "z_im"]
    assert float(rows[1][1]) == x[0]
    assert float(rows[2][3]) == 2 * np.pi
    with pytest.raises(ValueError):
        write_trace(path, {"t_ns": [0.0], "a": [1.0, 2.0]})


def test_to_builtin():
    doc = to_builtin({"a": np.float64(1.5), "b": np.arange(2), "c": 1 + 2j, "d": np.bool_(True)})
    assert doc == {"a": 1.5, "b": [0, 1], "c": {"re": 1.0, "im": 2.0}, "d": True}
    assert strip_volatile({"x": 1, "wall_time_s": 2, "n": [{"timestamp": 0, "y": 1}]}) == \
        {"x": 1, "n": [{"y": 1}]}
