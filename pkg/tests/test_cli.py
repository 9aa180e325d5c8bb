import io
import json
import os

import numpy as np
import pytest

from conftest import FIXTURES
from nrpredict import _accel
from nrpredict.cli import load_run_config, main, run_stream
from nrpredict.errors import ConfigError, SchemaMismatch
from nrpredict.ingest import derive_features, parse_csv_trace, write_csv
from nrpredict.models import HyperParams, default_hyper, fit_model, load_model, save_model
from nrpredict.synthgen import GeneratorConfig, generate_trace


def cli(capsys, *argv):
    code = main(["-q", *argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def small_trace(tmp_path_factory):
    d = tmp_path_factory.mktemp("trace")
    path = d / "trace.csv"
    write_csv(generate_trace(GeneratorConfig(n_samples=600, seed=5)), path)
    return path


def test_synth_count_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli(capsys, "synth", "--n", "300", "--seed", "42", "--out", str(a))[0] == 0
    assert cli(capsys, "synth", "--n", "300", "--seed", "42", "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(parse_csv_trace(a)) == 300
    meta = json.loads((tmp_path / "a.csv.meta.json").read_text())
    assert meta["config"]["mobility"] is False


def test_synth_mobility_recorded(tmp_path, capsys):
    cli(capsys, "synth", "--n", "20", "--mobility", "--out-dir", str(tmp_path))
    meta = json.loads((tmp_path / "trace.csv.meta.json").read_text())
    assert meta["config"]["mobility"] is True


def test_train_writes_model(tmp_path, capsys, small_trace):
    code, out, _ = cli(capsys, "train", "--model", "lgbm", "--target", "throughput", "--in", str(small_trace),
                       "--out-dir", str(tmp_path))
    assert code == 0 and "R2" in out and "RMSE" in out
    m = load_model(tmp_path / "model_lgbm_style_throughput.json")
    assert m.target_kind == "throughput" and m.model_kind == "lgbm_style"


def test_train_bler_features(tmp_path, capsys, small_trace):
    out = tmp_path / "m.json"
    assert cli(capsys, "train", "--model", "tree", "--target", "bler", "--in", str(small_trace), "--out", str(out))[0] == 0
    assert load_model(out).scaler.feature_names == ("cqi", "mcs", "tti", "brate")


def test_missing_input_is_io_error(tmp_path, capsys):
    code, _, err = cli(capsys, "train", "--in", str(tmp_path / "nope.csv"))
    assert code != 0
    assert err.startswith("IoError:")


def test_bad_config_reported(tmp_path, capsys, small_trace):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"colours": 1}')
    code, _, err = cli(capsys, "--config", str(cfg), "train", "--in", str(small_trace))
    assert code == 1 and err.startswith("ConfigError:")


def test_run_config_sections(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"generator": {"n_samples": 50}, "split": {"train_fraction": 0.7},
                               "hyper": {"*": {"seed": 3}, "lgbm": {"n_trees": 7}}, "window": 10}))
    rc = load_run_config(str(cfg), None)
    assert rc.generator.n_samples == 50 and rc.split.train_fraction == 0.7 and rc.window == 10
    h = rc.hyper_for("lgbm_style", None)
    assert h.n_trees == 7 and h.seed == 3
    assert rc.hyper_for("tree", 11).seed == 11
    rc2 = load_run_config(str(cfg), 99)
    assert rc2.generator.seed == 99 and rc2.split.seed == 99
    with pytest.raises(ConfigError):
        cfg.write_text('{"hyper": {"lgbm": {"depth": 2}}}')
        load_run_config(str(cfg), None).hyper_for("lgbm", None)


def test_eval_outputs(tmp_path, capsys, small_trace):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"hyper": {"*": {"n_trees": 5}}}))
    code, out, _ = cli(capsys, "--config", str(cfg), "eval", "--in", str(small_trace), "--target", "bler",
                       "--out-dir", str(tmp_path / "o"))
    assert code == 0 and "lgbm_style" in out
    files = set(os.listdir(tmp_path / "o"))
    assert {"report_bler.json", "report_bler.txt"} <= files
    for kind in ("linear", "tree", "random_forest", "xgb_style", "lgbm_style"):
        assert f"scatter_bler_{kind}.csv" in files and f"errors_bler_{kind}.csv" in files
    doc = json.loads((tmp_path / "o" / "report_bler.json").read_text())
    assert [r["model_kind"] for r in doc["table"]] == ["linear", "tree", "random_forest", "xgb_style", "lgbm_style"]
    assert doc["config"]["hyper_effective"]["lgbm_style"]["n_trees"] == 5
    code, out, _ = cli(capsys, "report", str(tmp_path / "o" / "report_bler.json"))
    assert code == 0 and "feature importance" in out


def test_ingest_console(tmp_path, capsys):
    out = tmp_path / "c.csv"
    code, text, _ = cli(capsys, "ingest", "--in", os.path.join(FIXTURES, "gnb_table.log"), "--out", str(out))
    assert code == 0 and "ingested 5 samples" in text
    ds = parse_csv_trace(out)
    assert sorted(s.bler for s in ds) == [0.0, 0.0, 0.05, 0.1, 0.2]


def _stream_model(tmp_path, noiseless=False, n=400):
    cfg = GeneratorConfig(n_samples=n, seed=8, label_noise_std=0.0 if noiseless else 1.0)
    ds = generate_trace(cfg)
    trace = tmp_path / "s.csv"
    write_csv(ds, trace)
    hyper = HyperParams(max_depth=None, min_samples_leaf=1) if noiseless else default_hyper("tree")
    model = fit_model("tree", derive_features(ds, "throughput"), hyper)
    path = tmp_path / "m.json"
    save_model(model, path)
    return trace, path


def test_stream_one_line_per_row(tmp_path, capsys):
    trace, model = _stream_model(tmp_path)
    lines = trace.read_text().splitlines()[:6]  # header + 5 rows
    five = tmp_path / "five.csv"
    five.write_text("\n".join(lines) + "\n")
    code, out, err = cli(capsys, "predict-stream", "--model", str(model), "--in", str(five))
    assert code == 0
    rows = out.splitlines()
    assert len(rows) == 5
    for row in rows:
        ts, actual, pred, abs_err = row.split(",")
        assert float(abs_err) == pytest.approx(abs(float(actual) - float(pred)))


def test_stream_noiseless_memorized(tmp_path, capsys):
    trace, model = _stream_model(tmp_path, noiseless=True)
    code, out, err = cli(capsys, "predict-stream", "--model", str(model), "--in", str(trace), "--window", "100")
    assert code == 0
    rows = out.splitlines()
    assert len(rows) == 400
    assert max(float(r.split(",")[3]) for r in rows) < 1e-6
    rolling = [l for l in err.splitlines() if l.startswith("rolling_r2")]
    assert len(rolling) == 4 and rolling[-1].endswith("r2=1.0000")


def test_stream_skips_bad_rows(tmp_path):
    trace, model_path = _stream_model(tmp_path, n=10)
    lines = trace.read_text().splitlines()
    lines.insert(3, "5,0,99,1,1,1.0,1,0,0.0,1.0")
    out, err = io.StringIO(), io.StringIO()
    stats = run_stream(load_model(model_path), iter(l + "\n" for l in lines), out, err)
    assert stats.n == 10 and stats.skipped == 1
    assert "RowParseError" in err.getvalue()


def test_stream_console_input(tmp_path):
    _, model_path = _stream_model(tmp_path, n=50)
    out, err = io.StringIO(), io.StringIO()
    with open(os.path.join(FIXTURES, "gnb_table.log"), encoding="utf-8") as fh:
        stats = run_stream(load_model(model_path), fh, out, err, fmt="console", window=2)
    assert stats.n == 5 and len(out.getvalue().splitlines()) == 5
    assert err.getvalue().count("rolling_r2") == 2


def test_stream_schema_mismatch(tmp_path):
    trace = tmp_path / "s.csv"
    ds = generate_trace(GeneratorConfig(n_samples=30, seed=1))
    write_csv(ds, trace)
    model = fit_model("linear", derive_features(ds, "bler"))
    model.target_kind = "throughput"
    with pytest.raises(SchemaMismatch):
        run_stream(model, iter([]), io.StringIO(), io.StringIO())


def test_numpy_backend_flag(tmp_path, capsys, small_trace):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["train", "--model", "xgb", "--in", str(small_trace)]
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"hyper": {"xgb": {"n_trees": 10}}}))
    prev = _accel.backend()
    try:
        assert cli(capsys, "--config", str(cfg), "--backend", "numpy", *args, "--out", str(a))[0] == 0
        assert cli(capsys, "--config", str(cfg), "--backend", "numba", *args, "--out", str(b))[0] == 0
    finally:
        _accel.set_backend(prev)
    assert a.read_bytes() == b.read_bytes()
    assert np.isfinite(load_model(a).base_score)
