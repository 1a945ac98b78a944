import csv
import io
import json

import numpy as np
import pytest

from ttdisc.cli import main
from ttdisc.experiment import (
    CONFIG_PARSERS,
    CSV_HEADER,
    METHODS,
    ExperimentConfig,
    build_estimator,
    load_config,
    model_features,
    run,
    sweep,
    write_results,
)
from ttdisc.io import write_tten

SMALL = dict(synth_shape=(3, 4, 3), synth_ranks=(1, 2, 2, 1), synth_per_class=10)


def small(**kw):
    return ExperimentConfig(**{**SMALL, "repeats": 2, **kw})


def csv_rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_config_defaults_follow_protocol():
    c = ExperimentConfig()
    assert c.tt_tol == 0.1 and c.tt_max_iter == 200
    assert c.cmda_tol == 0.1 and c.cmda_max_iter == 20
    assert c.repeats == 10 and c.train_fraction == 0.5
    assert c.lambda_grid[0] == pytest.approx(0.1) and c.lambda_grid[-1] == pytest.approx(1000)


def test_config_file_and_overrides(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("# comment\nmethod = 2wttda\ntau=0.7  # trailing\nlambda=auto\n"
                 "reshape=8x8\nrecord_time=false\n")
    c = load_config(p, ["tau=0.5", "tt-max-iter=7"])
    assert c.method == "2wttda" and c.tau == 0.5 and c.lam == "auto"
    assert c.reshape == (8, 8) and c.record_time is False and c.tt_max_iter == 7
    for bad in (["colour=red"], ["method=svm"], ["tau=2"], ["lambda=-1"], ["repeats"]):
        with pytest.raises(ValueError):
            load_config(None, bad)


def test_every_field_is_configurable():
    import dataclasses

    assert {f.name for f in dataclasses.fields(ExperimentConfig)} == set(CONFIG_PARSERS)


def test_build_estimator_per_method():
    data = np.random.default_rng(0).standard_normal((6, 3, 4, 3))
    names = {"lda": "LDA", "cmda": "CMDA", "dgtda": "DGTDA", "ttda": "TTDA",
             "2wttda": "TwoWayTTDA", "3wttda": "ThreeWayTTDA"}
    for m in METHODS:
        est = build_estimator(ExperimentConfig(method=m, tau=0.5), data)
        assert type(est).__name__ == names[m]
    est = build_estimator(ExperimentConfig(method="cmda", tau=0.5, cmda_max_iter=4), data)
    assert est.max_iter == 4 and est.tol == 0.1
    est = build_estimator(ExperimentConfig(method="2wttda", ranks="2,3;2,3"))
    assert est.ranks == [[2, 3], [2, 3]]
    with pytest.raises(ValueError):
        build_estimator(ExperimentConfig(method="ttda"))


def test_noiseless_run_is_perfect():
    r = run(small(method="ttda", ranks="2,2,3", synth_sigma=1e-12))
    assert r["accuracy_mean"] == 1.0 and r["accuracy_std"] == 0.0
    assert r["error"] is None and r["objective"]


def test_run_csv_is_deterministic(tmp_path):
    cfg = small(method="ttda", tau=0.7, repeats=10, record_time=False)
    run(cfg.replace(output=str(tmp_path / "a.csv")))
    run(cfg.replace(output=str(tmp_path / "b.csv")))
    a = (tmp_path / "a.csv").read_text()
    assert a == (tmp_path / "b.csv").read_text()
    rows = csv_rows(a)
    assert tuple(rows[0]) == CSV_HEADER
    assert rows[0] == "method,tau,ranks,lambda,storage_norm,accuracy_mean,accuracy_std,train_seconds,seed".split(",")
    assert rows[1][0] == "ttda" and rows[1][7] == ""


def test_auto_lambda_is_from_grid():
    r = run(small(method="lda", tau=0.5, lam="auto", lambda_grid=(0.1, 10.0), lambda_trials=2))
    assert r["lambda"] in (0.1, 10.0)


def test_tau_sweep_storage_monotone(tmp_path):
    out = tmp_path / "s.csv"
    recs = sweep(small(output=str(out)), taus=[0.9, 0.7, 0.5, 0.3])
    rows = csv_rows(out.read_text())
    assert len(rows) == 5
    assert [float(r[1]) for r in rows[1:]] == [0.9, 0.7, 0.5, 0.3]
    storage = [r["storage_norm"] for r in recs]
    assert all(b >= a for a, b in zip(storage, storage[1:]))
    assert all(s <= 1 for s in storage)


def test_one_point_sweep_equals_run():
    cfg = small(method="2wttda", tau=0.7, record_time=False)
    (rec,) = sweep(cfg)
    ref = run(cfg)
    assert {k: rec[k] for k in CSV_HEADER} == {k: ref[k] for k in CSV_HEADER}


def test_method_tags_and_parallel_order():
    cfg = small(record_time=False)
    seq = sweep(cfg, taus=[0.9, 0.5], methods=["ttda", "2wttda", "3wttda"])
    par = sweep(cfg.replace(workers=2), taus=[0.9, 0.5], methods=["ttda", "2wttda", "3wttda"])
    assert [r["method"] for r in seq] == ["ttda"] * 2 + ["2wttda"] * 2 + ["3wttda"] * 2
    strip = lambda rs: [{k: r[k] for k in CSV_HEADER} for r in rs]
    assert strip(seq) == strip(par)


def test_failed_point_is_recorded(tmp_path):
    out = tmp_path / "f.csv"
    recs = sweep(small(method="ttda", output=str(out)), ranks=["2,2,3", "2,3"])
    assert recs[0]["error"] is None and recs[1]["error"]
    rows = csv_rows(out.read_text())
    assert len(rows) == 3 and rows[2][5] == ""
    assert "2,3" in (tmp_path / "f.csv.errors").read_text()


def test_write_results_stream():
    buf = io.StringIO()
    write_results([{"method": "lda", "tau": 0.5, "seed": 1}], buf)
    rows = csv_rows(buf.getvalue())
    assert rows[1] == ["lda", "0.5", "", "", "", "", "", "", "1"]


def test_model_export_reproduces_features(tmp_path):
    for m, extra in [("ttda", {}), ("2wttda", {}), ("lda", {}), ("dgtda", {})]:
        d = tmp_path / m
        r = run(small(method=m, tau=0.7, repeats=1, model_dir=str(d), **extra))
        F, train_f, train_y, manifest = model_features(d, np.zeros((2, 3, 4, 3)))
        assert F.shape == (2, train_f.shape[1]) and len(train_y) == 15
        assert manifest["objective"] == r["objective"]


# command line


def cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_synth_train_eval(tmp_path, capsys):
    data = tmp_path / "data"
    code, out, _ = cli(capsys, "synth", "--output", str(data), "--shape", "3,4,3",
                       "--ranks", "1,2,2,1", "--per-class", "6", "--sigma", "1e-9")
    assert code == 0 and json.loads(out)["samples"] == 18
    model = tmp_path / "model"
    trace = tmp_path / "trace.csv"
    code, out, _ = cli(capsys, "train", "--source", str(data), "--method", "ttda",
                       "--ranks", "2,2,3", "--repeats", "2", "--model-dir", str(model),
                       "--trace", str(trace), "--lambda", "2")
    rows = csv_rows(out)
    assert code == 0 and tuple(rows[0]) == CSV_HEADER and rows[1][3] == "2.0"
    assert rows[1][5] == "1.0"
    assert csv_rows(trace.read_text())[0] == ["update", "objective"]
    code, out, _ = cli(capsys, "eval", "--model", str(model), "--data", str(data))
    assert code == 0 and json.loads(out)["accuracy"] == 1.0


def test_cli_decompose(tmp_path, capsys):
    t = np.random.default_rng(0).standard_normal((3, 4, 2))
    write_tten(tmp_path / "t.tten", t)
    code, out, _ = cli(capsys, "decompose", str(tmp_path / "t.tten"), "--tau", "1e-12",
                       "--output", str(tmp_path / "c.ttc"))
    res = json.loads(out)
    assert code == 0 and res["relative_error"] <= 1e-8 and res["ranks"][0] == 1
    assert (tmp_path / "c.ttc").exists()
    code, out, _ = cli(capsys, "decompose", str(tmp_path / "t.tten"), "--ranks", "1,1,1")
    assert code == 0 and json.loads(out)["ranks"] == [1, 1, 1, 1]


def test_cli_sweep_and_bench(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("synth_shape=3,4,3\nsynth_ranks=1,2,2,1\nsynth_per_class=6\nrepeats=1\n")
    code, out, err = cli(capsys, "sweep", "--config", str(cfg), "--taus", "0.9,0.5",
                         "--methods", "ttda,cmda")
    rows = csv_rows(out)
    assert code == 0 and [r[0] for r in rows[1:]] == ["ttda", "ttda", "cmda", "cmda"]
    code, out, err = cli(capsys, "sweep", "--config", str(cfg), "--rank-grid", "2,2,3",
                         "--rank-grid", "2,3")
    assert code == 0 and json.loads(err.strip().splitlines()[-1])["error"] == "point_failed"
    code, out, _ = cli(capsys, "bench", "--config", str(cfg), "--set", "tau=0.7")
    rows = csv_rows(out)
    assert code == 0 and [r[0] for r in rows[1:]] == ["ttda", "2wttda", "3wttda"]
    assert all(float(r[7]) > 0 for r in rows[1:])


def test_cli_errors(tmp_path, capsys):
    code, _, err = cli(capsys, "train", "--method", "svm")
    assert code == 1 and json.loads(err)["error"] == "ValueError"
    code, _, err = cli(capsys, "train", "--source", str(tmp_path / "nope"), "--tau", "0.5")
    assert code == 1 and json.loads(err)["error"] == "FileNotFoundError"
    code, _, err = cli(capsys, "decompose", str(tmp_path / "missing.tten"), "--tau", "0.5")
    assert code == 1
