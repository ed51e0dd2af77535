import csv
import dataclasses
import json
import subprocess
import sys

import numpy as np
import pytest

from pennmm.cli import RunConfig, _write_manifest, main, read_csv, write_csv
from pennmm.likelihood import Dataset
from pennmm.simulation import GeneratorSpec, simulate


def read_tsv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


def irls_logistic(X, y, iters=100):
    """Textbook Newton/IRLS for the logistic MLE (independent oracle)."""
    b = np.zeros(X.shape[1])
    for _ in range(iters):
        p = 1 / (1 + np.exp(-(X @ b)))
        W = p * (1 - p)
        step = np.linalg.solve((X.T * W) @ X, X.T @ (y - p))
        b = b + step
        if np.max(np.abs(step)) < 1e-14:
            break
    return b


@pytest.fixture
def logistic_csv(tmp_path):
    data = simulate(GeneratorSpec("logistic2"), 0).fit_data
    path = tmp_path / "logit.csv"
    write_csv(data, path)
    return data, str(path)


@pytest.fixture
def cox_csv(tmp_path):
    data = simulate(GeneratorSpec("cox3"), 1).fit_data
    path = tmp_path / "cox.csv"
    write_csv(data, path)
    return data, str(path)


class TestCsv:
    def test_round_trip_bit_exact(self, logistic_csv, cox_csv):
        for data, path in (logistic_csv, cox_csv):
            fam = "cox" if data.status is not None else "logistic"
            back = read_csv(path, fam)
            assert np.array_equal(back.design, data.design)
            assert np.array_equal(back.response, data.response)
            if data.status is not None:
                assert np.array_equal(back.status, data.status)
            assert back.column_names == data.column_names

    def test_malformed_row_cites_line(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("y,x1,x2\n1,2,3\n0,oops,1\n")
        assert main(["fit", "--input-path", str(p), "--lambda", "0.1", "--output-dir", str(tmp_path)]) == 2
        assert "line 3" in capsys.readouterr().err

    def test_wrong_field_count(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("y,x1,x2\n1,2\n")
        assert main(["fit", "--input-path", str(p), "--lambda", "0.1"]) == 2
        assert "line 2" in capsys.readouterr().err

    def test_cox_header_required(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_text("t,d,x\n1,1,0.5\n")
        assert main(["fit", "--input-path", str(p), "--family", "cox", "--lambda", "0.1"]) == 2

    def test_missing_file(self, tmp_path, capsys):
        assert main(["fit", "--input-path", str(tmp_path / "nope.csv"), "--lambda", "0.1"]) == 2
        assert "not found" in capsys.readouterr().err


class TestFit:
    def test_unpenalized_matches_external_ols(self, tmp_path, rng):
        X = rng.standard_normal((50, 3))
        y = X @ [1.0, -2.0, 0.5] + rng.standard_normal(50)
        path = tmp_path / "lin.csv"
        write_csv(Dataset(X, y), path)
        out = tmp_path / "o"
        assert main(["fit", "--input-path", str(path), "--lambda", "0", "--output-dir", str(out)]) == 0
        est = np.array([float(r["estimate"]) for r in read_tsv(out / "coefficients.tsv")])
        ols = np.linalg.lstsq(X, y, rcond=None)[0]
        assert np.allclose(est, ols, atol=1e-8, rtol=0)

    def test_unpenalized_matches_external_logistic(self, logistic_csv, tmp_path):
        data, path = logistic_csv
        out = tmp_path / "o"
        assert main(["fit", "--input-path", path, "--family", "logistic", "--lambda", "0", "--output-dir", str(out)]) == 0
        est = np.array([float(r["estimate"]) for r in read_tsv(out / "coefficients.tsv")])
        assert np.allclose(est, irls_logistic(data.design, data.response), atol=1e-8, rtol=0)

    def test_outputs_and_manifest(self, cox_csv, tmp_path):
        _, path = cox_csv
        out = tmp_path / "o"
        assert main(["fit", "--input-path", path, "--family", "cox", "--lambda", "0.15", "--output-dir", str(out)]) == 0
        coef = read_tsv(out / "coefficients.tsv")
        assert list(coef[0]) == ["name", "estimate", "se", "active"]
        assert {r["active"] for r in coef} <= {"0", "1"}
        trace = read_tsv(out / "trace.tsv")
        assert list(trace[0]) == ["iteration", "q_eps", "alpha", "grad_max"]
        q = np.array([float(r["q_eps"]) for r in trace])
        assert np.all(np.diff(q) > -1e-12 * np.abs(q[:-1]))
        man = json.loads((out / "manifest.json").read_text())
        assert float(man["result"]["epsilon"]) > 0
        assert man["config"]["lam"] == 0.15 and len(man["input_sha256"]) == 64

    def test_rerun_byte_identical(self, logistic_csv, tmp_path):
        _, path = logistic_csv
        outs = []
        for k in range(2):
            out = tmp_path / "same"
            assert main(["fit", "--input-path", path, "--family", "logistic", "--lambda", "0.1", "--output-dir", str(out)]) == 0
            outs.append({f: (out / f).read_bytes() for f in ("coefficients.tsv", "trace.tsv", "manifest.json")})
        assert outs[0] == outs[1]

    def test_nonconvergence_exit_code(self, logistic_csv, tmp_path, capsys):
        _, path = logistic_csv
        code = main(["fit", "--input-path", path, "--family", "logistic", "--lambda", "0.1",
                     "--max-iter", "1", "--output-dir", str(tmp_path)])
        assert code == 1
        assert "max_iter" in capsys.readouterr().err

    def test_bad_option_values(self, logistic_csv):
        _, path = logistic_csv
        assert main(["fit", "--input-path", path, "--lambda", "0.1", "--penalty", "scad", "--a", "1.5"]) == 2
        assert main(["fit", "--input-path", path, "--family", "gamma", "--lambda", "0.1"]) == 2
        assert main(["fit", "--input-path", path]) == 2


class TestOtherCommands:
    def test_select(self, logistic_csv, tmp_path):
        _, path = logistic_csv
        out = tmp_path / "s"
        assert main(["select", "--input-path", path, "--family", "logistic", "--grid", "0.01:0.3:6", "--output-dir", str(out)]) == 0
        rows = read_tsv(out / "gcv.tsv")
        assert len(rows) == 6
        man = json.loads((out / "manifest.json").read_text())
        assert man["result"]["chosen_lambda"] in [r["lambda"] for r in rows]

    def test_diagnose(self, tmp_path, rng):
        X = rng.standard_normal((60, 3))
        path = tmp_path / "lin.csv"
        write_csv(Dataset(X, X @ [2.0, 0.3, 1.0] + 0.5 * rng.standard_normal(60)), path)
        out = tmp_path / "d"
        assert main(["diagnose", "--input-path", str(path), "--penalty", "l1", "--lambda", "0.1",
                     "--max-iter", "5000", "--output-dir", str(out)]) == 0
        eig = np.array([float(r["eigenvalue"]) for r in read_tsv(out / "eigenvalues.tsv")])
        assert np.all(eig >= -1e-12) and np.all(eig < 1)
        man = json.loads((out / "manifest.json").read_text())
        assert abs(float(man["result"]["rho"]) - float(man["result"]["empirical_ratio"])) < 0.1

    def test_simulate_roster(self, tmp_path, capsys):
        out = tmp_path / "sim"
        code = main(["simulate", "logistic2", "--rho", "0.25", "--replicates", "2", "--mc-draws", "1000",
                     "--grid", "0.02:0.3:4", "--output-dir", str(out)])
        assert code == 0
        rows = read_tsv(out / "logistic2.tsv")
        assert [r["method"] for r in rows] == ["New", "LQA", "AIC", "BIC", "Oracle"]
        assert float(rows[-1]["I"]) == 0
        assert (out / "logistic2_spec.txt").exists()

    def test_seed_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PENNMM_SEED", "77")
        out = tmp_path / "e"
        assert main(["simulate", "cox3", "--replicates", "1", "--mc-draws", "500", "--grid", "0.05:0.2:2",
                     "--methods", "Oracle", "--output-dir", str(out)]) == 0
        assert json.loads((out / "manifest.json").read_text())["config"]["seed"] == 77
        monkeypatch.setenv("PENNMM_SEED", "x")
        assert main(["simulate", "cox3", "--replicates", "1", "--output-dir", str(out)]) == 2

    def test_simulate_unknown_method(self, tmp_path):
        assert main(["simulate", "cox3", "--methods", "Lasso", "--output-dir", str(tmp_path)]) == 2

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "pennmm", "--help"], capture_output=True, text=True)
        assert res.returncode == 0 and "simulate" in res.stdout


def test_manifest_records_every_config_field(tmp_path):
    src = tmp_path / "in.csv"
    src.write_text("y,x\n1,2\n")
    base = RunConfig(command="fit", input_path=None, lam=0.1, output_dir=str(tmp_path))
    _write_manifest(base, {})
    ref = (tmp_path / "manifest.json").read_text()
    bumped = {
        str: lambda v: (v or "") + "_x",
        int: lambda v: (v or 0) + 1,
        float: lambda v: (v or 0.0) + 0.5,
    }
    for f in dataclasses.fields(RunConfig):
        if f.name == "output_dir":
            continue
        cur = getattr(base, f.name)
        if isinstance(cur, list):
            new = cur[:-1]
        elif cur is None:
            new = {"lam": 1.25, "rho": 0.3, "n": 7, "input_path": str(src)}.get(f.name, "alt")
        else:
            new = bumped[type(cur)](cur)
        cfg = dataclasses.replace(base, **{f.name: new})
        _write_manifest(cfg, {})
        assert (tmp_path / "manifest.json").read_text() != ref, f.name
