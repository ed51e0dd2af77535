import json
import math

import numpy as np
import pytest

from pennmm.simulation import (
    TSV_COLUMNS,
    GeneratorSpec,
    MethodOutcome,
    covariance,
    draw_covariates,
    gen_cox,
    gen_cox_misspecified,
    gen_linear,
    gen_logistic,
    model_error,
    run_experiment,
    run_replicate,
    simulate,
    summarize,
    true_beta,
)


class TestSpec:
    def test_defaults(self):
        assert (GeneratorSpec("logistic2").n, GeneratorSpec("logistic2").rho) == (200, 0.25)
        assert GeneratorSpec("cox3").d == 8 and GeneratorSpec("linear1").n == 100

    def test_invalid(self):
        for kw in ({"rho": 1.0}, {"replicates": 0}, {"censoring": "x"}):
            with pytest.raises(ValueError):
                GeneratorSpec("logistic2", **kw)
        with pytest.raises(ValueError):
            GeneratorSpec("example5")

    def test_generator_family_guard(self):
        with pytest.raises(ValueError):
            gen_logistic(GeneratorSpec("cox3"))


class TestGenerators:
    def test_true_zero_counts(self):
        assert np.sum(gen_logistic(GeneratorSpec("logistic2"))[1] == 0) == 6
        assert np.sum(gen_linear(GeneratorSpec("linear1"))[1] == 0) == 6
        assert list(gen_cox(GeneratorSpec("cox3"))[1]) == [0.8, 0, 0, 1, 0, 0, 0.6, 0]

    def test_bit_identical_by_seed(self):
        s = GeneratorSpec("cox3", seed=99)
        a, b = gen_cox(s, 3)[0], gen_cox(s, 3)[0]
        assert np.array_equal(a.design, b.design) and np.array_equal(a.response, b.response)
        assert not np.array_equal(a.design, gen_cox(s, 4)[0].design)

    @pytest.mark.parametrize("rho", [0.25, 0.75])
    def test_constant_correlation(self, rho):
        s = GeneratorSpec("logistic2", rho=rho)
        x = draw_covariates(s, 10_000, np.random.default_rng(1))
        assert np.corrcoef(x[:, 0], x[:, 1])[0, 1] == pytest.approx(rho, abs=0.03)

    def test_independent_case(self):
        s = GeneratorSpec("logistic2", rho=0.0)
        x = draw_covariates(s, 10_000, np.random.default_rng(2))
        assert np.allclose(np.cov(x.T), np.eye(9), atol=0.05)

    def test_ar_correlation(self):
        s = GeneratorSpec("cox3")
        x = draw_covariates(s, 10_000, np.random.default_rng(3))
        c = np.corrcoef(x.T)
        assert c[0, 1] == pytest.approx(0.5, abs=0.03) and c[0, 2] == pytest.approx(0.25, abs=0.03)

    def test_noiseless_linear_recovers_beta(self):
        data, b = gen_linear(GeneratorSpec("linear1", sigma=0.0))
        ols = np.linalg.lstsq(data.design, data.response, rcond=None)[0]
        assert np.allclose(ols, b, atol=1e-12)

    def test_lse_spread_grows_with_correlation(self):
        sds = {}
        for rho in (0.1, 0.9):
            est = []
            for r in range(100):
                data, _ = gen_linear(GeneratorSpec("linear1", rho=rho), r)
                est.append(np.linalg.lstsq(data.design, data.response, rcond=None)[0][0])
            sds[rho] = np.std(est)
        assert sds[0.9] > sds[0.1]

    def test_censoring_fraction(self):
        s = GeneratorSpec("cox3")
        frac = np.mean([1 - gen_cox(s, r)[0].status.mean() for r in range(200)])
        assert frac == pytest.approx(0.30, abs=0.05)

    def test_no_censoring_limit(self):
        data, _ = gen_cox(GeneratorSpec("cox3", censoring="none"), 0)
        assert np.all(data.status == 1)

    def test_literal_censoring_reading_censors_more(self):
        lit = GeneratorSpec("cox3", censoring="mean")
        frac = np.mean([1 - gen_cox(lit, r)[0].status.mean() for r in range(200)])
        assert frac > 0.38

    def test_misspecified_views(self):
        s = GeneratorSpec("cox_misspec", beta_extra=0.4)
        full, view, b = gen_cox_misspecified(s, 0)
        assert full.d == 10 and view.d == 8
        assert np.array_equal(full.design[:, :8], view.design)
        assert np.allclose(full.design[:, 8], (full.design[:, 0] ** 2 - 1) / math.sqrt(2))
        assert list(b[8:]) == [0.4, 0.4]
        sim = simulate(s, 0)
        assert list(sim.oracle_columns) == [0, 3, 6, 8, 9]
        assert sim.true_zero.sum() == 5

    def test_squared_term_standardized(self):
        s = GeneratorSpec("cox_misspec")
        x = draw_covariates(s, 200_000, np.random.default_rng(5))
        assert x[:, 8].mean() == pytest.approx(0, abs=0.01)
        assert x[:, 8].var() == pytest.approx(1, abs=0.02)

    def test_zero_extra_matches_cox3_distribution(self):
        a = GeneratorSpec("cox_misspec", beta_extra=0.0, seed=11)
        b = GeneratorSpec("cox3", seed=11)
        full, view, _ = gen_cox_misspecified(a, 0)
        plain, _ = gen_cox(b, 0)
        # same stream, same draws: the extra columns are functions of x1, x2 only
        assert np.array_equal(view.design, plain.design)
        assert np.array_equal(full.response, plain.response)


class TestModelError:
    def test_zero_at_truth(self):
        b = true_beta(GeneratorSpec("logistic2"))
        x = np.random.default_rng(0).standard_normal((100, 9))
        assert model_error(b, b, "logistic", x) == 0.0
        assert model_error(b, b, "linear", cov=np.eye(9)) == 0.0

    def test_linear_closed_form_matches_monte_carlo(self):
        s = GeneratorSpec("linear1")
        b = true_beta(s)
        bh = b + np.random.default_rng(1).normal(0, 0.2, 9)
        exact = model_error(bh, b, "linear", cov=covariance(s))
        x = draw_covariates(s, 50_000, np.random.default_rng(2))
        mc = model_error(bh, b, "linear", x_draws=x)
        assert mc == pytest.approx(exact, rel=0.02)

    def test_variance_halves_when_draws_double(self):
        s = GeneratorSpec("logistic2")
        b = true_beta(s)
        bh = b * 0.8
        rng = np.random.default_rng(3)
        v = []
        for m in (500, 1000):
            est = [model_error(bh, b, "logistic", draw_covariates(s, m, rng)) for _ in range(400)]
            v.append(np.var(est))
        assert v[0] / v[1] == pytest.approx(2.0, rel=0.3)

    def test_requires_draws(self):
        with pytest.raises(ValueError):
            model_error(np.zeros(2), np.ones(2), "cox")


def _outcome(method, me, c=6, i=0, b1=1.0, se=0.1):
    return MethodOutcome(method, me, c, i, b1, se, 0.01, "converged")


class TestSummarize:
    def test_self_ratio_is_one(self):
        outs = {r: [_outcome("Full", 1.0 + r), _outcome("Oracle", 0.5 * (1.0 + r))] for r in range(5)}
        rows = {row.method: row for row in summarize(outs, GeneratorSpec("logistic2"))}
        assert rows["Full"].rme_median == 1.0
        assert rows["Oracle"].rme_median == pytest.approx(0.5)
        assert rows["Oracle"].C == 6 and rows["Oracle"].I == 0

    def test_sd_se_columns(self):
        outs = {r: [_outcome("Full", 1.0, b1=float(r), se=0.1 * (r + 1))] for r in range(4)}
        row = summarize(outs, GeneratorSpec("logistic2"))[0]
        assert row.sd_b1 == pytest.approx(np.std([0, 1, 2, 3], ddof=1))
        assert row.se_b1 == pytest.approx(0.25)
        assert row.stdse_b1 == pytest.approx(np.std([0.1, 0.2, 0.3, 0.4], ddof=1))

    def test_failed_fits_counted(self):
        outs = {0: [_outcome("Full", 1.0), MethodOutcome("New", 2.0, 6, 0, 1.0, 0.1, 0.1, "max_iter")]}
        rows = {row.method: row for row in summarize(outs, GeneratorSpec("logistic2"))}
        assert rows["New"].failures == 1 and rows["New"].n_ok == 0


class TestHarness:
    def test_replicate_roster_and_oracle(self):
        s = GeneratorSpec("logistic2", replicates=1)
        outs = run_replicate(s, 0, mc_draws=2000, lambda_grid=np.geomspace(0.01, 0.3, 6))
        names = [o.method for o in outs]
        assert names == ["Full", "New", "LQA", "AIC", "BIC", "Oracle"]
        oracle = outs[-1]
        assert oracle.correct_zeros == 6 and oracle.incorrect_zeros == 0

    def test_report_tsv_and_sidecar(self, tmp_path):
        s = GeneratorSpec("cox_misspec", replicates=2, n=50)
        rep = run_experiment(s, methods=("New", "BIC", "Oracle"), lambda_grid=np.geomspace(0.02, 0.3, 5), mc_draws=2000)
        tsv, side = rep.write(tmp_path, "t")
        lines = open(tsv).read().splitlines()
        assert lines[0].split("\t") == list(TSV_COLUMNS)
        assert [ln.split("\t")[0] for ln in lines[1:]] == ["New", "BIC", "Oracle"]
        assert lines[1].split("\t")[1] == "50"
        meta = json.loads(open(side).read())
        assert meta["generator"]["beta_extra"] == 0.2 and meta["constants"]["scad_a"] == 3.7
        assert rep.row("Oracle").I == 0 and rep.row("Oracle").C == 5

    def test_parallel_equals_serial(self):
        s = GeneratorSpec("logistic2", replicates=3)
        kw = dict(methods=("New", "Oracle"), lambda_grid=np.geomspace(0.02, 0.3, 4), mc_draws=1000)
        a = run_experiment(s, threads=1, **kw)
        b = run_experiment(s, threads=2, **kw)
        strip = lambda rep: [(o.method, o.me, o.correct_zeros, o.b1) for r in sorted(rep.replicates) for o in rep.replicates[r]]
        assert strip(a) == strip(b)
