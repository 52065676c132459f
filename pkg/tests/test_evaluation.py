import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcdiffusion import (
    ExperimentConfig,
    density_sweep,
    generate_synthetic,
    mae,
    rmse,
    run_experiment,
    split_dataset,
)
from mcdiffusion.evaluation import (
    REPORT_COLUMNS,
    evaluate_split,
    read_report_csv,
    render_report_csv,
    render_wide_csv,
)

residual_lists = st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=50)


class TestMetrics:
    def test_perfect(self):
        assert mae([1, 2, 3], [1, 2, 3]) == 0.0
        assert rmse([1, 2, 3], [1, 2, 3]) == 0.0

    def test_absolute_value_is_applied(self):
        # residuals +1 and -1
        assert mae([2, 2], [3, 1]) == 1.0
        assert rmse([2, 2], [3, 1]) == 1.0

    def test_examples(self):
        assert mae([0.0, 0.0], [0.5, 1.5]) == 1.0
        assert rmse([0.0, 0.0], [0.0, 2.0]) == pytest.approx(math.sqrt(2), abs=1e-15)

    def test_empty_probe_rejected(self):
        with pytest.raises(ValueError):
            mae([], [])
        with pytest.raises(ValueError):
            rmse([], [])

    def test_misaligned_rejected(self):
        with pytest.raises(ValueError):
            mae([1, 2], [1])

    @settings(max_examples=500)
    @given(residual_lists)
    def test_rmse_at_least_mae(self, res):
        truth = np.zeros(len(res))
        assert rmse(res, truth) >= mae(res, truth) * (1 - 1e-12)

    @given(residual_lists, st.randoms())
    def test_permutation_invariant(self, res, rnd):
        shuffled = list(res)
        rnd.shuffle(shuffled)
        z = np.zeros(len(res))
        assert mae(shuffled, z) == pytest.approx(mae(res, z), rel=1e-12, abs=1e-15)
        assert rmse(shuffled, z) == pytest.approx(rmse(res, z), rel=1e-12, abs=1e-15)


@pytest.fixture(scope="module")
def small():
    return generate_synthetic(120, 90, 0.12, seed=11)


class TestExperiments:
    def test_identical_seeds_give_identical_runs(self, small):
        rep = run_experiment(small, "diffusion", 10, seeds=[4] * 5)
        first = rep.per_run[0].metrics
        assert all(r.metrics == first for r in rep.per_run)
        assert rep.mean.mae == pytest.approx(first.mae, abs=1e-15)
        assert rep.mean.rmse == pytest.approx(first.rmse, abs=1e-15)

    def test_mean_is_arithmetic_mean(self, small):
        rep = run_experiment(small, "pearson", 30)
        for field in ("mae", "rmse", "fallback_fraction"):
            vals = [getattr(r.metrics, field) for r in rep.per_run]
            assert abs(getattr(rep.mean, field) - sum(vals) / len(vals)) < 1e-12

    def test_per_run_provenance(self, small):
        rep = run_experiment(small, "diffusion", 20, seeds=(7, 8))
        assert [(r.seed, r.run_index) for r in rep.per_run] == [(7, 0), (8, 1)]
        assert rep.mean.probe_size == round(0.2 * len(small))
        assert rep.config["rng"].startswith("numpy.random.PCG64")

    def test_rmse_at_least_mae_on_real_runs(self, small):
        for method in ("diffusion", "pearson"):
            for p in (10, 50, 90):
                m, _ = evaluate_split(split_dataset(small, p, 1), method)
                assert m.rmse >= m.mae

    def test_unknown_method(self, small):
        with pytest.raises(ValueError):
            run_experiment(small, "cosine")

    def test_sweep_single_p(self, small):
        reports = density_sweep(small, ["diffusion"], [40], seeds=(1, 2))
        assert len(reports) == 1
        assert reports[0].mean == run_experiment(small, "diffusion", 40, seeds=(1, 2)).mean

    def test_sweep_order_and_thread_independence(self, small):
        a = density_sweep(small, ["diffusion", "pearson"], [10, 50], seeds=(1, 2), threads=1)
        b = density_sweep(small, ["diffusion", "pearson"], [10, 50], seeds=(1, 2), threads=3)
        assert [(r.method, r.p) for r in a] == [("diffusion", 10), ("diffusion", 50), ("pearson", 10), ("pearson", 50)]
        assert render_report_csv(a) == render_report_csv(b)

    def test_config_flags_change_results(self, small):
        base = run_experiment(small, "pearson", 10, seeds=(1,))
        alt = run_experiment(small, "pearson", 10, seeds=(1,), config=ExperimentConfig(kappa="absolute"))
        assert base.mean != alt.mean
        assert alt.config["kappa"] == "absolute"


class TestReports:
    def test_long_csv(self, small):
        reports = density_sweep(small, ["diffusion", "pearson"], [10], seeds=(1, 2))
        text = render_report_csv(reports, {"a": 1})
        assert text.startswith('# config: {"a": 1}\n')
        rows = read_report_csv(text)
        assert list(rows[0]) == REPORT_COLUMNS
        assert len(rows) == 2 * (2 + 1)
        means = [r for r in rows if r["run"] == "mean"]
        assert [r["method"] for r in means] == ["diffusion", "pearson"]
        assert float(means[0]["mae"]) == reports[0].mean.mae

    def test_wide_csv(self, small):
        reports = density_sweep(small, ["diffusion", "pearson"], [10, 20], seeds=(1,))
        lines = render_wide_csv(reports).splitlines()
        assert lines[0] == "p,diffusion_mae,diffusion_rmse,pearson_mae,pearson_rmse"
        assert [ln.split(",")[0] for ln in lines[1:]] == ["10", "20"]
