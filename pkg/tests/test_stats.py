from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.stats

from hptune.ledger import Ledger
from hptune.stats import (
    ErrorSample,
    StatsError,
    aggregate_report,
    best_trial,
    confidence_interval,
    errors_from_accuracies,
    format_report_csv,
    read_report_csv,
    rmse,
    sample_std,
    t_cdf,
    t_quantile,
    write_report_csv,
)

from conftest import make_record


def oracle_rmse(errors) -> float:
    return math.sqrt(sum(e * e for e in errors) / len(errors))


def oracle_std(errors) -> float:
    n = len(errors)
    mean = sum(errors) / n
    return math.sqrt(sum((e - mean) ** 2 for e in errors) / (n - 1))


def oracle_ci(errors, alpha=0.05):
    """Composes scipy's t quantile, keeping the route independent of the
    package's own incomplete-beta inversion."""
    n = len(errors)
    center = oracle_rmse(errors)
    hw = scipy.stats.t.ppf(1 - alpha / 2, n - 1) * oracle_std(errors) / math.sqrt(n)
    return center - hw, center + hw


class TestErrorsFromAccuracies:
    def test_perfect_accuracy(self):
        assert errors_from_accuracies([1.0, 1.0]).errors == (0.0, 0.0)

    def test_zero_accuracy(self):
        assert errors_from_accuracies([0.0]).errors == (1.0,)

    def test_order_preserved(self):
        assert errors_from_accuracies([0.6, 0.4]).errors == pytest.approx((0.4, 0.6))

    def test_out_of_range_rejected(self):
        with pytest.raises(StatsError):
            errors_from_accuracies([1.5])
        with pytest.raises(StatsError):
            errors_from_accuracies([-0.1])


class TestRmse:
    def test_zero(self):
        assert rmse(ErrorSample((0.0, 0.0))) == 0.0

    def test_singleton(self):
        assert rmse(ErrorSample((0.5,))) == 0.5

    def test_hand_value(self):
        assert rmse(ErrorSample((0.4, 0.6))) == pytest.approx(math.sqrt(0.26), abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(StatsError):
            rmse(ErrorSample(()))

    def test_within_unit_interval_for_unit_errors(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            errors = tuple(rng.uniform(0, 1, size=int(rng.integers(1, 50))))
            assert 0.0 <= rmse(ErrorSample(errors)) <= 1.0


class TestSampleStd:
    def test_hand_value(self):
        assert sample_std(ErrorSample((0.4, 0.6))) == pytest.approx(0.1414213562, abs=1e-9)

    def test_constant_sample(self):
        assert sample_std(ErrorSample((0.3, 0.3, 0.3))) == 0.0

    def test_homogeneity(self):
        rng = np.random.default_rng(1)
        errors = rng.uniform(0, 1, size=20)
        for k in (0.5, 2.0, 7.0):
            assert sample_std(ErrorSample(tuple(k * errors))) == pytest.approx(
                k * sample_std(ErrorSample(tuple(errors))), rel=1e-12
            )

    def test_n1_rejected(self):
        with pytest.raises(StatsError):
            sample_std(ErrorSample((0.5,)))


class TestTQuantile:
    def test_table_values(self):
        assert t_quantile(0.975, 1) == pytest.approx(12.7062, abs=1e-4)
        assert t_quantile(0.975, 10) == pytest.approx(2.2281, abs=1e-4)
        assert t_quantile(0.975, 100) == pytest.approx(1.9840, abs=1e-4)

    def test_median_is_zero(self):
        for df in (1, 2, 5, 30, 500):
            assert abs(t_quantile(0.5, df)) <= 1e-12

    def test_against_scipy_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            p = float(rng.uniform(0.01, 0.99))
            df = int(rng.integers(1, 300))
            assert t_quantile(p, df) == pytest.approx(scipy.stats.t.ppf(p, df), abs=1e-8)

    def test_symmetry(self):
        assert t_quantile(0.025, 7) == pytest.approx(-t_quantile(0.975, 7), abs=1e-10)

    def test_cdf_against_scipy(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            t = float(rng.uniform(-30, 30))
            df = int(rng.integers(1, 200))
            assert t_cdf(t, df) == pytest.approx(scipy.stats.t.cdf(t, df), abs=1e-12)

    def test_monotone_in_p_and_df(self):
        ps = np.linspace(0.55, 0.999, 40)
        values = [t_quantile(float(p), 5) for p in ps]
        assert all(b > a for a, b in zip(values, values[1:]))
        dfs = [1, 2, 3, 5, 8, 13, 21, 55, 144, 610]
        values = [t_quantile(0.975, df) for df in dfs]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_invalid_arguments(self):
        with pytest.raises(StatsError):
            t_quantile(0.0, 5)
        with pytest.raises(StatsError):
            t_quantile(1.0, 5)
        with pytest.raises(StatsError):
            t_quantile(0.5, 0)


class TestConfidenceInterval:
    def test_hand_composed_value(self):
        lo, hi = confidence_interval(ErrorSample((0.4, 0.6)))
        center = math.sqrt(0.26)
        half = 12.7062 * 0.1414213562 / math.sqrt(2)
        assert 0.5 * (lo + hi) == pytest.approx(center, abs=1e-9)
        assert 0.5 * (hi - lo) == pytest.approx(half, abs=1e-3)

    def test_zero_width_for_constant_sample(self):
        lo, hi = confidence_interval(ErrorSample((0.3,) * 5))
        assert lo == hi == pytest.approx(0.3, abs=1e-12)

    def test_contains_center(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            errors = tuple(rng.uniform(0, 1, size=int(rng.integers(2, 40))))
            lo, hi = confidence_interval(ErrorSample(errors))
            assert lo <= rmse(ErrorSample(errors)) <= hi

    def test_against_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(2, 201))
            errors = tuple(float(x) for x in rng.uniform(0, 1, size=n))
            got = confidence_interval(ErrorSample(errors))
            want = oracle_ci(errors)
            assert got[0] == pytest.approx(want[0], abs=1e-9)
            assert got[1] == pytest.approx(want[1], abs=1e-9)

    def test_half_width_strictly_decreasing_in_n(self):
        # Fixed sigma and alpha: hw(n) = t(0.975, n-1) * sigma / sqrt(n).
        sigma = 0.25
        widths = [t_quantile(0.975, n - 1) * sigma / math.sqrt(n) for n in range(2, 1001)]
        assert all(b < a for a, b in zip(widths, widths[1:]))


class TestBestTrial:
    def test_max_accuracy_wins(self):
        records = [make_record(0.3), make_record(0.7), make_record(0.5)]
        assert best_trial(records).accuracy == 0.7

    def test_tie_broken_by_created_at(self):
        older = make_record(0.7, offset_seconds=0)
        newer = make_record(0.7, offset_seconds=60)
        assert best_trial([newer, older]) is older

    def test_tie_with_equal_timestamps_keeps_input_order(self):
        first = make_record(0.7, offset_seconds=5)
        second = make_record(0.7, offset_seconds=5)
        assert best_trial([first, second]) is first

    def test_empty_rejected(self):
        with pytest.raises(StatsError):
            best_trial([])

    def test_best_rmse_bounds_group_rmse(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            records = [make_record(float(rng.uniform(0, 1))) for _ in range(int(rng.integers(1, 20)))]
            group = rmse(errors_from_accuracies([r.accuracy for r in records]))
            assert 1.0 - best_trial(records).accuracy <= group + 1e-12


class TestAggregateReport:
    def _ledger(self) -> Ledger:
        return Ledger(
            [
                make_record(0.61, model_id="ResNet", epochs=1),
                make_record(0.58, model_id="ResNet", epochs=1),
                make_record(0.66, model_id="ResNet", epochs=1),
                make_record(0.50, model_id="VGG", epochs=2),
                make_record(0.55, model_id="VGG", epochs=2),
                make_record(0.91, model_id="LSTM", epochs=5),
            ]
        )

    def test_per_group_stats_match_scalar_ops(self):
        rows = aggregate_report(self._ledger(), group_by=("model", "epochs"))
        by_label = {r.group: r for r in rows}
        resnet = by_label["ResNet/1"]
        errors = (0.39, 0.42, 0.34)
        assert resnet.n == 3
        assert resnet.rmse == pytest.approx(oracle_rmse(errors), abs=1e-12)
        assert resnet.std == pytest.approx(oracle_std(errors), abs=1e-12)
        lo, hi = oracle_ci(errors)
        assert resnet.ci_lo == pytest.approx(lo, abs=1e-9)
        assert resnet.ci_hi == pytest.approx(hi, abs=1e-9)
        assert resnet.best_accuracy == 0.66
        assert resnet.best_rmse == pytest.approx(0.34)

    def test_rows_sorted_by_label(self):
        rows = aggregate_report(self._ledger(), group_by=("model", "epochs"))
        labels = [r.group for r in rows]
        assert labels == sorted(labels)

    def test_singleton_group_has_no_dispersion(self):
        rows = aggregate_report(self._ledger(), group_by=("model", "epochs"))
        lstm = next(r for r in rows if r.group == "LSTM/5")
        assert lstm.n == 1
        assert lstm.std is None and lstm.se is None
        assert lstm.ci_lo is None and lstm.ci_hi is None
        assert lstm.rmse == pytest.approx(0.09)

    def test_empty_ledger_empty_report(self):
        assert aggregate_report(Ledger()) == []

    def test_ci_bounds_bracket_rmse(self):
        for row in aggregate_report(self._ledger(), group_by=("model", "epochs")):
            if row.ci_lo is not None:
                assert row.ci_lo <= row.rmse <= row.ci_hi


class TestReportCsv:
    def test_round_trip_at_quantized_precision(self, tmp_path):
        rows = aggregate_report(
            Ledger([make_record(0.61), make_record(0.66), make_record(0.31, model_id="VGG")]),
            group_by=("model",),
        )
        path = tmp_path / "report.csv"
        write_report_csv(rows, path)
        parsed = read_report_csv(path)
        assert [r.group for r in parsed] == [r.group for r in rows]
        for before, after in zip(rows, parsed):
            assert after.rmse == pytest.approx(before.rmse, abs=5e-7)
            assert after.n == before.n
        # Re-export of the parsed rows is byte-identical (idempotent at 6dp).
        assert format_report_csv(parsed) == path.read_text()

    def test_header_and_empty_cells(self, tmp_path):
        rows = aggregate_report(Ledger([make_record(0.5)]), group_by=("model",))
        text = format_report_csv(rows)
        lines = text.splitlines()
        assert lines[0] == "group,n,rmse,std,se,ci_lo,ci_hi,best_accuracy,best_rmse"
        assert ",,,," in lines[1]  # absent dispersion cells for the singleton group
