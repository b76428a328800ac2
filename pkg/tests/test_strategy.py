import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momir.strategy import (
    IrCurve,
    annualize,
    backtest,
    ir_curve,
    ir_matrix,
    ir_standard_error,
    read_ir_curve_csv,
    signal,
    write_ir_curve_csv,
)
from momir.theory import ir_case1, ir_case2
from momir.timeseries import NormalizedReturnSeries

from oracles import double_loop_backtest


def norm_series(values):
    start = dt.date(2000, 1, 7)
    dates = tuple(start + dt.timedelta(days=7 * i) for i in range(len(values)))
    return NormalizedReturnSeries(dates, np.asarray(values, float), window=10)


class TestSignal:
    def test_constant_series(self):
        assert signal([2.5] * 6, 4, 5) == 2.5

    def test_symmetric_cancellation(self):
        assert signal([1.0, -1.0], 2, 1) == 0.0

    def test_arithmetic_mean_at_last_index(self):
        assert signal([0.5, 1.5, -1.0], 3, 2) == pytest.approx(1.0 / 3.0, abs=1e-15)

    def test_accepts_series_object(self):
        assert signal(norm_series([1.0, 3.0]), 2, 1) == 2.0

    def test_rejects_short_history(self):
        with pytest.raises(ValueError, match="past values"):
            signal([1.0, 2.0, 3.0], 3, 1)


class TestBacktest:
    def test_zero_series_gives_zero_payoffs(self):
        assert np.array_equal(backtest([0.0] * 5, 2).payoffs, np.zeros(3))

    def test_unit_series_n1(self):
        result = backtest([1.0, 1.0, 1.0, 1.0], 1)
        assert np.array_equal(result.payoffs, [1.0, 1.0, 1.0])
        assert result.start == 1

    def test_alternating_series_n1_loses_every_period(self):
        x = np.tile([1.0, -1.0], 8)
        assert np.array_equal(backtest(x, 1).payoffs, -np.ones(15))

    def test_payoff_count(self):
        x = np.random.default_rng(0).standard_normal(40)
        for n in (1, 7, 39):
            assert len(backtest(x, n)) == 40 - n

    def test_matches_double_loop(self):
        x = np.random.default_rng(1).standard_normal(300)
        for n in (1, 5, 26):
            got = backtest(x, n).payoffs
            want = double_loop_backtest(x, n)
            assert np.max(np.abs(got - want)) < 1e-13

    @given(st.lists(st.floats(min_value=-3, max_value=3), min_size=4, max_size=50))
    @settings(max_examples=80, deadline=None)
    def test_sign_antisymmetry(self, values):
        x = np.asarray(values)
        n = min(3, len(x) - 1)
        assert np.array_equal(backtest(x, n).payoffs, backtest(-x, n).payoffs)

    def test_shift_equivariance(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal(60)
        extended = np.concatenate([rng.standard_normal(10), x])
        base = backtest(x, 5).payoffs
        shifted = backtest(extended, 5).payoffs
        # payoffs settling on shared timestamps are identical
        assert np.allclose(shifted[10:], base, rtol=0, atol=1e-12)

    def test_series_too_short(self):
        with pytest.raises(ValueError, match="too short"):
            backtest([1.0, 2.0], 2)


class TestIrCurve:
    def test_zero_mean_gaussian_ir_statistically_zero(self):
        hits = total = 0
        for seed in range(10):
            x = np.random.default_rng(seed).standard_normal(2000)
            curve = ir_curve(x, (1, 20))
            ann = curve.ir_annualized
            hits += int(np.sum(np.abs(ann) < 3 * curve.stderr))
            total += len(curve)
        assert hits / total >= 0.95

    def test_strong_drift_ir_rises_toward_case1_limit(self):
        rng = np.random.default_rng(3)
        mu, sigma = 0.5, 1.0
        x = mu + sigma * rng.standard_normal(60_000)
        curve = ir_curve(x, (1, 60))
        assert curve.ir[-1] > curve.ir[9] > curve.ir[0]
        want = ir_case1(mu, sigma**2, 60)
        assert curve.ir[-1] == pytest.approx(want, rel=0.05)

    def test_ma_correlated_series_hump(self):
        # zero-drift MA noise with positive short-lag autocorrelation: the IR
        # peaks at a small lookback and decays, tracking the closed form
        rng = np.random.default_rng(4)
        coeffs = np.array([1.0, 0.6, 0.4, 0.25, 0.15, 0.1])
        eta = rng.standard_normal(200_000 + len(coeffs) - 1)
        x = np.convolve(eta, coeffs, mode="valid")
        curve = ir_curve(x, (1, 40))
        rho = [
            float(np.dot(coeffs[:-k], coeffs[k:]) / np.dot(coeffs, coeffs))
            for k in range(1, len(coeffs))
        ]
        peak_n = int(curve.n[np.nanargmax(curve.ir)])
        theory_peak = max(range(1, 41), key=lambda n: ir_case2(rho, n))
        assert abs(peak_n - theory_peak) <= 3
        assert curve.ir[-1] < np.nanmax(curve.ir)
        want = [ir_case2(rho, int(n)) for n in curve.n]
        assert np.allclose(curve.ir, want, atol=0.02)

    def test_degenerate_payoffs_flagged_not_infinite(self):
        x = np.concatenate([np.zeros(6), [1.0]])
        curve = ir_curve(x, (1, 3))
        assert np.all(~np.isfinite(curve.ir[:2]) | (curve.sd[:2] > 0))
        assert not np.any(np.isinf(curve.ir))

    def test_single_payoff_at_max_lookback(self):
        x = np.random.default_rng(9).standard_normal(10)
        curve = ir_curve(x, (9, 9))
        assert curve.samples[0] == 1
        assert math.isnan(curve.ir[0])

    def test_mean_matches_direct_average(self):
        x = np.random.default_rng(11).standard_normal(500)
        curve = ir_curve(x, (4, 4))
        want = double_loop_backtest(x, 4)
        assert curve.mean[0] == pytest.approx(want.mean(), abs=1e-13)
        assert curve.samples[0] == len(want)

    def test_range_validation(self):
        with pytest.raises(ValueError, match="max lookback"):
            ir_curve(np.ones(5), (1, 5))


class TestIrMatrix:
    def test_matches_per_series_curve(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((4, 400)) + 0.05
        ns = np.array([1, 3, 10, 50])
        got = ir_matrix(x, ns)
        for row in range(4):
            curve = ir_curve(x[row], (1, 50))
            want = curve.ir[np.isin(curve.n, ns)]
            assert np.allclose(got[row], want, rtol=0, atol=1e-8)


class TestAnnualize:
    def test_worked_value(self):
        assert annualize(0.0422, 52) == pytest.approx(0.304, abs=1e-3)

    def test_zero(self):
        assert annualize(0.0, 52) == 0.0

    def test_direct(self):
        assert annualize(0.1, 52) == pytest.approx(0.1 * math.sqrt(52), abs=1e-15)

    def test_standard_error_rule(self):
        assert ir_standard_error(117, 52) == pytest.approx(1.3067, abs=5e-4)


class TestIrCurveCsv:
    def test_round_trip_with_undefined_entries(self, tmp_path):
        curve = IrCurve(
            n=[1, 2],
            mean=[0.1, 0.0],
            sd=[0.5, math.nan],
            ir=[0.2, math.nan],
            stderr=[1.0, 1.1],
            samples=[99, 98],
        )
        path = tmp_path / "curve.csv"
        write_ir_curve_csv(str(path), curve)
        text = path.read_text()
        assert text.splitlines()[0] == "n,mean,sd,ir,ir_annualized,stderr,samples"
        assert ",,," in text.splitlines()[2]  # undefined ir columns stay empty
        back = read_ir_curve_csv(str(path))
        assert np.array_equal(back.n, curve.n)
        assert back.ir[0] == pytest.approx(0.2, abs=1e-12)
        assert math.isnan(back.ir[1])
