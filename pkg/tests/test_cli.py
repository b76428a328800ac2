import datetime as dt
import json
import math

import numpy as np
import pytest

from momir.cli import main
from momir.simulate import IidGaussian, SquareWaveDrift, dump_process_spec
from momir.strategy import read_ir_curve_csv
from momir.timeseries import write_series_csv


def write_prices(path, dates, prices):
    lines = ["date,price"] + [f"{d.isoformat()},{p:.6f}" for d, p in zip(dates, prices)]
    path.write_text("\n".join(lines) + "\n")


def daily_dates(start: dt.date, count: int):
    # business days only
    out, d = [], start
    while len(out) < count:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def weekly_dates(start: dt.date, count: int):
    return [start + dt.timedelta(days=7 * i) for i in range(count)]


@pytest.fixture()
def returns_csv(tmp_path):
    rng = np.random.default_rng(77)
    n = 2000
    values = 0.004 + 0.02 * rng.standard_normal(n)
    path = tmp_path / "returns.csv"
    write_series_csv(str(path), weekly_dates(dt.date(1980, 1, 4), n), values)
    return path


class TestIngest:
    def test_two_prices_one_return(self, tmp_path, capsys):
        src = tmp_path / "p.csv"
        write_prices(src, weekly_dates(dt.date(2000, 1, 7), 2), [100.0, 101.0])
        out = tmp_path / "r.csv"
        code = main(["ingest", "--input", str(src), "--output", str(out), "--frequency", "weekly"])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "date,value"
        assert len(lines) == 2
        assert float(lines[1].split(",")[1]) == pytest.approx(math.log(1.01))
        assert "2 prices" in capsys.readouterr().out

    def test_daily_input_resamples_to_weekly(self, tmp_path, capsys):
        days = daily_dates(dt.date(2000, 1, 3), 20)  # 4 business weeks
        src = tmp_path / "p.csv"
        write_prices(src, days, np.linspace(100, 110, 20))
        out = tmp_path / "r.csv"
        assert main(["ingest", "--input", str(src), "--output", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 4  # 4 weekly prices -> 3 returns
        assert "4 weekly prices -> 3 returns" in capsys.readouterr().out

    def test_non_positive_price_exits_nonzero_naming_date(self, tmp_path, capsys):
        src = tmp_path / "p.csv"
        write_prices(src, weekly_dates(dt.date(2000, 1, 7), 3), [100.0, -1.0, 101.0])
        out = tmp_path / "r.csv"
        code = main(["ingest", "--input", str(src), "--output", str(out), "--frequency", "weekly"])
        assert code == 1
        err = capsys.readouterr().err
        assert "2000-01-14" in err
        assert not out.exists()

    def test_malformed_row_exits_nonzero_with_line(self, tmp_path, capsys):
        src = tmp_path / "p.csv"
        src.write_text("date,price\n2000-01-07,100\n2000-01-14\n")
        code = main(["ingest", "--input", str(src), "--output", str(tmp_path / "r.csv"),
                     "--frequency", "weekly"])
        assert code == 1
        assert "line 3" in capsys.readouterr().err


class TestIr:
    def test_drift_series_rising_ir(self, returns_csv, tmp_path):
        out = tmp_path / "ir.csv"
        code = main(["ir", "--input", str(returns_csv), "--output", str(out),
                     "--p", "10", "--n-min", "1", "--n-max", "43"])
        assert code == 0
        curve = read_ir_curve_csv(str(out))
        assert len(curve) == 43
        assert curve.ir[-1] > curve.ir[0]
        assert np.nanmax(curve.ir_annualized) > 0.5

    def test_byte_identical_reruns(self, returns_csv, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        argv = ["ir", "--input", str(returns_csv), "--p", "10", "--n-min", "1", "--n-max", "20"]
        assert main(argv + ["--output", str(a)]) == 0
        assert main(argv + ["--output", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_insufficient_data_message(self, tmp_path, capsys):
        path = tmp_path / "short.csv"
        write_series_csv(str(path), weekly_dates(dt.date(2000, 1, 7), 30), np.ones(30) * 0.01)
        code = main(["ir", "--input", str(path), "--output", str(tmp_path / "o.csv"),
                     "--p", "10", "--n-max", "25"])
        assert code == 1
        assert "need more than" in capsys.readouterr().err

    def test_zero_variance_payoffs_flagged_undefined(self, tmp_path):
        path = tmp_path / "flat.csv"
        write_series_csv(str(path), weekly_dates(dt.date(2000, 1, 7), 60), np.full(60, 0.01))
        out = tmp_path / "o.csv"
        assert main(["ir", "--input", str(path), "--output", str(out),
                     "--p", "5", "--n-max", "10"]) == 0
        curve = read_ir_curve_csv(str(out))
        assert np.all(~np.isfinite(curve.ir))  # constant payoffs, sd = 0


class TestRegimes:
    def test_report_and_average_curve(self, tmp_path):
        rng = np.random.default_rng(5)
        n = 30 * 52
        drift = np.where(np.arange(n) < n // 2, 0.02, -0.015)
        values = drift + 0.02 * rng.standard_normal(n)
        src = tmp_path / "returns.csv"
        write_series_csv(str(src), weekly_dates(dt.date(1970, 1, 2), n), values)
        report = tmp_path / "regimes.csv"
        curve_out = tmp_path / "avg.csv"
        code = main(["regimes", "--input", str(src), "--output", str(report),
                     "--output-curve", str(curve_out), "--n-max", "43"])
        assert code == 0
        lines = report.read_text().splitlines()
        assert lines[0] == "start,end,weeks,acf1,acf_se,max_ir,ir_se,max_ir_n,classification"
        assert len(lines) >= 3
        weeks = [int(row.split(",")[2]) for row in lines[1:]]
        assert all(w >= 70 for w in weeks)
        avg = read_ir_curve_csv(str(curve_out))
        assert len(avg) == 43

    def test_too_short_for_segmentation(self, tmp_path, capsys):
        src = tmp_path / "short.csv"
        write_series_csv(str(src), weekly_dates(dt.date(2000, 1, 7), 90),
                         0.01 * np.ones(90))
        code = main(["regimes", "--input", str(src), "--output", str(tmp_path / "r.csv"),
                     "--output-curve", str(tmp_path / "c.csv")])
        assert code == 1
        assert "monthly samples" in capsys.readouterr().err


class TestSimulate:
    def test_mc_curve_from_spec_file(self, tmp_path):
        spec_path = tmp_path / "spec.json"
        dump_process_spec(str(spec_path), IidGaussian(0.075, 1.5))
        out = tmp_path / "mc.csv"
        code = main(["simulate", "--spec", str(spec_path), "--output", str(out),
                     "--n-max", "10", "--paths", "8", "--length", "300", "--seed", "4"])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# rng=")
        assert lines[1] == "n,ir_mean,ir_mc_se,paths,length,seed"
        assert len(lines) == 12

    def test_square_wave_spec_round_trip(self, tmp_path):
        spec_path = tmp_path / "spec.json"
        dump_process_spec(
            str(spec_path), SquareWaveDrift(0.075, 0.15, 180, IidGaussian(0.0, 1.5))
        )
        out = tmp_path / "mc.csv"
        assert main(["simulate", "--spec", str(spec_path), "--output", str(out),
                     "--n-max", "5", "--paths", "4", "--length", "400", "--seed", "1"]) == 0

    def test_seed_required(self, tmp_path, capsys):
        spec_path = tmp_path / "spec.json"
        dump_process_spec(str(spec_path), IidGaussian(0.0, 1.0))
        with pytest.raises(SystemExit):
            main(["simulate", "--spec", str(spec_path), "--output", str(tmp_path / "o.csv"),
                  "--n-max", "5"])

    def test_identical_seeds_identical_bytes(self, tmp_path):
        spec_path = tmp_path / "spec.json"
        dump_process_spec(str(spec_path), IidGaussian(0.0, 1.0))
        outs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            main(["simulate", "--spec", str(spec_path), "--output", str(out),
                  "--n-max", "6", "--paths", "5", "--length", "200", "--seed", "11"])
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestFitCommand:
    def test_stationary_fit_through_cli(self, returns_csv, tmp_path):
        curve_path = tmp_path / "ir.csv"
        main(["ir", "--input", str(returns_csv), "--output", str(curve_path),
              "--p", "10", "--n-max", "43"])
        out = tmp_path / "fit.json"
        code = main(["fit", "--input", str(curve_path), "--output", str(out),
                     "--model", "stationary", "--k-lags", "3"])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["settings"]["model"] == "stationary"
        assert set(payload["parameters"]) == {"mu", "rho_1", "rho_2", "rho_3"}
        # the input was built with weekly drift 0.004 over |r| mean-normalized
        # values, so the recovered drift must be positive and modest
        assert 0.0 < payload["parameters"]["mu"] < 1.0

    def test_squarewave_requires_seed_and_mu(self, tmp_path, returns_csv, capsys):
        curve_path = tmp_path / "ir.csv"
        main(["ir", "--input", str(returns_csv), "--output", str(curve_path),
              "--p", "10", "--n-max", "30"])
        code = main(["fit", "--input", str(curve_path), "--output", str(tmp_path / "f.json"),
                     "--model", "squarewave"])
        assert code == 1
        assert "--seed" in capsys.readouterr().err

    def test_squarewave_fit_through_cli(self, tmp_path):
        rng = np.random.default_rng(99)
        n = 700
        wave = 0.05 * np.where((np.arange(1, n + 1) % 120) <= 60, 1.0, -1.0)
        values = 0.02 + wave + rng.standard_normal(n)
        src = tmp_path / "returns.csv"
        write_series_csv(str(src), weekly_dates(dt.date(1995, 1, 6), n), values)
        curve_path = tmp_path / "ir.csv"
        main(["ir", "--input", str(src), "--output", str(curve_path),
              "--p", "10", "--n-max", "150"])
        out = tmp_path / "wavefit.json"
        code = main(["fit", "--input", str(curve_path), "--output", str(out),
                     "--model", "squarewave", "--mu-fixed", "0.02",
                     "--sigma-fixed", "1.0", "--t-min", "100", "--t-max", "140",
                     "--t-step", "20", "--paths", "10", "--seed", "3"])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["settings"]["model"] == "squarewave"
        assert {"t_wave", "amplitude"} <= set(payload["parameters"])


class TestLogging:
    def test_momir_log_env_controls_verbosity(self, tmp_path, returns_csv, monkeypatch, caplog):
        monkeypatch.setenv("MOMIR_LOG", "INFO")
        with caplog.at_level("INFO", logger="momir"):
            main(["ir", "--input", str(returns_csv), "--output", str(tmp_path / "o.csv"),
                  "--p", "10", "--n-max", "10"])
        assert any("mean |X|" in r.message for r in caplog.records)

    def test_default_level_suppresses_info(self, tmp_path, returns_csv, monkeypatch, caplog):
        monkeypatch.delenv("MOMIR_LOG", raising=False)
        main(["ir", "--input", str(returns_csv), "--output", str(tmp_path / "o.csv"),
              "--p", "10", "--n-max", "10"])
        assert not any("mean |X|" in r.message for r in caplog.records)


class TestTheoryCommand:
    def test_curve_csv(self, tmp_path):
        out = tmp_path / "theory.csv"
        code = main(["theory", "--output", str(out), "--mu", "0.1", "--variance", "1.0",
                     "--rho", "0.05,0.02", "--n-min", "1", "--n-max", "5"])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "n,mean,variance,ir"
        assert len(lines) == 6

    def test_invalid_rho_rejected(self, tmp_path, capsys):
        code = main(["theory", "--output", str(tmp_path / "t.csv"), "--mu", "0",
                     "--variance", "1", "--rho", "1.5", "--n-max", "3"])
        assert code == 1
        assert "out of" in capsys.readouterr().err
