"""Moving-average momentum strategy and empirical information-ratio curves.

The signal at time t is the simple moving average m_t(N) of the last N
normalized returns; the position held into t+1 is m_t(N) itself (long when
positive, short when negative), so the per-period payoff is m_t(N) * X_{t+1}.
The information ratio (IR) for a lookback N is the mean payoff divided by the
payoff standard deviation; annualization multiplies by sqrt(periods per year).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .timeseries import NormalizedReturnSeries, atomic_write_text, format_value

__all__ = [
    "StrategyPayoffs",
    "IrCurve",
    "signal",
    "backtest",
    "ir_curve",
    "annualize",
    "ir_standard_error",
    "write_ir_curve_csv",
    "read_ir_curve_csv",
]

# 95% normal critical value used in every standard-error rule below.
Z95 = 1.96


def _values(x) -> np.ndarray:
    if isinstance(x, NormalizedReturnSeries):
        return x.values
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class StrategyPayoffs:
    """Per-period payoffs m_{t-1}(N) * X_t for one lookback N.

    ``start`` is the index (into the source series) of the first traded
    return, so payoff k settles on series index ``start + k``.
    """

    lookback: int
    payoffs: np.ndarray
    start: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "payoffs", np.asarray(self.payoffs, dtype=float))

    def __len__(self) -> int:
        return len(self.payoffs)


@dataclass(frozen=True)
class IrCurve:
    """Per-lookback strategy statistics.

    ``ir`` holds the per-period information ratio and is NaN where the payoff
    standard deviation vanishes (undefined, never +/-inf).  ``stderr`` is the
    annualized 95% half-width Z95 * sqrt(periods_per_year / samples).
    """

    n: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    ir: np.ndarray
    stderr: np.ndarray
    samples: np.ndarray
    periods_per_year: float = 52.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "n", np.asarray(self.n, dtype=int))
        for name in ("mean", "sd", "ir", "stderr"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=int))
        sizes = {len(getattr(self, f)) for f in ("n", "mean", "sd", "ir", "stderr", "samples")}
        if len(sizes) != 1:
            raise ValueError("IR curve: columns differ in length")

    @property
    def ir_annualized(self) -> np.ndarray:
        return self.ir * math.sqrt(self.periods_per_year)

    def __len__(self) -> int:
        return len(self.n)


def signal(x, n: int, t: int) -> float:
    """Moving-average signal m_t(N): mean of the N values ending at index t."""
    values = _values(x)
    if n < 1:
        raise ValueError("lookback N must be >= 1")
    if t < n - 1 or t >= len(values):
        raise ValueError(
            f"signal at index {t} needs {n} past values within a series of "
            f"length {len(values)}"
        )
    return float(values[t - n + 1 : t + 1].mean())


def backtest(x, n: int) -> StrategyPayoffs:
    """Payoffs m_{t-1}(N) * X_t for every t with a full lookback window.

    One payoff per period (rebalanced every period, no costs), t running from
    N to len(X)-1, giving exactly len(X) - N payoffs.
    """
    values = _values(x)
    if n < 1:
        raise ValueError("lookback N must be >= 1")
    if len(values) <= n:
        raise ValueError(f"series of length {len(values)} too short for lookback {n}")
    windows = np.lib.stride_tricks.sliding_window_view(values[:-1], n)
    m = windows.sum(axis=1) / n
    return StrategyPayoffs(lookback=n, payoffs=m * values[n:], start=n)


def ir_standard_error(samples: int, periods_per_year: float) -> float:
    """Annualized 95% half-width for an estimated IR: Z95 * sqrt(ppy / samples)."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    return Z95 * math.sqrt(periods_per_year) / math.sqrt(samples)


# Payoff spreads below this fraction of the mean are indistinguishable from a
# constant payoff in double precision; the IR is reported as undefined there.
DEGENERATE_SD_RTOL = 1e-12


def _defined_sd(sd, mean):
    return (sd > 0.0) & (sd > DEGENERATE_SD_RTOL * np.abs(mean))


def _payoff_stats(payoffs: np.ndarray) -> tuple[float, float, float]:
    """(mean, sample sd, ir) with ir NaN when the spread is zero or degenerate."""
    mean = float(payoffs.mean())
    if len(payoffs) < 2:
        return mean, math.nan, math.nan
    sd = float(payoffs.std(ddof=1))
    ir = mean / sd if _defined_sd(sd, mean) else math.nan
    return mean, sd, ir


def ir_curve(x, n_range: tuple[int, int], periods_per_year: float = 52.0) -> IrCurve:
    """Backtest every lookback in [n_min, n_max] and collect IR statistics."""
    values = _values(x)
    n_min, n_max = int(n_range[0]), int(n_range[1])
    if n_min < 1 or n_max < n_min:
        raise ValueError(f"bad lookback range [{n_min}, {n_max}]")
    if n_max >= len(values):
        raise ValueError(
            f"max lookback {n_max} needs a series longer than {n_max}, got {len(values)}"
        )
    if periods_per_year <= 0:
        raise ValueError("periods_per_year must be positive")
    ns = np.arange(n_min, n_max + 1)
    mean = np.empty(len(ns))
    sd = np.empty(len(ns))
    ir = np.empty(len(ns))
    stderr = np.empty(len(ns))
    samples = np.empty(len(ns), dtype=int)
    for i, n in enumerate(ns):
        pays = backtest(values, int(n)).payoffs
        mean[i], sd[i], ir[i] = _payoff_stats(pays)
        samples[i] = len(pays)
        stderr[i] = ir_standard_error(len(pays), periods_per_year)
    return IrCurve(
        n=ns, mean=mean, sd=sd, ir=ir, stderr=stderr, samples=samples,
        periods_per_year=periods_per_year,
    )


def annualize(ir_per_period: float, periods_per_year: float) -> float:
    """Scale a per-period IR to annual units: ir * sqrt(periods_per_year)."""
    if periods_per_year <= 0:
        raise ValueError("periods_per_year must be positive")
    return ir_per_period * math.sqrt(periods_per_year)


def ir_matrix(x_matrix: np.ndarray, lookbacks) -> np.ndarray:
    """Per-row IR at each requested lookback, over a (rows, length) matrix.

    Vectorized equivalent of running ``ir_curve`` on every row; window sums
    use prefix sums, so values may differ from ``backtest`` in the last few
    bits (the agreement is asserted in tests).  Returns an array of shape
    (rows, len(lookbacks)) with NaN where the payoff sd vanishes.
    """
    x = np.asarray(x_matrix, dtype=float)
    if x.ndim != 2:
        raise ValueError("expected a 2-d matrix of series")
    rows, length = x.shape
    ns = np.asarray(lookbacks, dtype=int)
    if ns.size == 0 or ns.min() < 1 or ns.max() >= length:
        raise ValueError(f"lookbacks must lie in [1, {length - 1}], got {ns!r}")
    prefix = np.concatenate([np.zeros((rows, 1)), np.cumsum(x, axis=1)], axis=1)
    out = np.empty((rows, len(ns)))
    for i, n in enumerate(int(v) for v in ns):
        m = (prefix[:, n:length] - prefix[:, : length - n]) / n
        pays = m * x[:, n:]
        mean = pays.mean(axis=1)
        sd = pays.std(axis=1, ddof=1) if pays.shape[1] >= 2 else np.full(rows, np.nan)
        with np.errstate(divide="ignore", invalid="ignore"):
            ir = np.where(_defined_sd(sd, mean), mean / sd, np.nan)
        out[:, i] = ir
    return out


# ---------------------------------------------------------------------------
# CSV interface: `n,mean,sd,ir,ir_annualized,stderr,samples`; undefined IR
# entries leave the ir columns empty.
# ---------------------------------------------------------------------------

IR_CURVE_HEADER = ["n", "mean", "sd", "ir", "ir_annualized", "stderr", "samples"]


def ir_curve_csv_text(curve: IrCurve) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(IR_CURVE_HEADER)
    ann = curve.ir_annualized
    for i in range(len(curve)):
        writer.writerow(
            [
                int(curve.n[i]),
                format_value(curve.mean[i]),
                format_value(curve.sd[i]),
                format_value(curve.ir[i]),
                format_value(ann[i]),
                format_value(curve.stderr[i]),
                int(curve.samples[i]),
            ]
        )
    return buf.getvalue()


def write_ir_curve_csv(path: str, curve: IrCurve) -> None:
    atomic_write_text(path, ir_curve_csv_text(curve))


def read_ir_curve_csv(path: str, periods_per_year: float = 52.0) -> IrCurve:
    """Load an IR-curve CSV written by :func:`write_ir_curve_csv`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != IR_CURVE_HEADER:
            raise ValueError(f"{path}: expected header {','.join(IR_CURVE_HEADER)!r}")
        rows = [row for row in reader if row and any(f.strip() for f in row)]
    if not rows:
        raise ValueError(f"{path}: no data rows")

    def num(s: str) -> float:
        return float(s) if s.strip() else math.nan

    n = [int(r[0]) for r in rows]
    return IrCurve(
        n=n,
        mean=[num(r[1]) for r in rows],
        sd=[num(r[2]) for r in rows],
        ir=[num(r[3]) for r in rows],
        stderr=[num(r[5]) for r in rows],
        samples=[int(r[6]) for r in rows],
        periods_per_year=periods_per_year,
    )
