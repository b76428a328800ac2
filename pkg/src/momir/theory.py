"""Closed-form mean, variance, and IR of the momentum strategy.

For a stationary process X with mean mu, variance V, and autocorrelation
rho(k) (zero beyond the stored horizon), the one-period payoff of the
N-lookback strategy is R = m_{t-1}(N) * X_t.  Under a multivariate-Gaussian
assumption its moments are available in closed form:

    E[R]   = mu^2 + (V/N) * sum_{i=1..N} rho(i)

    Var(R) = (1/N^2) * [ N V^2 + N mu^2 V + N^2 V mu^2
                         + V^2 * (S1^2 + S2)
                         + mu^2 V * (2 N S1 + S2) ]

with S1 = sum_{i=1..N} rho(i) and S2 the sum of rho(|i-j|) over ordered pairs
i != j in {1..N}, i.e. S2 = 2 * sum_{d=1..N-1} (N-d) * rho(d).  Two limits are
exposed directly: the drift-only IR (all autocorrelations zero), which rises
with N toward |mu|/sqrt(V), and the zero-drift IR, which depends only on the
autocorrelations and typically humps at small N before 1/sqrt(N) takes over.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .timeseries import atomic_write_text, format_value

__all__ = [
    "MomentProfile",
    "TheoreticalIr",
    "expected_return",
    "strategy_variance",
    "theoretical_ir",
    "ir_case1",
    "ir_case2",
    "correlation_matrix",
    "write_theory_curve_csv",
]

# Tolerance used when testing the correlation structure for realizability.
PSD_TOLERANCE = 1e-10


def correlation_matrix(autocorr: Sequence[float], size: int) -> np.ndarray:
    """Toeplitz correlation matrix of the given size, rho(k)=0 beyond the horizon."""
    rho = np.asarray(autocorr, dtype=float)
    full = np.concatenate([[1.0], rho, np.zeros(max(0, size - 1 - len(rho)))])
    idx = np.abs(np.subtract.outer(np.arange(size), np.arange(size)))
    return full[idx]


@dataclass(frozen=True)
class MomentProfile:
    """Stationary process parameters: drift, variance, and autocorrelations.

    Lags beyond the stored horizon are treated as zero.  Construction fails if
    the variance is not positive, any |rho(k)| exceeds 1, or the implied
    (K+1)x(K+1) Toeplitz correlation matrix is not realizable (a Cholesky
    factorization of R + tol*I must succeed).
    """

    mu: float
    variance: float
    autocorr: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "autocorr", tuple(float(r) for r in self.autocorr))
        if not (self.variance > 0.0) or not math.isfinite(self.variance):
            raise ValueError(f"variance must be positive, got {self.variance}")
        if not math.isfinite(self.mu):
            raise ValueError("drift must be finite")
        for k, r in enumerate(self.autocorr, start=1):
            if not math.isfinite(r) or abs(r) > 1.0:
                raise ValueError(f"autocorrelation at lag {k} out of [-1, 1]: {r}")
        size = len(self.autocorr) + 1
        matrix = correlation_matrix(self.autocorr, size)
        try:
            np.linalg.cholesky(matrix + PSD_TOLERANCE * np.eye(size))
        except np.linalg.LinAlgError:
            raise ValueError(
                "autocorrelation sequence is not realizable: Toeplitz correlation "
                "matrix is not positive semi-definite"
            ) from None

    def rho(self, lag: int) -> float:
        """rho(lag) with the beyond-horizon lags equal to zero."""
        if lag == 0:
            return 1.0
        return self.autocorr[lag - 1] if lag <= len(self.autocorr) else 0.0


@dataclass(frozen=True)
class TheoreticalIr:
    """Closed-form strategy moments at one lookback."""

    n: int
    mean: float
    variance: float
    ir: float


def _rho_sums(autocorr: Sequence[float], n: int) -> tuple[float, float]:
    """S1 = sum of rho(1..N); S2 = ordered-pair sum of rho(|i-j|), i != j."""
    rho = np.asarray(autocorr, dtype=float)[: n]
    s1 = float(rho.sum())
    if n > 1 and rho.size:
        lags = np.arange(1, len(rho[: n - 1]) + 1)
        s2 = 2.0 * float(((n - lags) * rho[: n - 1]).sum())
    else:
        s2 = 0.0
    return s1, s2


def _check_n(n: int) -> None:
    if n < 1:
        raise ValueError("lookback N must be >= 1")


def expected_return(profile: MomentProfile, n: int) -> float:
    """E[R] = mu^2 + (V/N) * sum of the first N autocorrelations."""
    _check_n(n)
    s1, _ = _rho_sums(profile.autocorr, n)
    return profile.mu * profile.mu + profile.variance / n * s1


def strategy_variance(profile: MomentProfile, n: int) -> float:
    """Var(R) of the one-period payoff, exact for a multivariate-Gaussian X."""
    _check_n(n)
    mu2 = profile.mu * profile.mu
    v = profile.variance
    s1, s2 = _rho_sums(profile.autocorr, n)
    base = v * mu2 + v * v / n + mu2 * v / n
    corr = (v * v * (s1 * s1 + s2) + mu2 * v * (2.0 * n * s1 + s2)) / (n * n)
    return base + corr


def theoretical_ir(profile: MomentProfile, n: int) -> TheoreticalIr:
    """Closed-form IR = E[R] / sqrt(Var(R)) at lookback N."""
    mean = expected_return(profile, n)
    variance = strategy_variance(profile, n)
    return TheoreticalIr(n=n, mean=mean, variance=variance, ir=mean / math.sqrt(variance))


def ir_case1(mu: float, variance: float, n: int) -> float:
    """Drift-only IR (all autocorrelations zero).

    mu^2 / sqrt(V mu^2 + V^2/N + mu^2 V / N); strictly increasing in N and
    approaching |mu|/sqrt(V).  Zero drift gives exactly 0 for finite N.
    """
    _check_n(n)
    if not (variance > 0.0):
        raise ValueError("variance must be positive")
    mu2 = mu * mu
    return mu2 / math.sqrt(variance * mu2 + variance * variance / n + mu2 * variance / n)


def ir_case2(autocorr: Sequence[float], n: int) -> float:
    """Zero-drift IR, driven entirely by autocorrelation.

    S1 / sqrt(N + S1^2 + S2); independent of the process variance.
    """
    _check_n(n)
    s1, s2 = _rho_sums(tuple(float(r) for r in autocorr), n)
    return s1 / math.sqrt(n + s1 * s1 + s2)


# ---------------------------------------------------------------------------
# CSV interface: `n,mean,variance,ir` over a lookback range.
# ---------------------------------------------------------------------------


def theory_curve_csv_text(profile: MomentProfile, n_range: tuple[int, int]) -> str:
    n_min, n_max = int(n_range[0]), int(n_range[1])
    if n_min < 1 or n_max < n_min:
        raise ValueError(f"bad lookback range [{n_min}, {n_max}]")
    buf = io.StringIO()
    buf.write("n,mean,variance,ir\n")
    for n in range(n_min, n_max + 1):
        t = theoretical_ir(profile, n)
        buf.write(
            f"{n},{format_value(t.mean)},{format_value(t.variance)},{format_value(t.ir)}\n"
        )
    return buf.getvalue()


def write_theory_curve_csv(path: str, profile: MomentProfile, n_range: tuple[int, int]) -> None:
    atomic_write_text(path, theory_curve_csv_text(profile, n_range))
