"""Synthetic return processes and Monte Carlo IR curves.

Three generators are available: iid Gaussian; a moving-average (MA) process
mu + sigma * sum_k a_k eta_{t-k+1} over iid standard-normal innovations; and a
square-wave drift process mu + A * sgn(sin(2 pi t / T_wave)) + noise, whose
growth rate flips sign every half period (sgn(0) is defined as +1).  Generated
series model the normalized return X directly and feed the strategy without
re-normalization.

Randomness comes from the counter-based Philox engine.  A run seed plus a path
index determine each path's stream (``SeedSequence(seed, spawn_key=(path,))``),
so paths can be evaluated in any order with identical results.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np
from scipy import optimize

from .strategy import ir_matrix
from .timeseries import atomic_write_text, format_value

__all__ = [
    "IidGaussian",
    "MovingAverage",
    "SquareWaveDrift",
    "ProcessSpec",
    "McIrCurve",
    "generate",
    "path_rng",
    "theoretical_acf_of_ma",
    "ma_from_target_acf",
    "mc_ir_curve",
    "load_process_spec",
    "dump_process_spec",
    "write_mc_ir_curve_csv",
]

RNG_ALGORITHM = "Philox(4x64, 10 rounds)"


@dataclass(frozen=True)
class IidGaussian:
    """Independent draws: mu + sigma * z, z ~ N(0, 1)."""

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if self.sigma < 0 or not math.isfinite(self.sigma):
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class MovingAverage:
    """MA process mu + sigma * sum_k a_k eta_{t-k+1}, eta iid N(0, 1).

    ``coefficients[0]`` multiplies the newest innovation.  Process variance is
    sigma^2 * sum(a^2).
    """

    mu: float
    coefficients: tuple[float, ...]
    sigma: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficients", tuple(float(a) for a in self.coefficients))
        if not self.coefficients:
            raise ValueError("MA process needs at least one coefficient")
        if self.sigma < 0 or not math.isfinite(self.sigma):
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class SquareWaveDrift:
    """Mean growth mu plus a square wave of amplitude A and period T_wave, plus noise.

    The noise is any zero-mean process spec; set its sigma to 0 for the pure
    integrated-square-wave path.
    """

    mu: float
    amplitude: float
    t_wave: float
    noise: "ProcessSpec"

    def __post_init__(self) -> None:
        if self.t_wave < 2:
            raise ValueError(f"t_wave must be >= 2 periods, got {self.t_wave}")
        if isinstance(self.noise, SquareWaveDrift):
            raise ValueError("square-wave noise cannot itself be a square wave")
        if self.noise.mu != 0.0:
            raise ValueError("square-wave noise must have zero mean")


ProcessSpec = Union[IidGaussian, MovingAverage, SquareWaveDrift]


def path_rng(seed, path: int | None = None) -> np.random.Generator:
    key = np.random.SeedSequence(seed) if path is None else np.random.SeedSequence(seed, spawn_key=(path,))
    return np.random.Generator(np.random.Philox(key))


def square_wave(t: np.ndarray, t_wave: float) -> np.ndarray:
    """sgn(sin(2 pi t / T)) with sgn(0) := +1, computed without trigonometry.

    sin crosses zero exactly at t mod T in {0, T/2}; both map to +1.
    """
    phase = np.mod(t, t_wave)
    return np.where(phase <= t_wave / 2.0, 1.0, -1.0)


def _generate(spec: ProcessSpec, length: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(spec, IidGaussian):
        return spec.mu + spec.sigma * rng.standard_normal(length)
    if isinstance(spec, MovingAverage):
        a = np.asarray(spec.coefficients)
        eta = rng.standard_normal(length + len(a) - 1)
        return spec.mu + spec.sigma * np.convolve(eta, a, mode="valid")
    if isinstance(spec, SquareWaveDrift):
        t = np.arange(1, length + 1, dtype=float)
        wave = spec.amplitude * square_wave(t, spec.t_wave)
        return spec.mu + wave + _generate(spec.noise, length, rng)
    raise TypeError(f"unknown process spec {type(spec).__name__}")


def generate(spec: ProcessSpec, length: int, seed) -> np.ndarray:
    """Draw one series of the given length; bit-identical for equal (spec, seed)."""
    if length < 1:
        raise ValueError("length must be >= 1")
    return _generate(spec, length, path_rng(seed))


def theoretical_acf_of_ma(coefficients, lag: int) -> float:
    """Autocorrelation of an MA process: sum_j a_j a_{j+k} / sum_j a_j^2.

    Exactly zero at and beyond the coefficient count.
    """
    if lag < 0:
        raise ValueError("lag must be >= 0")
    a = np.asarray(coefficients, dtype=float)
    if lag >= len(a):
        return 0.0
    denom = float(np.dot(a, a))
    if denom == 0.0:
        raise ValueError("all-zero coefficient list has no autocorrelation")
    return float(np.dot(a[: len(a) - lag], a[lag:])) / denom


class InfeasibleTargets(ValueError):
    """Raised when no MA process can realize the requested autocorrelations."""


def ma_from_target_acf(
    targets: Mapping[int, float],
    horizon: int,
    variance: float = 1.0,
    tol: float = 1e-6,
) -> np.ndarray:
    """Find MA coefficients whose autocorrelation hits each target lag.

    ``targets`` maps lags (1 <= lag < horizon) to desired autocorrelations;
    unlisted lags are unconstrained.  The match must be within ``tol`` at every
    target or :class:`InfeasibleTargets` is raised.  The returned coefficients
    are scaled so a unit-sigma MA process has the requested variance.

    The search fixes a_1 = 1 (autocorrelation is scale-free) and polishes a
    warm start with a derivative-free simplex search on the squared ACF error.
    The warm start puts each target value at its own lag and solves the shared
    normalization s = sum(a^2) by the quadratic fixed point it induces; when
    target lags do not interact this start is already exact.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    targets = {int(k): float(v) for k, v in targets.items()}
    for lag in targets:
        if not (1 <= lag < horizon):
            raise ValueError(f"target lag {lag} outside 1..{horizon - 1}")
    if variance <= 0:
        raise ValueError("variance must be positive")

    start = np.zeros(horizon)
    start[0] = 1.0
    tsq = sum(v * v for v in targets.values())
    if tsq > 0 and 4.0 * tsq <= 1.0:
        scale = (1.0 - math.sqrt(1.0 - 4.0 * tsq)) / (2.0 * tsq)
    else:
        scale = 1.0
    for lag, value in targets.items():
        start[lag] = value * scale

    def acf_error(free: np.ndarray) -> float:
        a = np.concatenate([[1.0], free])
        denom = float(np.dot(a, a))
        err = 0.0
        for lag, target in targets.items():
            got = float(np.dot(a[: len(a) - lag], a[lag:])) / denom
            err += (got - target) ** 2
        return err

    free = start[1:]
    if targets and free.size:
        best = optimize.minimize(
            acf_error,
            free,
            method="Nelder-Mead",
            options={"maxiter": 20000, "maxfev": 40000, "xatol": 1e-12, "fatol": 1e-16, "adaptive": True},
        )
        free = best.x
        if acf_error(start[1:]) < best.fun:
            free = start[1:]
    coeffs = np.concatenate([[1.0], free]) if free.size else np.array([1.0])

    misses = {
        lag: abs(theoretical_acf_of_ma(coeffs, lag) - target)
        for lag, target in targets.items()
    }
    if any(m > tol for m in misses.values()):
        detail = ", ".join(
            f"lag {lag}: target {targets[lag]:+.6f} missed by {m:.2e}"
            for lag, m in sorted(misses.items())
            if m > tol
        )
        raise InfeasibleTargets(f"no MA({horizon}) process realizes the targets ({detail})")
    return coeffs * math.sqrt(variance / float(np.dot(coeffs, coeffs)))


@dataclass(frozen=True)
class McIrCurve:
    """Monte Carlo IR curve: per-lookback mean IR across paths and its standard error."""

    n: np.ndarray
    ir_mean: np.ndarray
    ir_se: np.ndarray
    paths: int
    length: int
    seed: int
    rng: str = RNG_ALGORITHM

    def __post_init__(self) -> None:
        object.__setattr__(self, "n", np.asarray(self.n, dtype=int))
        object.__setattr__(self, "ir_mean", np.asarray(self.ir_mean, dtype=float))
        object.__setattr__(self, "ir_se", np.asarray(self.ir_se, dtype=float))
        if self.paths < 1:
            raise ValueError("paths must be >= 1")

    def __len__(self) -> int:
        return len(self.n)


def mc_ir_curve(
    spec: ProcessSpec,
    n_range: tuple[int, int],
    paths: int = 500,
    length: int = 6068,
    seed: int = 0,
) -> McIrCurve:
    """Average the per-path IR curve over independently seeded realizations.

    Each path draws its own series (see module notes on seeding) and is run
    through the momentum strategy at every lookback in the range; the MC
    standard error is the cross-path standard deviation over sqrt(paths).
    """
    n_min, n_max = int(n_range[0]), int(n_range[1])
    if length <= n_max:
        raise ValueError(f"length {length} too short for max lookback {n_max}")
    if paths < 1:
        raise ValueError("paths must be >= 1")
    x = np.stack([_generate(spec, length, path_rng(seed, k)) for k in range(paths)])
    per_path = ir_matrix(x, np.arange(n_min, n_max + 1))
    ir_mean = per_path.mean(axis=0)
    if paths >= 2:
        ir_se = per_path.std(axis=0, ddof=1) / math.sqrt(paths)
    else:
        ir_se = np.zeros(per_path.shape[1])
    return McIrCurve(
        n=np.arange(n_min, n_max + 1),
        ir_mean=ir_mean,
        ir_se=ir_se,
        paths=paths,
        length=length,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# JSON process-spec files ({"variant": ...}) and the MC curve CSV.
# ---------------------------------------------------------------------------

_VARIANTS = {
    "iid_gaussian": IidGaussian,
    "moving_average": MovingAverage,
    "square_wave_drift": SquareWaveDrift,
}


def spec_to_dict(spec: ProcessSpec) -> dict:
    if isinstance(spec, IidGaussian):
        return {"variant": "iid_gaussian", "mu": spec.mu, "sigma": spec.sigma}
    if isinstance(spec, MovingAverage):
        return {
            "variant": "moving_average",
            "mu": spec.mu,
            "coefficients": list(spec.coefficients),
            "sigma": spec.sigma,
        }
    if isinstance(spec, SquareWaveDrift):
        return {
            "variant": "square_wave_drift",
            "mu": spec.mu,
            "amplitude": spec.amplitude,
            "t_wave": spec.t_wave,
            "noise": spec_to_dict(spec.noise),
        }
    raise TypeError(f"unknown process spec {type(spec).__name__}")


def spec_from_dict(data: dict) -> ProcessSpec:
    if not isinstance(data, dict) or "variant" not in data:
        raise ValueError("process spec must be an object with a 'variant' field")
    variant = data["variant"]
    if variant not in _VARIANTS:
        raise ValueError(
            f"unknown process variant {variant!r}; expected one of {sorted(_VARIANTS)}"
        )
    fields = {k: v for k, v in data.items() if k != "variant"}
    try:
        if variant == "iid_gaussian":
            return IidGaussian(mu=float(fields["mu"]), sigma=float(fields["sigma"]))
        if variant == "moving_average":
            return MovingAverage(
                mu=float(fields["mu"]),
                coefficients=tuple(float(a) for a in fields["coefficients"]),
                sigma=float(fields["sigma"]),
            )
        return SquareWaveDrift(
            mu=float(fields["mu"]),
            amplitude=float(fields["amplitude"]),
            t_wave=float(fields["t_wave"]),
            noise=spec_from_dict(fields["noise"]),
        )
    except KeyError as exc:
        raise ValueError(f"process spec {variant!r} is missing field {exc}") from None


def load_process_spec(path: str) -> ProcessSpec:
    with open(path, encoding="utf-8") as fh:
        return spec_from_dict(json.load(fh))


def dump_process_spec(path: str, spec: ProcessSpec) -> None:
    atomic_write_text(path, json.dumps(spec_to_dict(spec), indent=2) + "\n")


MC_CURVE_HEADER = ["n", "ir_mean", "ir_mc_se", "paths", "length", "seed"]


def mc_ir_curve_csv_text(curve: McIrCurve) -> str:
    buf = io.StringIO()
    buf.write(f"# rng={curve.rng}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MC_CURVE_HEADER)
    for i in range(len(curve)):
        writer.writerow(
            [
                int(curve.n[i]),
                format_value(curve.ir_mean[i]),
                format_value(curve.ir_se[i]),
                curve.paths,
                curve.length,
                curve.seed,
            ]
        )
    return buf.getvalue()


def write_mc_ir_curve_csv(path: str, curve: McIrCurve) -> None:
    atomic_write_text(path, mc_ir_curve_csv_text(curve))
