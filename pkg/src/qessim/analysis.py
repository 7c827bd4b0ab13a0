"""Statistical validation of sample batches.

Histogram shape against the arcsine law, autocorrelation with noise
subtraction, an omnibus normality test on correlation coefficients,
circular phase statistics for locking classification, and min-entropy
estimation.  Everything here is a pure function over immutable arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import fft as _fft

from .errors import ConfigError, DegenerateInputError

GS_MODE = "gs"
CW_MODE = "cw"


@dataclass(frozen=True)
class PhaseBatch:
    """Per-cycle relative phase estimates, folded into [-pi, pi)."""

    values: np.ndarray

    def __post_init__(self):
        folded = np.mod(np.asarray(self.values, dtype=float) + np.pi, 2 * np.pi) - np.pi
        object.__setattr__(self, "values", folded)

    def __len__(self) -> int:
        return self.values.shape[0]


class AutocorrResult(NamedTuple):
    gamma: np.ndarray  # autocovariance Gamma(k), k = 0..max_lag
    rho: np.ndarray  # normalized, rho(0) = 1
    noise_floor: float  # 1/sqrt(n)
    n: int


def _autocovariance(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Gamma(k) over centered data, normalized by (n - k); zeros if constant."""
    n = x.shape[0]
    xc = x - x.mean()
    if not np.any(xc):
        return np.zeros(max_lag + 1)
    nfft = _fft.next_fast_len(2 * n)
    spec = _fft.rfft(xc, nfft)
    acov = _fft.irfft(spec * np.conj(spec), nfft)[: max_lag + 1]
    return acov / (n - np.arange(max_lag + 1))


def autocorrelation(samples, max_lag: int) -> AutocorrResult:
    """Autocovariance Gamma(k) = <x_i x_{i+k}> - <x>^2 up to max_lag.

    Computed FFT-side on centered data with per-lag normalization by
    (n - k); rho(k) = Gamma(k)/Gamma(0).  The statistical noise floor for
    i.i.d. data is 1/sqrt(n).
    """
    x = np.asarray(samples, dtype=float)
    n = x.shape[0]
    if max_lag < 0:
        raise ConfigError("max_lag must be >= 0")
    if n <= max_lag:
        raise ConfigError(f"need more than max_lag={max_lag} samples, got {n}")
    gamma = _autocovariance(x, max_lag)
    if gamma[0] == 0:
        raise DegenerateInputError("zero-variance input")
    return AutocorrResult(gamma, gamma / gamma[0], 1.0 / math.sqrt(n), n)


class NoiseSubtractedResult(NamedTuple):
    gamma: np.ndarray  # Gamma_y - Gamma_n
    rho: np.ndarray  # normalized by Gamma_y(0) - Gamma_n(0)
    gamma_y: np.ndarray
    gamma_n: np.ndarray
    noise_floor: float


def noise_subtracted_autocorrelation(
    in_pulse, off_pulse, max_lag: int
) -> NoiseSubtractedResult:
    """Autocorrelation of the signal alone, assuming independent noise.

    Gamma_x(k) = Gamma_y(k) - Gamma_n(k), where y are samples taken within
    the pulse and n samples taken outside it; the normalized form divides
    by Gamma_y(0) - Gamma_n(0).  A constant noise reference contributes
    Gamma_n = 0; identical batches cancel exactly (all-zero outputs).
    """
    ry = autocorrelation(in_pulse, max_lag)
    y_off = np.asarray(off_pulse, dtype=float)
    if y_off.shape[0] <= max_lag:
        raise ConfigError(
            f"need more than max_lag={max_lag} noise samples, got {y_off.shape[0]}"
        )
    gamma_n = _autocovariance(y_off, max_lag)
    gamma = ry.gamma - gamma_n
    denom = gamma[0]
    if denom == 0 and not np.any(gamma):
        rho = np.zeros_like(gamma)
    elif denom <= 0:
        raise DegenerateInputError(
            "noise variance exceeds in-pulse variance; nothing to normalize"
        )
    else:
        rho = gamma / denom
    floor = 1.0 / math.sqrt(min(ry.n, y_off.shape[0]))
    return NoiseSubtractedResult(gamma, rho, ry.gamma, gamma_n, floor)


def arcsine_cdf(x) -> np.ndarray:
    """CDF of the arcsine law on [-1, 1]: F(x) = (2/pi) asin(sqrt((x+1)/2))."""
    u = np.clip((np.asarray(x, dtype=float) + 1.0) / 2.0, 0.0, 1.0)
    return (2.0 / np.pi) * np.arcsin(np.sqrt(u))


class ArcsineKsResult(NamedTuple):
    distance: float
    normalized: np.ndarray


def arcsine_ks(samples, lo_percentile: float = 0.5, hi_percentile: float = 99.5):
    """KS distance of the (robustly rescaled) samples against the arcsine law.

    Samples are affinely mapped so the given percentiles land on -1 and +1,
    clipped to [-1, 1], then compared with the arcsine CDF.
    """
    x = np.asarray(samples, dtype=float)
    if x.shape[0] < 100:
        raise ConfigError(f"need at least 100 samples, got {x.shape[0]}")
    lo, hi = np.percentile(x, [lo_percentile, hi_percentile])
    if not hi > lo:
        raise DegenerateInputError("constant input")
    xn = np.clip(2.0 * (x - lo) / (hi - lo) - 1.0, -1.0, 1.0)
    xs = np.sort(xn)
    n = xs.shape[0]
    cdf = arcsine_cdf(xs)
    d_plus = np.max(np.arange(1, n + 1) / n - cdf)
    d_minus = np.max(cdf - np.arange(0, n) / n)
    return ArcsineKsResult(float(max(d_plus, d_minus)), xn)


class DagostinoResult(NamedTuple):
    statistic: float  # K^2 omnibus statistic
    p_value: float
    z_skew: float
    z_kurt: float


def dagostino_pearson(values) -> DagostinoResult:
    """Omnibus normality test from transformed skewness and kurtosis.

    K^2 = Z_s^2 + Z_k^2 is chi-squared with 2 degrees of freedom under
    normality, so p = exp(-K^2/2).
    """
    x = np.asarray(values, dtype=float)
    n = x.shape[0]
    if n < 20:
        raise ConfigError(f"need at least 20 values, got {n}")
    xc = x - x.mean()
    m2 = np.mean(xc**2)
    if m2 == 0:
        raise DegenerateInputError("constant input")
    g1 = np.mean(xc**3) / m2**1.5
    b2 = np.mean(xc**4) / m2**2

    # skewness transform (D'Agostino)
    y = g1 * math.sqrt(((n + 1) * (n + 3)) / (6.0 * (n - 2)))
    beta2 = (
        3.0 * (n**2 + 27 * n - 70) * (n + 1) * (n + 3)
        / ((n - 2.0) * (n + 5) * (n + 7) * (n + 9))
    )
    w2 = -1.0 + math.sqrt(2.0 * (beta2 - 1.0))
    delta = 1.0 / math.sqrt(0.5 * math.log(w2))
    alpha = math.sqrt(2.0 / (w2 - 1.0))
    if y == 0:
        y = 1.0
    z_skew = delta * math.log(y / alpha + math.sqrt((y / alpha) ** 2 + 1.0))

    # kurtosis transform (Anscombe-Glynn)
    e_b2 = 3.0 * (n - 1) / (n + 1)
    var_b2 = 24.0 * n * (n - 2) * (n - 3) / ((n + 1) ** 2 * (n + 3) * (n + 5))
    xk = (b2 - e_b2) / math.sqrt(var_b2)
    sqrt_beta1 = (
        6.0 * (n * n - 5 * n + 2) / ((n + 7) * (n + 9))
        * math.sqrt((6.0 * (n + 3) * (n + 5)) / (n * (n - 2) * (n - 3)))
    )
    a = 6.0 + 8.0 / sqrt_beta1 * (
        2.0 / sqrt_beta1 + math.sqrt(1.0 + 4.0 / sqrt_beta1**2)
    )
    denom = 1.0 + xk * math.sqrt(2.0 / (a - 4.0))
    if denom == 0:
        raise DegenerateInputError("degenerate kurtosis transform")
    term = math.copysign(abs((1.0 - 2.0 / a) / denom) ** (1.0 / 3.0), denom)
    z_kurt = ((1.0 - 2.0 / (9.0 * a)) - term) / math.sqrt(2.0 / (9.0 * a))

    k2 = z_skew * z_skew + z_kurt * z_kurt
    return DagostinoResult(k2, math.exp(-k2 / 2.0), z_skew, z_kurt)


class CircularStats(NamedTuple):
    mean_resultant_length: float
    variance: float  # 1 - R, in [0, 1]


def circular_stats(phases) -> CircularStats:
    """Mean resultant length and circular variance of a phase batch."""
    values = phases.values if isinstance(phases, PhaseBatch) else np.asarray(phases)
    if values.shape[0] < 2:
        raise ConfigError("need at least 2 phases")
    r = abs(np.mean(np.exp(1j * values)))
    return CircularStats(float(r), float(1.0 - r))


class PhaseFit(NamedTuple):
    phi: float  # fitted phase offset in [-pi, pi)
    amplitude: float
    offset: float
    confident: bool
    residual_std: float


def extract_pulse_phase(values, theta, min_snr: float = 5.0) -> PhaseFit:
    """Least-squares fit of A*cos(theta(t) + phi) + C over one segment.

    theta is the accumulated deterministic beat phase on the segment grid;
    it must span at least two oscillation periods.  The fit is linear in
    (a, b, C) with a = A cos(phi), b = -A sin(phi).  `confident` is False
    when the fitted amplitude resolves at less than min_snr standard errors
    above the residual floor.
    """
    y = np.asarray(values, dtype=float)
    th = np.asarray(theta, dtype=float)
    if y.shape != th.shape:
        raise ConfigError("values and theta must have the same shape")
    if th.max() - th.min() < 4.0 * np.pi:
        raise ConfigError("segment must cover at least two beat periods")
    design = np.stack([np.cos(th), np.sin(th), np.ones_like(th)], axis=1)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    a, b, c = coef
    amplitude = math.hypot(a, b)
    phi = math.atan2(-b, a)
    resid = y - design @ coef
    residual_std = float(np.std(resid))
    amp_se = residual_std * math.sqrt(2.0 / y.shape[0])
    confident = amplitude > min_snr * amp_se
    return PhaseFit(phi, float(amplitude), float(c), confident, residual_std)


def min_entropy(counts, bits: int | None = None) -> float:
    """Min-entropy -log2(max_i count_i / n) of an outcome histogram."""
    c = np.asarray(counts, dtype=float)
    total = c.sum()
    if c.size == 0 or total <= 0:
        raise DegenerateInputError("empty histogram")
    if np.any(c < 0):
        raise ConfigError("negative counts")
    h = -math.log2(c.max() / total)
    if bits is not None:
        h = min(h, float(bits))
    return h


class LockResult(NamedTuple):
    locked: bool
    metric: float  # circular variance (gs) or peak/floor ratio (cw)
    mode: str
    beat_freq_ghz: float | None  # spectral peak when evaluated on a trace


def lock_classify(
    phases=None,
    beat_trace=None,
    circ_var_threshold: float = 0.05,
    peak_ratio_threshold: float = 10.0,
    min_cycles: int = 50,
    f_min_ghz: float = 0.02,
) -> LockResult:
    """Classify locked vs unlocked operation.

    Phase-batch input (one relative phase per pulse, or a decimated
    relative-phase time series): locked iff the circular variance is below
    circ_var_threshold.  CW beat-trace input: locked iff no discrete
    spectral line rises peak_ratio_threshold times above the median
    spectral floor.  Thresholds are tunable.
    """
    if (phases is None) == (beat_trace is None):
        raise ConfigError("pass exactly one of phases / beat_trace")
    if phases is not None:
        values = phases.values if isinstance(phases, PhaseBatch) else np.asarray(phases)
        if values.shape[0] < min_cycles:
            raise DegenerateInputError(
                f"need at least {min_cycles} phases, got {values.shape[0]}"
            )
        cv = circular_stats(values).variance
        return LockResult(cv < circ_var_threshold, cv, GS_MODE, None)

    v = np.asarray(beat_trace.values, dtype=float)
    if v.shape[0] < 64:
        raise DegenerateInputError("trace too short for spectral classification")
    win = np.hanning(v.shape[0])
    spec = np.abs(_fft.rfft((v - v.mean()) * win))
    freqs = np.fft.rfftfreq(v.shape[0], beat_trace.dt)
    k_min = int(np.searchsorted(freqs, f_min_ghz))
    k_min = max(k_min, 1)
    band = spec[k_min:]
    if band.size < 8:
        raise DegenerateInputError("trace too short above the minimum frequency")
    floor = float(np.median(band))
    if floor == 0.0:
        return LockResult(True, 0.0, CW_MODE, None)
    k_peak = int(np.argmax(band))
    ratio = float(band[k_peak] / floor)
    beat = float(freqs[k_min + k_peak])
    return LockResult(ratio < peak_ratio_threshold, ratio, CW_MODE, beat)


@dataclass(frozen=True)
class StatsReport:
    """Bundle of the statistics computed over one sample batch."""

    n_samples: int
    histogram_edges: np.ndarray
    histogram_counts: np.ndarray
    gamma: np.ndarray  # noise-subtracted autocovariance
    rho: np.ndarray  # normalized form
    rho_raw: np.ndarray | None  # in-pulse-only normalized autocorrelation
    noise_floor: float
    dp_p_value: float
    arcsine_distance: float
    circular_variance: float | None
    min_entropy_bits: float | None
    quantizer_bits: int | None

    def validate(self) -> None:
        if abs(self.rho[0] - 1.0) > 1e-9:
            raise ConfigError("rho(0) must be 1")
        if int(self.histogram_counts.sum()) != self.n_samples:
            raise ConfigError("histogram counts must sum to n")
        if self.circular_variance is not None and not (
            0.0 <= self.circular_variance <= 1.0
        ):
            raise ConfigError("circular variance out of [0, 1]")
        if self.min_entropy_bits is not None and self.quantizer_bits is not None:
            if not 0.0 <= self.min_entropy_bits <= self.quantizer_bits:
                raise ConfigError("min-entropy out of [0, bits]")

    def to_text(self) -> str:
        lines = [
            f"samples analyzed        : {self.n_samples}",
            f"statistical noise floor : {self.noise_floor:.6g}",
            f"rho(1) (reported)       : {self.rho[1]:.6g}" if len(self.rho) > 1 else "",
            f"max |rho(k)|, k=2..{len(self.rho)-1} : "
            f"{np.max(np.abs(self.rho[2:])):.6g}" if len(self.rho) > 2 else "",
            f"normality p-value (k>=2): {self.dp_p_value:.6g}",
            f"arcsine KS distance     : {self.arcsine_distance:.6g}",
        ]
        if self.circular_variance is not None:
            lines.append(f"circular variance       : {self.circular_variance:.6g}")
        if self.min_entropy_bits is not None:
            lines.append(f"min-entropy (bits/smpl) : {self.min_entropy_bits:.6g}")
        return "\n".join(s for s in lines if s)
