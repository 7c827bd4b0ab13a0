"""Detection and digitization chain.

Converts field trajectories into what the electronics would see: the 2x2
combiner ports, photodetector and scope bandwidth models (cascades of
identical single-pole sections), the RF amplifier with additive noise, the
uniform mid-rise quantizer, and the one-sample-per-pulse pickoff.

All operations are pure functions of their inputs (rng passed explicitly);
DetectionChain at the bottom adds the stateful streaming variant used by
the experiment drivers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as _signal

from . import streams
from .errors import ConfigError, DegenerateInputError

SINGLE_PORT = "single"
CONTRAST = "contrast"


# --------------------------------------------------------------------------
# types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AnalogTrace:
    """Uniformly sampled real-valued signal."""

    t0: float  # ns
    dt: float  # ns
    values: np.ndarray

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError(f"trace dt must be > 0, got {self.dt}")

    def __len__(self) -> int:
        return self.values.shape[0]

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) * self.dt

    def sample_rate_ghz(self) -> float:
        return 1.0 / self.dt


@dataclass(frozen=True)
class FilterSpec:
    """Cascade of `order` identical discrete single-pole sections."""

    kind: str  # "lowpass" | "highpass"
    cutoff_ghz: float
    order: int = 1

    def validate(self) -> None:
        if self.kind not in ("lowpass", "highpass"):
            raise ConfigError(f"unknown filter kind: {self.kind!r}")
        if self.cutoff_ghz <= 0:
            raise ConfigError(f"cutoff must be > 0, got {self.cutoff_ghz}")
        if self.order < 1:
            raise ConfigError(f"order must be >= 1, got {self.order}")


@dataclass(frozen=True)
class AmplifierSpec:
    gain_db: float = 30.0
    noise_sigma: float = 0.0  # additive Gaussian, same units as the trace

    def validate(self) -> None:
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


@dataclass(frozen=True)
class DigitizerSpec:
    rate_gsps: float = 50.0
    bits: int = 8
    full_scale: tuple[float, float] | None = None  # None: calibrate first

    def validate(self) -> None:
        if self.rate_gsps <= 0:
            raise ConfigError(f"rate must be > 0, got {self.rate_gsps}")
        if not 1 <= self.bits <= 16:
            raise ConfigError(f"bits must be in 1..16, got {self.bits}")
        if self.full_scale is not None:
            v_min, v_max = self.full_scale
            if not v_min < v_max:
                raise ConfigError(f"full_scale must have v_min < v_max, got {self.full_scale}")

    def levels(self) -> int:
        return 1 << self.bits


@dataclass(frozen=True)
class SamplingPolicy:
    """One value per modulation cycle, at cycle_start + delay."""

    delay: float  # ns within the cycle
    interpolation: str = "nearest"  # "nearest" | "linear"

    def validate(self, period: float | None = None) -> None:
        if self.interpolation not in ("nearest", "linear"):
            raise ConfigError(f"unknown interpolation: {self.interpolation!r}")
        if self.delay < 0:
            raise ConfigError(f"delay must be >= 0, got {self.delay}")
        if period is not None and not self.delay < period:
            raise ConfigError(
                f"delay {self.delay} ns must be inside the cycle (period {period} ns)"
            )


@dataclass(frozen=True)
class CodeTrace:
    """Quantized trace plus clipping bookkeeping."""

    t0: float
    dt: float
    codes: np.ndarray  # uint16
    spec: DigitizerSpec
    clipped_low: int = 0
    clipped_high: int = 0

    def __len__(self) -> int:
        return self.codes.shape[0]

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) * self.dt


@dataclass(frozen=True)
class SampleBatch:
    """One value per analyzed modulation cycle."""

    values: np.ndarray
    cycle_indices: np.ndarray
    phases: np.ndarray | None = None  # beat phases (rad), when extracted
    codes: np.ndarray | None = None  # digitized codes, when quantized

    def __len__(self) -> int:
        return self.values.shape[0]


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------


def mmi_combine(e1, e2):
    """Port intensities of the 2x2 combiner (90 degree cross phase).

    i_plus = |e1 + i*e2|^2 / 2, i_minus = |i*e1 + e2|^2 / 2; their sum is
    |e1|^2 + |e2|^2 exactly.  Accepts scalars or arrays.
    """
    e1 = np.asarray(e1, dtype=np.complex128)
    e2 = np.asarray(e2, dtype=np.complex128)
    i_plus = 0.5 * np.abs(e1 + 1j * e2) ** 2
    i_minus = 0.5 * np.abs(1j * e1 + e2) ** 2
    if i_plus.ndim == 0:
        return float(i_plus), float(i_minus)
    return i_plus, i_minus


def beat_intensity_model(i_cw, i_gs, accumulated_phase):
    """Analytic single-output interference model.

    total = (i_cw + i_gs) + 2*sqrt(i_cw*i_gs)*cos(accumulated_phase); the
    cross-check reference for the field-level simulation.
    """
    i_cw = np.asarray(i_cw, dtype=float)
    i_gs = np.asarray(i_gs, dtype=float)
    if np.any(i_cw < 0) or np.any(i_gs < 0):
        raise ValueError("intensities must be non-negative")
    out = (i_cw + i_gs) + 2.0 * np.sqrt(i_cw * i_gs) * np.cos(accumulated_phase)
    if out.ndim == 0:
        return float(out)
    return out


def _section_coeffs(spec: FilterSpec, sample_rate_ghz: float):
    """Bilinear-transform coefficients of one prewarped single-pole section."""
    nyquist = 0.5 * sample_rate_ghz
    if spec.cutoff_ghz >= nyquist:
        raise ConfigError(
            f"cutoff {spec.cutoff_ghz} GHz >= Nyquist {nyquist} GHz of the trace"
        )
    k = math.tan(math.pi * spec.cutoff_ghz / sample_rate_ghz)
    if spec.kind == "lowpass":
        b = np.array([k, k]) / (k + 1.0)
    else:
        b = np.array([1.0, -1.0]) / (k + 1.0)
    a = np.array([1.0, (k - 1.0) / (k + 1.0)])
    return b, a


def apply_filter(trace: AnalogTrace, spec: FilterSpec) -> AnalogTrace:
    """Run the trace through the single-pole cascade.

    State is initialized from the first sample (steady-state for a constant
    input equal to values[0]), so a constant trace maps to itself through a
    lowpass and decays to zero through a highpass.
    """
    spec.validate()
    b, a = _section_coeffs(spec, trace.sample_rate_ghz())
    x = np.asarray(trace.values, dtype=float)
    zi0 = _signal.lfilter_zi(b, a)
    for _ in range(spec.order):
        x, _ = _signal.lfilter(b, a, x, zi=zi0 * x[0])
    return AnalogTrace(trace.t0, trace.dt, x)


def amplify(
    trace: AnalogTrace, spec: AmplifierSpec, rng: np.random.Generator | None = None
) -> AnalogTrace:
    """Apply voltage gain 10^(gain_db/20), then add i.i.d. Gaussian noise."""
    spec.validate()
    x = trace.values * 10.0 ** (spec.gain_db / 20.0)
    if spec.noise_sigma > 0:
        if rng is None:
            raise ConfigError("amplifier noise requires an rng")
        x = x + spec.noise_sigma * rng.standard_normal(len(trace))
    return AnalogTrace(trace.t0, trace.dt, x)


def quantize_values(values: np.ndarray, spec: DigitizerSpec):
    """Uniform mid-rise quantization of raw values.

    code = clamp(floor((v - v_min)/(v_max - v_min) * 2^bits), 0, 2^bits - 1).
    Returns (codes, clipped_low, clipped_high).
    """
    spec.validate()
    if spec.full_scale is None:
        raise ConfigError("digitizer full_scale is not set (calibrate first)")
    v_min, v_max = spec.full_scale
    n_levels = spec.levels()
    raw = np.floor((values - v_min) / (v_max - v_min) * n_levels)
    clipped_low = int(np.count_nonzero(raw < 0))
    clipped_high = int(np.count_nonzero(raw > n_levels - 1))
    codes = np.clip(raw, 0, n_levels - 1).astype(np.uint16)
    return codes, clipped_low, clipped_high


def digitize(trace: AnalogTrace, spec: DigitizerSpec) -> CodeTrace:
    """Resample to the digitizer rate (linear interpolation) and quantize.

    Clipping against the full scale is counted, not raised.
    """
    spec.validate()
    dig_dt = 1.0 / spec.rate_gsps
    span = (len(trace) - 1) * trace.dt
    n_out = int(math.floor(span / dig_dt)) + 1
    t_rel = np.arange(n_out) * dig_dt
    resampled = np.interp(t_rel, np.arange(len(trace)) * trace.dt, trace.values)
    codes, lo, hi = quantize_values(resampled, spec)
    return CodeTrace(trace.t0, dig_dt, codes, spec, lo, hi)


def dequantize(codes: np.ndarray, spec: DigitizerSpec) -> np.ndarray:
    """Map codes back to bin-center values of the full scale."""
    if spec.full_scale is None:
        raise ConfigError("digitizer full_scale is not set")
    v_min, v_max = spec.full_scale
    width = (v_max - v_min) / spec.levels()
    return v_min + (codes.astype(float) + 0.5) * width


def sample_per_pulse(
    trace: AnalogTrace | CodeTrace,
    cycle_start_times: np.ndarray,
    policy: SamplingPolicy,
    warmup_cycles: int = 0,
) -> SampleBatch:
    """Pick one value per modulation cycle at cycle_start + delay.

    Works on analog and code traces alike; the first warmup_cycles cycles
    are excluded from the batch.
    """
    policy.validate()
    starts = np.asarray(cycle_start_times, dtype=float)[warmup_cycles:]
    if starts.size == 0:
        raise ConfigError("no cycles left after warm-up exclusion")
    t_want = starts + policy.delay
    values = trace.codes if isinstance(trace, CodeTrace) else trace.values
    pos = (t_want - trace.t0) / trace.dt
    if np.any(pos < 0) or np.any(pos > len(values) - 1):
        raise ConfigError(
            "requested sampling delay falls outside the trace for some cycle"
        )
    if policy.interpolation == "nearest":
        out = values[np.rint(pos).astype(np.int64)].astype(float)
    else:
        k = np.floor(pos).astype(np.int64)
        k = np.minimum(k, len(values) - 2)
        frac = pos - k
        out = (1.0 - frac) * values[k] + frac * values[k + 1]
    idx = np.arange(warmup_cycles, warmup_cycles + starts.size, dtype=np.int64)
    return SampleBatch(values=out, cycle_indices=idx)


def instantaneous_beat_frequency(trace: AnalogTrace):
    """Beat frequency from successive zero-crossing intervals.

    The trace must be mean-free (apply a highpass first).  Each adjacent
    crossing pair gives f = 1/(2*dt_zc) at the interval midpoint; returns
    (t_mid, f_ghz) arrays, empty when fewer than two crossings exist.
    """
    v = trace.values
    s = np.sign(v)
    # treat exact zeros as belonging to the previous sign
    nz = np.nonzero(s)[0]
    if nz.size < 2:
        return np.array([]), np.array([])
    sf = s.copy()
    for i in range(1, len(sf)):
        if sf[i] == 0:
            sf[i] = sf[i - 1]
    idx = np.nonzero(sf[1:] * sf[:-1] < 0)[0]
    if idx.size < 2:
        return np.array([]), np.array([])
    # linear interpolation of each crossing instant
    frac = v[idx] / (v[idx] - v[idx + 1])
    t_c = trace.t0 + (idx + frac) * trace.dt
    dt_zc = np.diff(t_c)
    t_mid = 0.5 * (t_c[1:] + t_c[:-1])
    f = 1.0 / (2.0 * dt_zc)
    return t_mid, f


# --------------------------------------------------------------------------
# streaming chain
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainSpec:
    """End-to-end detection chain settings.

    Signal path per port: combiner output -> photodetector lowpass -> RF
    amplifier (gain + additive noise) -> scope lowpass -> resample to the
    digitizer grid.  Afterwards the digital stage either highpass-filters
    the chosen port (observable "single") or forms the normalized two-port
    contrast (v+ - v-)/(v+ + v-) (observable "contrast"), which cancels
    intensity noise of both lasers to second order.
    """

    pd_filter: FilterSpec = field(
        default_factory=lambda: FilterSpec("lowpass", 40.0, 2)
    )
    amplifier: AmplifierSpec = field(
        default_factory=lambda: AmplifierSpec(30.0, 2.0)
    )
    scope_filter: FilterSpec = field(
        default_factory=lambda: FilterSpec("lowpass", 20.0, 4)
    )
    hp_filter: FilterSpec = field(
        default_factory=lambda: FilterSpec("highpass", 0.03, 1)
    )
    digitizer: DigitizerSpec = field(default_factory=DigitizerSpec)
    observable: str = SINGLE_PORT

    def validate(self) -> None:
        self.pd_filter.validate()
        self.amplifier.validate()
        self.scope_filter.validate()
        self.hp_filter.validate()
        self.digitizer.validate()
        if self.observable not in (SINGLE_PORT, CONTRAST):
            raise ConfigError(f"unknown observable: {self.observable!r}")


class _StreamingCascade:
    """Single-pole cascade whose state persists across trace blocks."""

    def __init__(self, spec: FilterSpec, sample_rate_ghz: float):
        self.b, self.a = _section_coeffs(spec, sample_rate_ghz)
        self.order = spec.order
        self.zi: list[np.ndarray] | None = None

    def process(self, x: np.ndarray) -> np.ndarray:
        if self.zi is None:
            zi0 = _signal.lfilter_zi(self.b, self.a)
            self.zi = [zi0 * x[0] for _ in range(self.order)]
        for s in range(self.order):
            x, self.zi[s] = _signal.lfilter(self.b, self.a, x, zi=self.zi[s])
        return x


@dataclass(frozen=True)
class ChainBlock:
    """Digitizer-grid view of one block of consecutive cycles."""

    t0: float
    dt: float
    first_cycle: int
    n_cycles: int
    samples_per_cycle: int
    observable: np.ndarray  # sampled observable on the digitizer grid
    port_plus: np.ndarray  # amplified port voltage, digitizer grid
    port_minus: np.ndarray | None

    def cycle_start_times(self) -> np.ndarray:
        per = self.samples_per_cycle * self.dt
        return self.t0 + np.arange(self.n_cycles) * per


class DetectionChain:
    """Stateful detection pipeline for consecutive trajectory blocks.

    Filter state, the digitizer alignment, and the per-cycle amplifier
    noise streams are all carried across blocks, so processing in blocks of
    any size gives identical results.
    """

    def __init__(
        self,
        spec: ChainSpec,
        trace_dt: float,
        period: float,
        master_seed: int,
        trajectory: int = 0,
    ):
        spec.validate()
        self.spec = spec
        self.trace_dt = trace_dt
        self.period = period
        self.master_seed = master_seed
        self.trajectory = trajectory
        rate = 1.0 / trace_dt
        self.rec_per_cycle = round(period / trace_dt)
        if abs(self.rec_per_cycle * trace_dt - period) > 1e-9 * period:
            raise ConfigError("record interval must divide the modulation period")
        dig_dt = 1.0 / spec.digitizer.rate_gsps
        self.dig_per_cycle = round(period / dig_dt)
        if abs(self.dig_per_cycle * dig_dt - period) > 1e-6 * period:
            raise ConfigError(
                "digitizer interval must divide the modulation period "
                f"(period={period} ns, digitizer dt={dig_dt} ns)"
            )
        self.dig_dt = dig_dt
        self._pd = [_StreamingCascade(spec.pd_filter, rate) for _ in range(2)]
        self._scope = [_StreamingCascade(spec.scope_filter, rate) for _ in range(2)]
        self._hp = _StreamingCascade(spec.hp_filter, spec.digitizer.rate_gsps)
        self._gain = 10.0 ** (spec.amplifier.gain_db / 20.0)

    def _amp_noise(self, first_cycle: int, n_cycles: int, port: int) -> np.ndarray:
        sigma = self.spec.amplifier.noise_sigma
        if sigma == 0.0:
            return np.zeros(n_cycles * self.rec_per_cycle)
        chunks = [
            streams.stream(
                self.master_seed,
                streams.DOMAIN_AMPLIFIER,
                self.trajectory,
                first_cycle + k,
                port,
            ).standard_normal(self.rec_per_cycle)
            for k in range(n_cycles)
        ]
        return sigma * np.concatenate(chunks)

    def process(self, e1: np.ndarray, e2: np.ndarray, first_cycle: int) -> ChainBlock:
        """Run one block of cycles (fields on the record grid) through the chain."""
        n = e1.shape[0]
        if n % self.rec_per_cycle != 0:
            raise ConfigError("block length must be a whole number of cycles")
        n_cycles = n // self.rec_per_cycle
        i_plus, i_minus = mmi_combine(e1, e2)

        ports = []
        for port, x in enumerate((i_plus, i_minus)):
            y = self._pd[port].process(np.asarray(x, dtype=float))
            y = y * self._gain + self._amp_noise(first_cycle, n_cycles, port)
            y = self._scope[port].process(y)
            # resample onto the digitizer grid, block-aligned on cycle starts
            t_rel = np.arange(n_cycles * self.dig_per_cycle) * self.dig_dt
            y50 = np.interp(t_rel, np.arange(n) * self.trace_dt, y)
            ports.append(y50)
        v_plus, v_minus = ports

        if self.spec.observable == CONTRAST:
            denom = v_plus + v_minus
            tiny = 1e-12 * max(1.0, float(np.max(np.abs(denom))))
            obs = (v_plus - v_minus) / np.where(np.abs(denom) < tiny, tiny, denom)
        else:
            obs = self._hp.process(v_plus)

        return ChainBlock(
            t0=first_cycle * self.rec_per_cycle * self.trace_dt,
            dt=self.dig_dt,
            first_cycle=first_cycle,
            n_cycles=n_cycles,
            samples_per_cycle=self.dig_per_cycle,
            observable=obs,
            port_plus=v_plus,
            port_minus=v_minus,
        )
