"""Detection chain: combiner, filters, amplifier, quantizer, sampler."""

import math

import numpy as np
import pytest

from qessim.detection import (
    AmplifierSpec,
    AnalogTrace,
    ChainSpec,
    DetectionChain,
    DigitizerSpec,
    FilterSpec,
    SamplingPolicy,
    amplify,
    apply_filter,
    beat_intensity_model,
    digitize,
    instantaneous_beat_frequency,
    mmi_combine,
    quantize_values,
    sample_per_pulse,
)
from qessim.errors import ConfigError


class TestMmiCombine:
    def test_single_input_splits_evenly(self):
        assert mmi_combine(1.0, 0.0) == (0.5, 0.5)

    def test_quadrature_input_routes_to_one_port(self):
        i_plus, i_minus = mmi_combine(1.0, 1.0j)
        assert i_plus == pytest.approx(0.0, abs=1e-15)
        assert i_minus == pytest.approx(2.0, rel=1e-15)

    def test_in_phase_input_splits(self):
        i_plus, i_minus = mmi_combine(1.0, 1.0)
        assert i_plus == pytest.approx(1.0, rel=1e-15)
        assert i_minus == pytest.approx(1.0, rel=1e-15)

    def test_energy_conservation_100k_pairs(self):
        rng = np.random.default_rng(11)
        e1 = rng.standard_normal(100_000) + 1j * rng.standard_normal(100_000)
        e2 = rng.standard_normal(100_000) + 1j * rng.standard_normal(100_000)
        i_plus, i_minus = mmi_combine(e1, e2)
        total = np.abs(e1) ** 2 + np.abs(e2) ** 2
        # machine-exact: bounded by a few ulps of the total power
        err = np.max(np.abs(i_plus + i_minus - total) / total)
        assert err < 1e-14


class TestBeatIntensityModel:
    def test_constructive(self):
        assert beat_intensity_model(1.0, 1.0, 0.0) == pytest.approx(4.0)

    def test_destructive(self):
        assert beat_intensity_model(1.0, 1.0, math.pi) == pytest.approx(0.0, abs=1e-15)

    def test_unbalanced(self):
        assert beat_intensity_model(4.0, 1.0, 0.0) == pytest.approx(9.0)

    def test_rejects_negative_intensity(self):
        with pytest.raises(ValueError):
            beat_intensity_model(-1.0, 1.0, 0.0)


class TestFilters:
    def test_lowpass_dc_gain(self):
        trace = AnalogTrace(0.0, 0.02, np.full(4000, 1.37))
        out = apply_filter(trace, FilterSpec("lowpass", 5.0, 1))
        assert np.max(np.abs(out.values[100:] - 1.37)) < 1e-6

    def test_lowpass_minus_3db_at_cutoff(self):
        fs, fc = 50.0, 5.0
        t = np.arange(8000) * (1.0 / fs)
        trace = AnalogTrace(0.0, 1.0 / fs, np.sin(2 * np.pi * fc * t))
        out = apply_filter(trace, FilterSpec("lowpass", fc, 1))
        tail = out.values[4000:]
        amp = math.sqrt(2.0) * float(np.std(tail))
        assert amp == pytest.approx(1.0 / math.sqrt(2.0), rel=0.02)

    def test_highpass_blocks_dc(self):
        fs, fc = 50.0, 1.0
        n_tc = 10.0 / (2 * np.pi * fc)  # 10 time constants in ns
        n = int(n_tc * fs * 2)
        trace = AnalogTrace(0.0, 1.0 / fs, np.full(n, 2.0))
        out = apply_filter(trace, FilterSpec("highpass", fc, 1))
        assert abs(out.values[int(n_tc * fs)]) < 1e-3
        # state init from the first sample: starts already settled
        assert abs(out.values[0]) < 0.1

    def test_linearity(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal(2048)
        y = rng.standard_normal(2048)
        spec = FilterSpec("lowpass", 3.0, 3)
        mk = lambda v: AnalogTrace(0.0, 0.02, v)
        a, b = 1.7, -0.4
        lhs = apply_filter(mk(a * x + b * y), spec).values
        rhs = a * apply_filter(mk(x), spec).values + b * apply_filter(mk(y), spec).values
        assert np.max(np.abs(lhs - rhs)) < 1e-10

    def test_cutoff_above_nyquist_rejected(self):
        trace = AnalogTrace(0.0, 0.02, np.zeros(100))
        with pytest.raises(ConfigError):
            apply_filter(trace, FilterSpec("lowpass", 25.0, 1))


class TestAmplify:
    def test_identity(self):
        trace = AnalogTrace(0.0, 0.1, np.array([1.0, -2.0, 3.0]))
        out = amplify(trace, AmplifierSpec(0.0, 0.0))
        assert np.array_equal(out.values, trace.values)

    def test_30_db_voltage_gain(self):
        trace = AnalogTrace(0.0, 0.1, np.array([0.01]))
        out = amplify(trace, AmplifierSpec(30.0, 0.0))
        assert out.values[0] == pytest.approx(0.31622776601683794, rel=1e-12)

    def test_noise_statistics(self):
        trace = AnalogTrace(0.0, 0.1, np.zeros(1_000_000))
        rng = np.random.default_rng(8)
        out = amplify(trace, AmplifierSpec(0.0, 1.0), rng)
        assert float(np.std(out.values)) == pytest.approx(1.0, rel=0.01)

    def test_noise_requires_rng(self):
        trace = AnalogTrace(0.0, 0.1, np.zeros(4))
        with pytest.raises(ConfigError):
            amplify(trace, AmplifierSpec(0.0, 1.0))


class TestDigitize:
    SPEC = DigitizerSpec(rate_gsps=50.0, bits=8, full_scale=(-1.0, 1.0))

    def test_endpoints(self):
        codes, lo, hi = quantize_values(np.array([-1.0, 1.0]), self.SPEC)
        assert codes[0] == 0
        assert codes[1] == 255  # top of scale clamps into the last code
        assert lo == 0 and hi == 1

    def test_midpoint(self):
        codes, _, _ = quantize_values(np.array([0.0]), self.SPEC)
        assert codes[0] == 128

    def test_full_scale_ramp_hits_every_code(self):
        ramp = AnalogTrace(0.0, 0.02, np.linspace(-1.0, 1.0, 4096))
        out = digitize(ramp, self.SPEC)
        assert set(np.unique(out.codes)) == set(range(256))

    def test_monotonicity(self):
        rng = np.random.default_rng(3)
        v = rng.uniform(-1.5, 1.5, 10_000)
        w = v + rng.uniform(0.0, 0.5, 10_000)
        cv, _, _ = quantize_values(v, self.SPEC)
        cw, _, _ = quantize_values(w, self.SPEC)
        assert np.all(cv <= cw)

    def test_resolution_bookkeeping(self):
        trace = AnalogTrace(0.0, 0.01, np.zeros(1000))
        out = digitize(trace, self.SPEC)
        assert out.dt == 0.02  # 50 GSa/s -> exactly 20 ps

    def test_resampling_interpolates(self):
        trace = AnalogTrace(0.0, 0.01, np.linspace(0.0, 1.0, 101))
        out = digitize(trace, DigitizerSpec(25.0, 8, (0.0, 1.0)))
        assert out.dt == pytest.approx(0.04)
        assert len(out) == 26

    def test_clipping_counted(self):
        trace = AnalogTrace(0.0, 0.02, np.array([-5.0, 0.0, 5.0, 5.0]))
        out = digitize(trace, self.SPEC)
        assert out.clipped_low == 1
        assert out.clipped_high == 2


class TestSamplePerPulse:
    def test_synthetic_per_cycle_constants(self):
        period, per = 10.0, 100
        values = np.repeat(np.arange(5, dtype=float), per)
        trace = AnalogTrace(0.0, period / per, values)
        starts = np.arange(5) * period
        batch = sample_per_pulse(trace, starts, SamplingPolicy(delay=4.0))
        assert np.array_equal(batch.values, [0.0, 1.0, 2.0, 3.0, 4.0])
        assert np.array_equal(batch.cycle_indices, np.arange(5))

    def test_warmup_excluded(self):
        period, per = 10.0, 100
        values = np.repeat(np.arange(5, dtype=float), per)
        trace = AnalogTrace(0.0, period / per, values)
        starts = np.arange(5) * period
        batch = sample_per_pulse(trace, starts, SamplingPolicy(delay=4.0),
                                 warmup_cycles=2)
        assert np.array_equal(batch.values, [2.0, 3.0, 4.0])
        assert np.array_equal(batch.cycle_indices, [2, 3, 4])

    def test_delay_outside_trace_rejected(self):
        trace = AnalogTrace(0.0, 0.1, np.zeros(100))
        with pytest.raises(ConfigError):
            sample_per_pulse(trace, np.array([0.0, 9.0]), SamplingPolicy(delay=5.0))

    def test_linear_interpolation(self):
        trace = AnalogTrace(0.0, 1.0, np.array([0.0, 10.0, 20.0, 30.0]))
        batch = sample_per_pulse(trace, np.array([0.0]),
                                 SamplingPolicy(delay=1.5, interpolation="linear"))
        assert batch.values[0] == pytest.approx(15.0)


class TestInstantaneousBeatFrequency:
    def test_pure_tone(self):
        fs, f0 = 50.0, 5.0
        t = np.arange(2000) / fs
        trace = AnalogTrace(0.0, 1.0 / fs, np.cos(2 * np.pi * f0 * t))
        t_mid, f = instantaneous_beat_frequency(trace)
        assert f.size > 100
        assert np.max(np.abs(f - f0) / f0) < 0.01

    def test_dc_trace_empty(self):
        trace = AnalogTrace(0.0, 0.02, np.zeros(1000))
        t_mid, f = instantaneous_beat_frequency(trace)
        assert t_mid.size == 0 and f.size == 0

    def test_linear_chirp_slope(self):
        # phase = omega*t + beta0*t^2/2 -> f(t) = (omega + beta0*t)/(2*pi)
        fs = 50.0
        omega, beta0 = 2 * np.pi * 4.0, 2 * np.pi * 1.0
        t = np.arange(int(10 * fs)) / fs
        trace = AnalogTrace(0.0, 1.0 / fs, np.cos(omega * t + 0.5 * beta0 * t**2))
        t_mid, f = instantaneous_beat_frequency(trace)
        slope = np.polyfit(t_mid, f, 1)[0]
        assert slope == pytest.approx(beta0 / (2 * np.pi), rel=0.05)


class TestDetectionChain:
    def _fields(self, n_cycles, per_cycle, seed=0):
        rng = np.random.default_rng(seed)
        n = n_cycles * per_cycle
        t = np.arange(n) * 0.01
        e1 = np.sqrt(8.0) * np.exp(1j * 0.001 * rng.standard_normal(n).cumsum())
        e2 = np.sqrt(8.0) * np.exp(1j * (2 * np.pi * 2.0 * t))
        return e1, e2

    def test_block_size_invariance(self):
        spec = ChainSpec()
        e1, e2 = self._fields(6, 1200)
        chains = [DetectionChain(spec, 0.01, 12.0, master_seed=9) for _ in range(2)]
        whole = chains[0].process(e1, e2, 0).observable
        parts = []
        c = 0
        for nb in (1, 2, 3):
            blk = chains[1].process(
                e1[c * 1200 : (c + nb) * 1200], e2[c * 1200 : (c + nb) * 1200], c
            )
            parts.append(blk.observable)
            c += nb
        assert np.array_equal(whole, np.concatenate(parts))

    def test_contrast_bounded(self):
        spec = ChainSpec(observable="contrast",
                         amplifier=AmplifierSpec(30.0, 0.0))
        e1, e2 = self._fields(4, 1200)
        chain = DetectionChain(spec, 0.01, 12.0, master_seed=9)
        out = chain.process(e1, e2, 0)
        assert out.observable.shape[0] == 4 * chain.dig_per_cycle
        assert np.max(np.abs(out.observable[2 * chain.dig_per_cycle :])) < 1.2

    def test_misaligned_period_rejected(self):
        with pytest.raises(ConfigError):
            DetectionChain(ChainSpec(), 0.01, 12.0037, master_seed=1)
