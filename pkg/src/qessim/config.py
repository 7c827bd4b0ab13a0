"""Experiment configuration: schema, defaults, JSON round-trip.

One JSON document configures an experiment end to end: the physical model
(all device symbols by name: alpha, gamma, tau, r_sp, kappa, psi, tau_d,
omega, beta0, p_bar, delta_tau, m, t_mod), the detection chain, sampling
and analysis settings, run sizing, and the extractor.  Parsing an emitted
config reproduces it field by field.
"""

from __future__ import annotations

import dataclasses
import json
import math
import types
import typing
from dataclasses import dataclass, field

from .detection import AmplifierSpec, ChainSpec, DigitizerSpec, FilterSpec
from .errors import ConfigError
from .params import (
    KAPPA_HIGH_LOSS,
    KAPPA_LOW_LOSS,
    TWO_PI,
    CouplingSpec,
    DetuningSpec,
    LaserParams,
    PumpSpec,
    SimConfig,
    SimGrid,
)

EXPERIMENTS = (
    "locking-map",
    "beat-traces",
    "histogram-stability",
    "autocorr",
    "generate",
)

RECORD_INTERVAL_NS = 0.01  # trace grid fed to the detection chain


@dataclass(frozen=True)
class SamplingConfig:
    """Per-pulse sampling instants (ns within the modulation cycle)."""

    delay: float = 7.0  # inside the pulse, past its peak
    off_delay: float = 0.5  # below threshold, noise reference
    interpolation: str = "nearest"
    fit_start: float = 6.0  # phase-fit window within the cycle
    fit_stop: float = 8.0

    def validate(self, period: float | None = None) -> None:
        if self.interpolation not in ("nearest", "linear"):
            raise ConfigError(f"unknown interpolation: {self.interpolation!r}")
        if period is not None:
            for name, v in (("delay", self.delay), ("off_delay", self.off_delay)):
                if not 0 <= v < period:
                    raise ConfigError(f"{name}={v} outside the cycle [0, {period})")
        if not self.fit_start < self.fit_stop:
            raise ConfigError("fit window must have fit_start < fit_stop")


@dataclass(frozen=True)
class AnalysisConfig:
    max_lag: int = 500
    histogram_bins: int = 64
    circ_var_threshold: float = 0.05
    peak_ratio_threshold: float = 10.0
    arcsine_lo_percentile: float = 0.5
    arcsine_hi_percentile: float = 99.5

    def validate(self) -> None:
        if self.max_lag < 1:
            raise ConfigError("max_lag must be >= 1")
        if self.histogram_bins < 2:
            raise ConfigError("histogram_bins must be >= 2")


@dataclass(frozen=True)
class RunConfig:
    """Sizing of statistics runs."""

    pulses: int = 10_000  # analyzed pulses, split across trajectories
    warmup_cycles: int = 5  # discarded at the start of every trajectory
    n_trajectories: int = 16
    block_cycles: int = 128
    calibration_cycles: int = 512  # trajectory 0, used for scale / entropy
    workers: int | None = None  # None: one per CPU

    def validate(self) -> None:
        if self.pulses < 1:
            raise ConfigError("pulses must be >= 1")
        if self.warmup_cycles < 0:
            raise ConfigError("warmup_cycles must be >= 0")
        if self.n_trajectories < 1:
            raise ConfigError("n_trajectories must be >= 1")
        if self.block_cycles < 1:
            raise ConfigError("block_cycles must be >= 1")
        if self.calibration_cycles < 100:
            raise ConfigError("calibration_cycles must be >= 100")


@dataclass(frozen=True)
class ExtractorSettings:
    block_bits: int = 4096
    epsilon_log2: float = -64.0  # security parameter 2^epsilon_log2
    h_floor_bits_per_sample: float = 0.5  # abort below this measured H_inf

    def validate(self) -> None:
        if self.block_bits < 8:
            raise ConfigError("block_bits must be >= 8")
        if self.epsilon_log2 >= 0:
            raise ConfigError("epsilon_log2 must be negative")

    def epsilon(self) -> float:
        return 2.0**self.epsilon_log2


@dataclass(frozen=True)
class LockingMapConfig:
    omega_span: float = 40.0  # grid covers [-span, +span] rad/ns
    n_points: int = 21
    settle_ns: float = 50.0
    measure_ns: float = 100.0

    def validate(self) -> None:
        if self.n_points < 3:
            raise ConfigError("n_points must be >= 3")
        if self.omega_span <= 0 or self.settle_ns <= 0 or self.measure_ns <= 0:
            raise ConfigError("spans and durations must be positive")


@dataclass(frozen=True)
class BeatTracesConfig:
    """Chirped-trace study settings.

    The chirp rate is enlarged from the published table value so the
    frequency sweep is visible within a single 5 ns pulse; detunings are
    negative so the upward chirp pulls the beat through zero inside the
    pulse plateau, at t = |omega|/beta0 from the cycle start.  The
    frequency-track fit stays within +-fit_half_ns of the pulse center,
    where the inversions sit at their clamped values and the intrinsic
    amplitude-phase chirp of the rate equations is negligible.
    """

    # zero-detuning instants at 4.5, 6.0 and 7.5 ns into the cycle
    omegas: list[float] = field(
        default_factory=lambda: [-TWO_PI * 4.5, -TWO_PI * 6.0, -TWO_PI * 7.5]
    )
    beta0: float = TWO_PI * 1.0
    fit_half_ns: float = 2.5

    def validate(self) -> None:
        if len(self.omegas) < 1:
            raise ConfigError("need at least one detuning")
        if self.beta0 <= 0:
            raise ConfigError("beat-traces requires beta0 > 0")
        if self.fit_half_ns <= 0:
            raise ConfigError("fit_half_ns must be positive")


@dataclass(frozen=True)
class HistStabilityConfig:
    n_batches: int = 6
    batch_size: int = 20_000

    def validate(self) -> None:
        if self.n_batches < 2:
            raise ConfigError("need at least 2 batches")
        if self.batch_size < 200:
            raise ConfigError("batch_size must be >= 200")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    out_dir: str
    sim: SimConfig
    chain: ChainSpec
    sampling: SamplingConfig
    analysis: AnalysisConfig
    run: RunConfig
    extractor: ExtractorSettings
    locking: LockingMapConfig
    beats: BeatTracesConfig
    hist: HistStabilityConfig

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; pick one of {EXPERIMENTS}"
            )
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 bits")
        self.sim.validate()
        self.chain.validate()
        period = self.sim.period()
        self.sampling.validate(period)
        self.analysis.validate()
        self.run.validate()
        self.extractor.validate()
        self.locking.validate()
        self.beats.validate()
        self.hist.validate()


# --------------------------------------------------------------------------
# dict / JSON round-trip
# --------------------------------------------------------------------------


def _to_jsonable(obj):
    if dataclasses.is_dataclass(obj):
        return {
            f.name: _to_jsonable(getattr(obj, f.name))
            for f in dataclasses.fields(obj)
        }
    if isinstance(obj, tuple):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, list):
        return [_to_jsonable(v) for v in obj]
    return obj


def _from_value(ftype, value, where: str):
    origin = typing.get_origin(ftype)
    if isinstance(ftype, (types.UnionType,)) or origin is typing.Union:
        args = [a for a in typing.get_args(ftype) if a is not type(None)]
        if value is None:
            return None
        return _from_value(args[0], value, where)
    if dataclasses.is_dataclass(ftype):
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected an object")
        return _dataclass_from_dict(ftype, value, where)
    if origin is tuple:
        args = typing.get_args(ftype)
        if len(value) != len(args):
            raise ConfigError(f"{where}: expected {len(args)} entries")
        return tuple(
            _from_value(a, v, f"{where}[{i}]") for i, (a, v) in enumerate(zip(args, value))
        )
    if origin is list:
        (elem,) = typing.get_args(ftype)
        return [_from_value(elem, v, f"{where}[{i}]") for i, v in enumerate(value)]
    if ftype is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if ftype is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if ftype is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if ftype is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected a boolean, got {value!r}")
        return value
    raise ConfigError(f"{where}: unsupported config field type {ftype}")


def _dataclass_from_dict(cls, data: dict, where: str):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in data:
            kwargs[f.name] = _from_value(hints[f.name], data[f.name], f"{where}.{f.name}")
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def to_dict(cfg: ExperimentConfig) -> dict:
    return _to_jsonable(cfg)


def from_dict(data: dict) -> ExperimentConfig:
    cfg = _dataclass_from_dict(ExperimentConfig, data, "config")
    cfg.validate()
    return cfg


def load(path) -> ExperimentConfig:
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return from_dict(data)


def save(cfg: ExperimentConfig, path) -> None:
    with open(path, "w") as f:
        json.dump(to_dict(cfg), f, indent=2, sort_keys=True)
        f.write("\n")


# --------------------------------------------------------------------------
# defaults
# --------------------------------------------------------------------------


def _record_stride(dt: float) -> int:
    return max(1, round(RECORD_INTERVAL_NS / dt))


def default_config(experiment: str, seed: int = 0, out_dir: str = "out") -> ExperimentConfig:
    """Stock configuration of one experiment.

    The base physical parameter set is the published device table: alpha=2,
    gamma=150/ns, tau=1 ns, r_sp=0.2/ns, p_bar=8, delta_tau=5 ns, m=5,
    tau_d=0.02 ns, beta0=2*pi*1e-3 rad/ns^2; high-loss coupling
    kappa=0.005/ns unless the experiment needs the locking-prone chip.
    The modulation period is 12 ns: the super-Gaussian pulse stays above
    threshold for ~10.1 ns, leaving ~1.9 ns of below-threshold dwell, which
    at gamma=150/ns collapses the field by hundreds of e-folds per cycle.
    """
    if experiment not in EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment {experiment!r}; pick one of {EXPERIMENTS}"
        )
    laser = LaserParams(alpha=2.0, gamma=150.0, tau=1.0, r_sp=0.2)
    dt = 1e-4
    sim = SimConfig(
        laser1=laser,
        laser2=laser,
        coupling=CouplingSpec(kappa=KAPPA_HIGH_LOSS, psi=0.0, tau_d=0.02,
                              mode="instantaneous"),
        detuning=DetuningSpec(omega=-TWO_PI * 2.0, beta0=TWO_PI * 1e-3,
                              chirp_reset="per-cycle"),
        pump1=PumpSpec(mode="cw", p_bar=8.0),
        pump2=PumpSpec(mode="gain-switched", p_bar=8.0, delta_tau=5.0, m=5,
                       t_mod=12.0),
        grid=SimGrid(dt=dt, n_cycles=1, record_stride=_record_stride(dt), seed=seed),
    )
    chain = ChainSpec()
    sampling = SamplingConfig()
    run = RunConfig()

    if experiment == "locking-map":
        period = 150.0  # 50 ns settling + 100 ns measurement per sweep point
        sim = dataclasses.replace(
            sim,
            coupling=CouplingSpec(kappa=KAPPA_LOW_LOSS, psi=0.0, tau_d=0.02,
                                  mode="delayed"),
            detuning=DetuningSpec(omega=0.0, beta0=0.0),
            pump2=PumpSpec(mode="cw", p_bar=8.0, t_mod=period),
        )
    elif experiment == "beat-traces":
        beats = BeatTracesConfig()
        sim = dataclasses.replace(
            sim,
            detuning=DetuningSpec(omega=beats.omegas[0], beta0=beats.beta0),
        )
        chain = dataclasses.replace(chain, observable="contrast")
    elif experiment == "histogram-stability":
        dt = 4e-4  # throughput profile; convergence covered by the dt gate
        sim = dataclasses.replace(
            sim, grid=SimGrid(dt=dt, n_cycles=1, record_stride=_record_stride(dt),
                              seed=seed)
        )
        chain = dataclasses.replace(chain, observable="contrast")
    elif experiment == "autocorr":
        dt = 4e-4
        sim = dataclasses.replace(
            sim, grid=SimGrid(dt=dt, n_cycles=1, record_stride=_record_stride(dt),
                              seed=seed)
        )
        run = dataclasses.replace(run, pulses=1_000_000, n_trajectories=64)
    elif experiment == "generate":
        dt = 4e-4
        sim = dataclasses.replace(
            sim, grid=SimGrid(dt=dt, n_cycles=1, record_stride=_record_stride(dt),
                              seed=seed)
        )
        chain = dataclasses.replace(chain, observable="contrast")
        run = dataclasses.replace(run, pulses=20_000)

    return ExperimentConfig(
        experiment=experiment,
        seed=seed,
        out_dir=out_dir,
        sim=sim,
        chain=chain,
        sampling=sampling,
        analysis=AnalysisConfig(),
        run=run,
        extractor=ExtractorSettings(),
        locking=LockingMapConfig(),
        beats=BeatTracesConfig(),
        hist=HistStabilityConfig(),
    )


def with_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    sim = dataclasses.replace(cfg.sim, grid=dataclasses.replace(cfg.sim.grid, seed=seed))
    return dataclasses.replace(cfg, seed=seed, sim=sim)


def with_dt(cfg: ExperimentConfig, dt: float) -> ExperimentConfig:
    if dt <= 0 or not math.isfinite(dt):
        raise ConfigError(f"dt must be positive, got {dt}")
    grid = dataclasses.replace(cfg.sim.grid, dt=dt, record_stride=_record_stride(dt))
    return dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, grid=grid))


def with_pulses(cfg: ExperimentConfig, pulses: int) -> ExperimentConfig:
    run = dataclasses.replace(cfg.run, pulses=pulses)
    return dataclasses.replace(cfg, run=run)
