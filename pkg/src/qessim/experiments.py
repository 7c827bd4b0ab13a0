"""Experiment drivers.

Each run_* function reproduces one of the device studies in silico:
the locking map of the low-loss chip, chirped beat traces with their
nearly-zero-detuning times, histogram stability, the autocorrelation
study with noise subtraction, and the end-to-end bit generation pipeline.

All drivers are deterministic in (config, seed): noise streams are keyed
per (trajectory, cycle), work is split by trajectory across a process
pool, and outputs are merged by index before anything is written.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats as _stats

from . import config as _config
from . import streams
from .analysis import (
    PhaseBatch,
    StatsReport,
    arcsine_ks,
    autocorrelation,
    circular_stats,
    dagostino_pearson,
    lock_classify,
    min_entropy,
    noise_subtracted_autocorrelation,
)
from .config import ExperimentConfig
from .detection import (
    CONTRAST,
    AnalogTrace,
    DetectionChain,
    DigitizerSpec,
    instantaneous_beat_frequency,
    quantize_values,
)
from .errors import ConfigError, LowEntropyError
from .extraction import (
    ExtractorConfig,
    bits_from_codes,
    extract_blocks,
    output_length,
    pack_bits,
)
from .params import PUMP_GAIN_SWITCHED, SimConfig
from .simcore import iter_blocks, simulate

log = logging.getLogger("qessim")

CALIBRATION_TRAJECTORY = 0  # statistics trajectories start at index 1


# --------------------------------------------------------------------------
# shared pulse pipeline
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PulseData:
    """Merged per-pulse results of a statistics run."""

    values_in: np.ndarray  # sampled observable inside the pulse
    values_off: np.ndarray  # sampled observable below threshold
    phases: np.ndarray | None  # per-pulse beat phase (rad)
    full_scale: tuple[float, float] | None


def _sim_for(cfg: ExperimentConfig, n_cycles: int) -> SimConfig:
    grid = dataclasses.replace(cfg.sim.grid, n_cycles=n_cycles, seed=cfg.seed)
    return dataclasses.replace(cfg.sim, grid=grid)


def _fit_design(cfg: ExperimentConfig, dig_dt: float):
    """Pseudo-inverse of the cosine/sine/offset design on the fit window."""
    w = np.arange(
        int(round(cfg.sampling.fit_start / dig_dt)),
        int(round(cfg.sampling.fit_stop / dig_dt)),
    )
    t_ref = w * dig_dt
    det = cfg.sim.detuning
    if det.chirp_reset != "per-cycle":
        raise ConfigError("per-pulse phase extraction requires per-cycle chirp reset")
    theta = det.omega * t_ref + 0.5 * det.beta0 * t_ref**2
    if theta.max() - theta.min() < 4.0 * np.pi:
        raise ConfigError("phase-fit window spans fewer than two beat periods")
    design = np.stack([np.cos(theta), np.sin(theta), np.ones_like(theta)], axis=1)
    return w, np.linalg.pinv(design)


def _pick(obs2d: np.ndarray, delay: float, dig_dt: float, interpolation: str):
    pos = delay / dig_dt
    if interpolation == "nearest":
        return obs2d[:, int(round(pos))].copy()
    k = min(int(math.floor(pos)), obs2d.shape[1] - 2)
    frac = pos - k
    return (1.0 - frac) * obs2d[:, k] + frac * obs2d[:, k + 1]


def _pulse_worker(args) -> dict:
    """Simulate one trajectory and reduce it to per-pulse samples."""
    cfg, traj, n_analysis, need_phases, need_scale = args
    warm = cfg.run.warmup_cycles
    sim = _sim_for(cfg, warm + n_analysis)
    chain = DetectionChain(
        cfg.chain,
        trace_dt=sim.grid.dt * sim.grid.record_stride,
        period=sim.steps_per_cycle() * sim.grid.dt,
        master_seed=cfg.seed,
        trajectory=traj,
    )
    dpc = chain.dig_per_cycle
    fit = _fit_design(cfg, chain.dig_dt) if need_phases else None

    vals_in, vals_off, phases = [], [], []
    scale_lo, scale_hi = [], []
    first_cycle = 0
    for block in iter_blocks(sim, trajectory_index=traj, block_cycles=cfg.run.block_cycles):
        out = chain.process(block.e1, block.e2, first_cycle)
        obs2d = out.observable.reshape(out.n_cycles, dpc)
        keep = slice(max(0, warm - first_cycle), out.n_cycles)
        kept = obs2d[keep]
        if kept.shape[0]:
            vals_in.append(_pick(kept, cfg.sampling.delay, chain.dig_dt,
                                 cfg.sampling.interpolation))
            vals_off.append(_pick(kept, cfg.sampling.off_delay, chain.dig_dt,
                                  cfg.sampling.interpolation))
            if fit is not None:
                w, pinv = fit
                coef = pinv @ kept[:, w].T
                phases.append(np.arctan2(-coef[1], coef[0]))
            if need_scale:
                scale_lo.append(np.percentile(kept, 0.1))
                scale_hi.append(np.percentile(kept, 99.9))
        first_cycle += out.n_cycles

    result = {
        "traj": traj,
        "values_in": np.concatenate(vals_in),
        "values_off": np.concatenate(vals_off),
    }
    if fit is not None:
        result["phases"] = np.concatenate(phases)
    if need_scale:
        result["scale"] = (float(np.min(scale_lo)), float(np.max(scale_hi)))
    return result


def _pool_map(fn, tasks, workers: int | None):
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    out = [None] * len(tasks)
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futures = {ex.submit(fn, t): i for i, t in enumerate(tasks)}
        for fut, i in futures.items():
            out[i] = fut.result()
    return out


def calibrate_scale(cfg: ExperimentConfig) -> tuple[tuple[float, float], np.ndarray]:
    """Dedicated calibration trajectory: digitizer full scale + samples.

    Runs trajectory 0 (never part of the statistics), returns the 0.1/99.9
    percentile span of its observable trace and its in-pulse samples.
    """
    res = _pulse_worker(
        (cfg, CALIBRATION_TRAJECTORY, cfg.run.calibration_cycles, False, True)
    )
    lo, hi = res["scale"]
    if not hi > lo:
        raise ConfigError("degenerate calibration trace; cannot set full scale")
    return (lo, hi), res["values_in"]


def collect_pulses(
    cfg: ExperimentConfig,
    pulses: int,
    need_phases: bool = False,
    trajectory_offset: int = 1,
    full_scale: tuple[float, float] | None = None,
) -> PulseData:
    """Run the end-to-end pipeline for `pulses` analyzed cycles.

    Work is split over run.n_trajectories independent trajectories starting
    at trajectory_offset; each discards run.warmup_cycles first.  Results
    are merged in trajectory order and trimmed to exactly `pulses`.
    """
    n_traj = cfg.run.n_trajectories
    per_traj = -(-pulses // n_traj)
    tasks = [
        (cfg, trajectory_offset + j, per_traj, need_phases, False)
        for j in range(n_traj)
    ]
    log.info(
        "pipeline: %d pulses over %d trajectories (%d cycles each, warm-up %d)",
        pulses, n_traj, per_traj, cfg.run.warmup_cycles,
    )
    results = _pool_map(_pulse_worker, tasks, cfg.run.workers)
    results.sort(key=lambda r: r["traj"])
    vin = np.concatenate([r["values_in"] for r in results])[:pulses]
    voff = np.concatenate([r["values_off"] for r in results])[:pulses]
    ph = None
    if need_phases:
        ph = np.concatenate([r["phases"] for r in results])[:pulses]
    return PulseData(vin, voff, ph, full_scale)


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return "nan"
    return f"{float(v):.10g}"


def write_csv(path, columns, rows, meta: dict | None = None) -> None:
    """Self-describing CSV: '#' metadata lines, then named+unit columns."""
    with open(path, "w") as f:
        for k, v in (meta or {}).items():
            f.write(f"# {k}={v}\n")
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _write_gnuplot(out_dir, name, csv_file, title, xlabel, ylabel, using="1:2",
                   style="lines") -> str:
    path = os.path.join(out_dir, f"{name}.gnuplot")
    with open(path, "w") as f:
        f.write(f'set datafile separator ","\n')
        f.write(f'set title "{title}"\nset xlabel "{xlabel}"\nset ylabel "{ylabel}"\n')
        f.write(f'plot "{csv_file}" every ::1 using {using} with {style} notitle\n')
    return path


def _write_run_metadata(out_dir, cfg: ExperimentConfig, extra: dict) -> str:
    path = os.path.join(out_dir, "run_metadata.json")
    payload = {"config": _config.to_dict(cfg)}
    payload.update(extra)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _ensure_out(cfg: ExperimentConfig) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return cfg.out_dir


# --------------------------------------------------------------------------
# locking map
# --------------------------------------------------------------------------


def _locking_worker(args) -> dict:
    cfg, index, omega = args
    sim = _sim_for(cfg, 1)
    sim = dataclasses.replace(
        sim, detuning=dataclasses.replace(sim.detuning, omega=omega, beta0=0.0)
    )
    traj = simulate(sim, trajectory_index=index)
    t = traj.times()
    sel = t >= cfg.locking.settle_ns
    dphi = np.angle(traj.e1[sel] * np.conj(traj.e2[sel]))
    phase_cls = lock_classify(
        phases=dphi,
        circ_var_threshold=cfg.analysis.circ_var_threshold,
    )
    i_plus = 0.5 * np.abs(traj.e1[sel] + 1j * traj.e2[sel]) ** 2
    spec_cls = lock_classify(
        beat_trace=AnalogTrace(0.0, traj.dt, i_plus),
        peak_ratio_threshold=cfg.analysis.peak_ratio_threshold,
    )
    return {
        "index": index,
        "omega": omega,
        "locked": bool(phase_cls.locked),
        "circ_variance": phase_cls.metric,
        "peak_ratio": spec_cls.metric,
        "beat_freq_ghz": spec_cls.beat_freq_ghz if not phase_cls.locked else 0.0,
    }


def locked_window(omegas: np.ndarray, locked: np.ndarray) -> tuple[float, float]:
    """Contiguous locked window containing (the grid point nearest) zero.

    Edges are midpoints between the last locked and first unlocked grid
    points; a window touching the grid boundary extends half a spacing
    beyond it.  Returns (lo, hi); (0, 0) when the center is not locked.
    """
    k0 = int(np.argmin(np.abs(omegas)))
    if not locked[k0]:
        return 0.0, 0.0
    spacing = float(omegas[1] - omegas[0]) if len(omegas) > 1 else 0.0
    lo_i = k0
    while lo_i > 0 and locked[lo_i - 1]:
        lo_i -= 1
    hi_i = k0
    while hi_i < len(omegas) - 1 and locked[hi_i + 1]:
        hi_i += 1
    lo = omegas[lo_i] - 0.5 * spacing
    hi = omegas[hi_i] + 0.5 * spacing
    return float(lo), float(hi)


@dataclass(frozen=True)
class LockingMapResult:
    omegas: np.ndarray
    locked: np.ndarray
    circ_variance: np.ndarray
    beat_freq_ghz: np.ndarray
    window_lo: float
    window_hi: float
    csv_path: str

    def window_width(self) -> float:
        return self.window_hi - self.window_lo


def run_locking_map(cfg: ExperimentConfig) -> LockingMapResult:
    """Sweep the detuning, classify each point, measure the locked window."""
    cfg.validate()
    out_dir = _ensure_out(cfg)
    lk = cfg.locking
    period = cfg.sim.period()
    if period < lk.settle_ns + lk.measure_ns - 1e-9:
        raise ConfigError(
            "modulation period (pump t_mod) must cover settle_ns + measure_ns"
        )
    omegas = np.linspace(-lk.omega_span, lk.omega_span, lk.n_points)
    tasks = [(cfg, i, float(om)) for i, om in enumerate(omegas)]
    rows = _pool_map(_locking_worker, tasks, cfg.run.workers)
    rows.sort(key=lambda r: r["index"])

    locked = np.array([r["locked"] for r in rows], dtype=bool)
    lo, hi = locked_window(omegas, locked)
    csv_path = os.path.join(out_dir, "locking_map.csv")
    write_csv(
        csv_path,
        ["omega_rad_per_ns", "locked_flag", "circ_variance",
         "beat_freq_ghz", "peak_ratio"],
        [
            (r["omega"], r["locked"], r["circ_variance"],
             r["beat_freq_ghz"] or 0.0, r["peak_ratio"])
            for r in rows
        ],
        meta={"experiment": "locking-map", "seed": cfg.seed,
              "kappa_per_ns": cfg.sim.coupling.kappa,
              "window_lo_rad_per_ns": _fmt(lo), "window_hi_rad_per_ns": _fmt(hi)},
    )
    _write_gnuplot(out_dir, "locking_map", "locking_map.csv",
                   "beat frequency vs detuning", "omega (rad/ns)",
                   "beat frequency (GHz)", using="1:4", style="points")
    _write_run_metadata(out_dir, cfg, {
        "window_lo": lo, "window_hi": hi, "width": hi - lo,
        "n_locked": int(np.count_nonzero(locked)),
    })
    return LockingMapResult(
        omegas, locked,
        np.array([r["circ_variance"] for r in rows]),
        np.array([r["beat_freq_ghz"] or 0.0 for r in rows]),
        lo, hi, csv_path,
    )


# --------------------------------------------------------------------------
# beat traces
# --------------------------------------------------------------------------


def pulse_span(cfg: ExperimentConfig) -> tuple[float, float]:
    """Within-cycle interval where the gain-switched pump is above threshold."""
    pump = cfg.sim.pump2
    if pump.mode != PUMP_GAIN_SWITCHED:
        raise ConfigError("pulse span requires a gain-switched pump2")
    half = pump.delta_tau * math.log(3.0) ** (1.0 / (2 * pump.m))
    mid = 0.5 * cfg.sim.period()
    return mid - half, mid + half


def nzd_time(t: np.ndarray, f_ghz: np.ndarray) -> float:
    """Vertex of a parabola fitted to f^2(t): the zero-detuning instant."""
    if t.shape[0] < 5:
        raise ConfigError("too few frequency estimates for an NZD fit")
    coef = np.polyfit(t, f_ghz**2, 2)
    if coef[0] <= 0:
        raise ConfigError("frequency track is not V-shaped; no NZD inside window")
    return float(-coef[1] / (2.0 * coef[0]))


@dataclass(frozen=True)
class BeatTraceResult:
    omega: float
    t_star: float  # measured NZD time (ns within cycle)
    t_star_predicted: float  # |omega| / beta0
    trace_csv: str
    freq_csv: str


def run_beat_traces(cfg: ExperimentConfig) -> list[BeatTraceResult]:
    """Chirped beat traces for several detunings, with NZD times."""
    cfg.validate()
    if cfg.sim.pump2.mode != PUMP_GAIN_SWITCHED:
        raise ConfigError("beat-traces requires a gain-switched pump2")
    out_dir = _ensure_out(cfg)
    beta0 = cfg.beats.beta0
    warm = cfg.run.warmup_cycles
    results = []
    for i, omega in enumerate(cfg.beats.omegas):
        sim = _sim_for(cfg, warm + 1)
        sim = dataclasses.replace(
            sim,
            detuning=dataclasses.replace(sim.detuning, omega=omega, beta0=beta0),
        )
        traj = simulate(sim, trajectory_index=i)
        chain = DetectionChain(
            cfg.chain,
            trace_dt=traj.dt,
            period=traj.period,
            master_seed=cfg.seed,
            trajectory=i,
        )
        out = chain.process(traj.e1, traj.e2, 0)
        dpc = chain.dig_per_cycle
        cycle = out.observable[warm * dpc : (warm + 1) * dpc]
        trace = AnalogTrace(0.0, chain.dig_dt, cycle)

        # fit only the pulse plateau, away from the buildup/decay chirp
        center = 0.5 * cfg.sim.period()
        lo_t = center - cfg.beats.fit_half_ns
        hi_t = center + cfg.beats.fit_half_ns
        sel = slice(int(lo_t / chain.dig_dt), int(hi_t / chain.dig_dt))
        t_mid, f = instantaneous_beat_frequency(
            AnalogTrace(sel.start * chain.dig_dt, chain.dig_dt, cycle[sel])
        )
        t_star = nzd_time(t_mid, f)
        predicted = abs(omega) / beta0

        trace_csv = os.path.join(out_dir, f"beat_trace_{i}.csv")
        write_csv(
            trace_csv, ["t_ns", "contrast"],
            zip(trace.times(), trace.values),
            meta={"omega_rad_per_ns": _fmt(omega), "beta0_rad_per_ns2": _fmt(beta0)},
        )
        freq_csv = os.path.join(out_dir, f"beat_freq_{i}.csv")
        write_csv(
            freq_csv, ["t_ns", "freq_ghz"],
            zip(t_mid, f),
            meta={"omega_rad_per_ns": _fmt(omega),
                  "nzd_ns": _fmt(t_star), "nzd_predicted_ns": _fmt(predicted)},
        )
        _write_gnuplot(out_dir, f"beat_freq_{i}", f"beat_freq_{i}.csv",
                       f"instantaneous beat frequency, omega={omega:.3g}",
                       "t (ns)", "f (GHz)", style="points")
        results.append(BeatTraceResult(omega, t_star, predicted, trace_csv, freq_csv))

    write_csv(
        os.path.join(out_dir, "nzd_summary.csv"),
        ["omega_rad_per_ns", "nzd_ns", "nzd_predicted_ns"],
        [(r.omega, r.t_star, r.t_star_predicted) for r in results],
        meta={"experiment": "beat-traces", "seed": cfg.seed},
    )
    _write_run_metadata(out_dir, cfg, {
        "nzd_ns": [r.t_star for r in results],
        "nzd_predicted_ns": [r.t_star_predicted for r in results],
    })
    return results


# --------------------------------------------------------------------------
# histogram stability
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class HistogramStabilityResult:
    edges: np.ndarray
    counts: list[np.ndarray]
    arcsine_distances: list[float]
    ks_p_matrix: np.ndarray
    csv_paths: list[str]


def run_histogram_stability(cfg: ExperimentConfig) -> HistogramStabilityResult:
    """Several independent batches: histograms plus pairwise two-sample KS."""
    cfg.validate()
    out_dir = _ensure_out(cfg)
    n_batches = cfg.hist.n_batches
    size = cfg.hist.batch_size
    batches = []
    for b in range(n_batches):
        offset = 1 + b * cfg.run.n_trajectories
        data = collect_pulses(cfg, size, trajectory_offset=offset)
        batches.append(data.values_in)

    all_vals = np.concatenate(batches)
    edges = np.histogram_bin_edges(all_vals, bins=cfg.analysis.histogram_bins)
    counts, distances, paths = [], [], []
    for b, vals in enumerate(batches):
        c, _ = np.histogram(vals, bins=edges)
        counts.append(c)
        distances.append(arcsine_ks(
            vals, cfg.analysis.arcsine_lo_percentile,
            cfg.analysis.arcsine_hi_percentile).distance)
        path = os.path.join(out_dir, f"hist_batch_{b}.csv")
        write_csv(path, ["bin_left", "bin_right", "count"],
                  zip(edges[:-1], edges[1:], c),
                  meta={"batch": b, "n_samples": len(vals),
                        "arcsine_ks": _fmt(distances[-1])})
        paths.append(path)

    pmat = np.ones((n_batches, n_batches))
    for a in range(n_batches):
        for b in range(a + 1, n_batches):
            p = float(_stats.ks_2samp(batches[a], batches[b]).pvalue)
            pmat[a, b] = pmat[b, a] = p
    write_csv(
        os.path.join(out_dir, "ks_matrix.csv"),
        ["batch_a", "batch_b", "ks_p_value"],
        [(a, b, pmat[a, b]) for a in range(n_batches) for b in range(n_batches)],
        meta={"experiment": "histogram-stability", "seed": cfg.seed},
    )
    _write_gnuplot(out_dir, "hist_batch_0", "hist_batch_0.csv",
                   "sampled amplitude histogram", "normalized amplitude",
                   "count", using="1:3", style="boxes")
    _write_run_metadata(out_dir, cfg, {
        "arcsine_ks": distances,
        "min_pairwise_p": float(np.min(pmat + np.eye(n_batches))),
    })
    return HistogramStabilityResult(edges, counts, distances, pmat, paths)


# --------------------------------------------------------------------------
# autocorrelation study
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AutocorrOutput:
    report: StatsReport
    data: PulseData
    report_path: str
    csv_path: str


def run_autocorr(cfg: ExperimentConfig) -> AutocorrOutput:
    """Noise-subtracted autocorrelation of the per-pulse samples."""
    cfg.validate()
    out_dir = _ensure_out(cfg)
    data = collect_pulses(cfg, cfg.run.pulses, need_phases=True)
    max_lag = cfg.analysis.max_lag
    res = noise_subtracted_autocorrelation(data.values_in, data.values_off, max_lag)
    raw = autocorrelation(data.values_in, max_lag)
    dp = dagostino_pearson(res.rho[2:])
    counts, edges = np.histogram(data.values_in, bins=cfg.analysis.histogram_bins)
    ks = arcsine_ks(data.values_in, cfg.analysis.arcsine_lo_percentile,
                    cfg.analysis.arcsine_hi_percentile)
    cv = circular_stats(PhaseBatch(data.phases)).variance

    report = StatsReport(
        n_samples=len(data.values_in),
        histogram_edges=edges,
        histogram_counts=counts,
        gamma=res.gamma,
        rho=res.rho,
        rho_raw=raw.rho,
        noise_floor=res.noise_floor,
        dp_p_value=dp.p_value,
        arcsine_distance=ks.distance,
        circular_variance=cv,
        min_entropy_bits=None,
        quantizer_bits=None,
    )
    report.validate()

    csv_path = os.path.join(out_dir, "autocorr.csv")
    write_csv(
        csv_path,
        ["lag", "gamma_in_pulse", "gamma_off_pulse", "gamma_subtracted",
         "rho_subtracted", "rho_in_pulse"],
        [
            (k, res.gamma_y[k], res.gamma_n[k], res.gamma[k], res.rho[k], raw.rho[k])
            for k in range(max_lag + 1)
        ],
        meta={"experiment": "autocorr", "seed": cfg.seed,
              "n_samples": report.n_samples,
              "noise_floor": _fmt(report.noise_floor),
              "dp_p_value": _fmt(dp.p_value)},
    )
    write_csv(
        os.path.join(out_dir, "histogram.csv"),
        ["bin_left", "bin_right", "count"],
        zip(edges[:-1], edges[1:], counts),
        meta={"n_samples": report.n_samples},
    )
    report_path = os.path.join(out_dir, "report.txt")
    with open(report_path, "w") as f:
        f.write(report.to_text() + "\n")
    _write_gnuplot(out_dir, "autocorr", "autocorr.csv",
                   "noise-subtracted autocorrelation", "lag k", "rho(k)",
                   using="1:5", style="points")
    _write_run_metadata(out_dir, cfg, {
        "dp_p_value": dp.p_value,
        "max_abs_rho_2_100": float(np.max(np.abs(res.rho[2:101]))),
        "rho_1": float(res.rho[1]),
    })
    return AutocorrOutput(report, data, report_path, csv_path)


# --------------------------------------------------------------------------
# bit generation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GenerateResult:
    bits_path: str
    metadata_path: str
    n_output_bits: int
    h_min_bits_per_sample: float
    extractor_n: int
    extractor_m: int


def run_generate(cfg: ExperimentConfig) -> GenerateResult:
    """simulate -> detect -> digitize -> sample -> size extractor -> extract."""
    cfg.validate()
    out_dir = _ensure_out(cfg)
    bits = cfg.chain.digitizer.bits

    full_scale, calib_values = calibrate_scale(cfg)
    dig = dataclasses.replace(cfg.chain.digitizer, full_scale=full_scale)
    calib_codes, _, _ = quantize_values(calib_values, dig)
    hist = np.bincount(calib_codes, minlength=dig.levels())
    h_min = min_entropy(hist, bits=bits)
    if h_min < cfg.extractor.h_floor_bits_per_sample:
        raise LowEntropyError(h_min, cfg.extractor.h_floor_bits_per_sample)

    n_bits = cfg.extractor.block_bits
    eps = cfg.extractor.epsilon()
    m_bits = output_length(n_bits, h_min / bits, eps)
    if m_bits < 1:
        raise LowEntropyError(h_min, cfg.extractor.h_floor_bits_per_sample)

    data = collect_pulses(cfg, cfg.run.pulses, full_scale=full_scale)
    codes, clip_lo, clip_hi = quantize_values(data.values_in, dig)
    raw_bits = bits_from_codes(codes, bits)
    seed_bits = streams.stream(cfg.seed, streams.DOMAIN_EXTRACTOR).integers(
        0, 2, size=n_bits + m_bits - 1, dtype=np.uint8
    )
    xcfg = ExtractorConfig(n_bits, m_bits, seed_bits, eps)
    out_bits = extract_blocks(raw_bits, xcfg)

    bits_path = os.path.join(out_dir, "bits.bin")
    with open(bits_path, "wb") as f:
        f.write(pack_bits(out_bits))
    metadata = {
        "pulses": int(len(data.values_in)),
        "bits_per_sample": bits,
        "full_scale": [full_scale[0], full_scale[1]],
        "clipped_low": clip_lo,
        "clipped_high": clip_hi,
        "h_min_bits_per_sample": h_min,
        "extractor_n_bits": n_bits,
        "extractor_m_bits": m_bits,
        "epsilon_log2": cfg.extractor.epsilon_log2,
        "seed_fingerprint": xcfg.seed_fingerprint(),
        "output_bits": int(out_bits.shape[0]),
    }
    metadata_path = os.path.join(out_dir, "extraction_metadata.json")
    with open(metadata_path, "w") as f:
        json.dump(metadata, f, indent=2, sort_keys=True)
        f.write("\n")
    _write_run_metadata(out_dir, cfg, {"extraction": metadata})
    return GenerateResult(
        bits_path, metadata_path, int(out_bits.shape[0]), h_min, n_bits, m_bits
    )


RUNNERS = {
    "locking-map": run_locking_map,
    "beat-traces": run_beat_traces,
    "histogram-stability": run_histogram_stability,
    "autocorr": run_autocorr,
    "generate": run_generate,
}
