"""Coupled-laser stochastic rate equations and their integrator.

Model summary (all rates in 1/ns, angular frequencies in rad/ns):

    dE1/dt = gamma*(1 + i*alpha)*N1*E1 + kappa*exp(i*psi)*E2(t - tau_d)
             + sqrt(R1)*xi1(t)
    dE2/dt = gamma*(1 + i*alpha)*N2*E2 + kappa*exp(i*psi)*E1(t - tau_d)
             + i*(Omega + beta0*t_ref)*E2 + sqrt(R2)*xi2(t)
    tau * dN1/dt = P1 - N1 - (1 + 2*N1)*|E1|^2
    tau * dN2/dt = P2 - N2 - (1 + 2*N2)*|E2|^2

E1, E2 are normalized complex field envelopes, N1, N2 normalized
inversions.  xi is complex Gaussian white noise, unit-variance per
quadrature, entering additively (variance rate R = r_sp).  The detuning and
chirp act on laser 2 only; in instantaneous coupling mode the delayed
fields are replaced by the current ones.

Integration is Euler-Maruyama on a fixed grid.  The hot path is the
compiled kernel in _kernel.py; lk_step below is the plain-Python reference
used for contract tests, and simulate(backend="numpy") drives the full
integration through it.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Iterator, NamedTuple

import numpy as np

from . import streams
from ._kernel import integrate_cycle
from .errors import ConfigError, DivergenceError
from .params import (
    CHIRP_RESET_PER_CYCLE,
    COUPLING_DELAYED,
    PUMP_CW,
    CouplingSpec,
    DetuningSpec,
    LaserParams,
    PumpSpec,
    SimConfig,
    SimGrid,
)

# Both fields start at a small non-zero seed so the deterministic equations
# have something to amplify; spontaneous noise erases it within a cycle.
INITIAL_FIELD = 1e-3 * (1.0 + 1.0j)

_FAIL_NAMES = {1: "e1", 2: "e2", 3: "n1", 4: "n2"}


# --------------------------------------------------------------------------
# small closed-form operations
# --------------------------------------------------------------------------


def pump_value(t_in_cycle, spec: PumpSpec):
    """Pump at time t within the cycle window [-t_mod/2, +t_mod/2].

    Gain-switched mode evaluates the super-Gaussian pulse
    p_bar * (-1/2 + (3/2) exp[-(t/delta_tau)^(2m)]), peaking at p_bar for
    t=0 and settling at -p_bar/2 in the tails.  CW mode is the constant
    p_bar.  Accepts scalars or arrays.
    """
    if spec.mode == PUMP_CW:
        if np.ndim(t_in_cycle) == 0:
            return float(spec.p_bar)
        return np.full(np.shape(t_in_cycle), float(spec.p_bar))
    t = np.asarray(t_in_cycle, dtype=float)
    val = spec.p_bar * (-0.5 + 1.5 * np.exp(-((t / spec.delta_tau) ** (2 * spec.m))))
    if np.ndim(t_in_cycle) == 0:
        return float(val)
    return val


def chirp_detuning(t, spec: DetuningSpec, t_cycle_start: float = 0.0):
    """Instantaneous angular detuning Omega + beta0*t_ref (rad/ns).

    With per-cycle reset the chirp clock restarts at each modulation-cycle
    start (t_ref = t - t_cycle_start); otherwise t_ref is absolute time.
    """
    if spec.chirp_reset == CHIRP_RESET_PER_CYCLE:
        t_ref = np.asarray(t, dtype=float) - t_cycle_start
    else:
        t_ref = np.asarray(t, dtype=float)
    out = spec.omega + spec.beta0 * t_ref
    if np.ndim(t) == 0:
        return float(out)
    return out


def pump_from_current_ratio(x: float, g_n: float, n0: float) -> float:
    """Normalized pump from a drive current ratio x = J/J_th.

    P = g_n * n0 * (x - 1) / 2; zero at threshold.
    """
    if x < 0:
        raise ConfigError(f"current ratio must be >= 0, got {x}")
    return g_n * n0 * (x - 1.0) / 2.0


def adler_lock_range(kappa: float) -> float:
    """Half-width 2*kappa of the frequency-locking window |Omega| < 2*kappa."""
    if kappa < 0:
        raise ConfigError(f"kappa must be >= 0, got {kappa}")
    return 2.0 * kappa


class CouplingValidity(NamedTuple):
    valid: bool
    delay_product: float  # tau_d * kappa
    bound: float  # 1 / sqrt(1 + alpha^2)


def validate_instantaneous_coupling(
    coupling: CouplingSpec, alpha: float
) -> CouplingValidity:
    """Check tau_d * kappa < 1/sqrt(1 + alpha^2).

    When it holds, neglecting the coupling delay is a faithful
    approximation of the delayed dynamics.
    """
    product = coupling.tau_d * coupling.kappa
    bound = 1.0 / math.sqrt(1.0 + alpha * alpha)
    return CouplingValidity(product < bound, product, bound)


# --------------------------------------------------------------------------
# state, delay history, single step
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LaserPairState:
    """Instantaneous state of the coupled pair."""

    e1: complex
    e2: complex
    n1: float
    n2: float
    t: float  # ns


def _delay_split(tau_d: float, dt: float) -> tuple[int, float]:
    """Split tau_d into whole steps and a fractional remainder."""
    steps = tau_d / dt
    idx = int(steps)
    return idx, steps - idx


class PairHistory:
    """Ring buffer of past field pairs for the delayed coupling term.

    The buffer stores fields on the integration grid; reads interpolate
    linearly between the two stored steps bracketing t - tau_d.  Depth
    ceil(tau_d/dt) + 2, pre-filled with the initial state.
    """

    def __init__(self, depth: int, dt: float, e1: complex, e2: complex):
        self.dt = dt
        self.buf1 = np.full(depth, complex(e1), dtype=np.complex128)
        self.buf2 = np.full(depth, complex(e2), dtype=np.complex128)
        self.pos = 0

    @classmethod
    def for_delay(
        cls, tau_d: float, dt: float, e1: complex, e2: complex
    ) -> "PairHistory":
        return cls(math.ceil(tau_d / dt) + 2, dt, e1, e2)

    def delayed(self, tau_d: float) -> tuple[complex, complex]:
        idx, frac = _delay_split(tau_d, self.dt)
        depth = self.buf1.shape[0]
        if idx + 1 >= depth:
            raise ConfigError(
                f"delay {tau_d} ns exceeds history depth {depth} at dt={self.dt}"
            )
        j0 = (self.pos - idx) % depth
        j1 = (j0 - 1) % depth
        return (
            (1.0 - frac) * self.buf1[j0] + frac * self.buf1[j1],
            (1.0 - frac) * self.buf2[j0] + frac * self.buf2[j1],
        )

    def push(self, e1: complex, e2: complex) -> None:
        self.pos = (self.pos + 1) % self.buf1.shape[0]
        self.buf1[self.pos] = e1
        self.buf2[self.pos] = e2


def lk_step(
    state: LaserPairState,
    params1: LaserParams,
    params2: LaserParams,
    coupling: CouplingSpec,
    detuning: DetuningSpec,
    pumps: tuple[float, float],
    dt: float,
    *,
    history: PairHistory | None = None,
    rng: np.random.Generator | None = None,
    noise: tuple[complex, complex] | None = None,
    t_cycle_start: float = 0.0,
) -> LaserPairState:
    """One Euler-Maruyama step of the coupled rate equations.

    Drift is evaluated at the current state; the noise increment is
    sqrt(r_sp*dt)*(g_re + 1j*g_im) per laser.  Draw order with an rng:
    laser 1 (re, im) then laser 2 (re, im).  Precomputed increments can be
    passed via `noise` instead (exactly one of rng/noise, or neither for
    the deterministic system).  In delayed mode the new state is pushed
    onto `history` after the step.
    """
    p1, p2 = pumps
    if coupling.mode == COUPLING_DELAYED:
        if history is None:
            raise ConfigError("delayed coupling requires a history buffer")
        e1_d, e2_d = history.delayed(coupling.tau_d)
    else:
        e1_d, e2_d = state.e1, state.e2

    det = chirp_detuning(state.t, detuning, t_cycle_start)
    kappa_c = coupling.kappa * cmath.exp(1j * coupling.psi)

    e1, e2, n1, n2 = state.e1, state.e2, state.n1, state.n2
    ae1 = e1.real * e1.real + e1.imag * e1.imag
    ae2 = e2.real * e2.real + e2.imag * e2.imag

    de1 = params1.gamma * n1 * (e1 + 1j * (params1.alpha * e1)) + kappa_c * e2_d
    de2 = (
        params2.gamma * n2 * (e2 + 1j * (params2.alpha * e2))
        + kappa_c * e1_d
        + 1j * (det * e2)
    )
    dn1 = (p1 - n1 - (1.0 + 2.0 * n1) * ae1) * (1.0 / params1.tau)
    dn2 = (p2 - n2 - (1.0 + 2.0 * n2) * ae2) * (1.0 / params2.tau)

    if noise is not None and rng is not None:
        raise ConfigError("pass either rng or noise, not both")
    if noise is None:
        if rng is not None:
            g = rng.standard_normal(4)
            z1 = math.sqrt(params1.r_sp * dt) * complex(g[0], g[1])
            z2 = math.sqrt(params2.r_sp * dt) * complex(g[2], g[3])
        else:
            z1 = 0.0j
            z2 = 0.0j
    else:
        z1, z2 = noise

    new_e1 = e1 + dt * de1 + z1
    new_e2 = e2 + dt * de2 + z2
    new_n1 = n1 + dt * dn1
    new_n2 = n2 + dt * dn2
    t_new = state.t + dt

    if not (math.isfinite(new_e1.real) and math.isfinite(new_e1.imag)):
        raise DivergenceError("e1", t_new)
    if not (math.isfinite(new_e2.real) and math.isfinite(new_e2.imag)):
        raise DivergenceError("e2", t_new)
    if not math.isfinite(new_n1):
        raise DivergenceError("n1", t_new)
    if not math.isfinite(new_n2):
        raise DivergenceError("n2", t_new)

    if history is not None and coupling.mode == COUPLING_DELAYED:
        history.push(new_e1, new_e2)
    return LaserPairState(new_e1, new_e2, new_n1, new_n2, t_new)


# --------------------------------------------------------------------------
# trajectories
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    """Decimated record of a coupled-pair integration.

    Samples live on the grid t0 + k*dt (dt = sim_dt * record_stride);
    cycle_starts[k] is the record index of the first sample of cycle k.
    """

    t0: float
    dt: float
    e1: np.ndarray
    e2: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    cycle_starts: np.ndarray
    period: float  # grid-quantized modulation period (ns)
    sim_dt: float
    record_stride: int
    seed: int
    trajectory_index: int = 0

    def __len__(self) -> int:
        return self.e1.shape[0]

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) * self.dt

    def n_cycles(self) -> int:
        return len(self.cycle_starts)


def _records_in(start_step: int, end_step: int, stride: int) -> tuple[int, int]:
    """(first recorded step, count) for global steps in [start, end)."""
    first = ((start_step + stride - 1) // stride) * stride
    if first >= end_step:
        return -1, 0
    return first, (end_step - 1 - first) // stride + 1


def _cycle_drive(config: SimConfig, cycle: int):
    """Per-step pump and detuning arrays for one cycle."""
    spc = config.steps_per_cycle()
    dt = config.grid.dt
    period = config.period()
    t_loc = np.arange(spc) * dt
    p1 = np.ascontiguousarray(
        pump_value(t_loc - 0.5 * period, config.pump1), dtype=np.float64
    )
    p2 = np.ascontiguousarray(
        pump_value(t_loc - 0.5 * period, config.pump2), dtype=np.float64
    )
    if config.detuning.chirp_reset == CHIRP_RESET_PER_CYCLE:
        t_ref = t_loc
    else:
        t_ref = cycle * spc * dt + t_loc
    det = np.ascontiguousarray(
        config.detuning.omega + config.detuning.beta0 * t_ref, dtype=np.float64
    )
    return p1, p2, det


class _RunState:
    """Mutable integration state carried across cycle blocks."""

    def __init__(self, config: SimConfig, initial: LaserPairState | None = None):
        if initial is None:
            initial = LaserPairState(INITIAL_FIELD, INITIAL_FIELD, 0.0, 0.0, 0.0)
        self.e1 = complex(initial.e1)
        self.e2 = complex(initial.e2)
        self.n1 = float(initial.n1)
        self.n2 = float(initial.n2)
        self.cycle = 0
        self.delayed = config.coupling.mode == COUPLING_DELAYED
        if self.delayed:
            depth = math.ceil(config.coupling.tau_d / config.grid.dt) + 2
        else:
            depth = 1
        self.buf1 = np.full(depth, self.e1, dtype=np.complex128)
        self.buf2 = np.full(depth, self.e2, dtype=np.complex128)
        self.pos = 0


def _run_cycle_kernel(config, st, cycle, traj, p1, p2, det, rec, rec_pos):
    spc = p2.shape[0]
    dt = config.grid.dt
    stride = config.grid.record_stride
    dly_idx, dly_frac = _delay_split(config.coupling.tau_d, dt)
    kappa_c = config.coupling.kappa * cmath.exp(1j * config.coupling.psi)
    g1 = streams.field_noise_raw(
        config.grid.seed, traj, cycle, 0, spc, config.laser1.r_sp
    )
    g2 = streams.field_noise_raw(
        config.grid.seed, traj, cycle, 1, spc, config.laser2.r_sp
    )
    rec_first, _ = _records_in(cycle * spc, (cycle + 1) * spc, stride)
    rec_first_local = rec_first - cycle * spc if rec_first >= 0 else -1
    rec_e1, rec_e2, rec_n1, rec_n2 = rec

    (
        st.e1,
        st.e2,
        st.n1,
        st.n2,
        st.pos,
        rec_pos,
        fail,
        fail_step,
    ) = integrate_cycle(
        st.e1,
        st.e2,
        st.n1,
        st.n2,
        config.laser1.alpha,
        config.laser1.gamma,
        1.0 / config.laser1.tau,
        config.laser2.alpha,
        config.laser2.gamma,
        1.0 / config.laser2.tau,
        kappa_c,
        st.delayed,
        dly_idx,
        dly_frac,
        st.buf1,
        st.buf2,
        st.pos,
        p1,
        p2,
        det,
        g1,
        g2,
        math.sqrt(config.laser1.r_sp * dt),
        math.sqrt(config.laser2.r_sp * dt),
        dt,
        stride,
        rec_first_local,
        rec_e1,
        rec_e2,
        rec_n1,
        rec_n2,
        rec_pos,
    )
    if fail:
        t_fail = (cycle * spc + fail_step + 1) * dt
        raise DivergenceError(_FAIL_NAMES[fail], t_fail)
    return rec_pos


def _run_cycle_numpy(config, st, cycle, traj, p1, p2, det, rec, rec_pos):
    """Reference path: same cycle, driven step-by-step through lk_step."""
    spc = p2.shape[0]
    dt = config.grid.dt
    stride = config.grid.record_stride
    rec_first, _ = _records_in(cycle * spc, (cycle + 1) * spc, stride)
    rec_first_local = rec_first - cycle * spc if rec_first >= 0 else spc
    rec_e1, rec_e2, rec_n1, rec_n2 = rec

    g1 = streams.field_noise_raw(
        config.grid.seed, traj, cycle, 0, spc, config.laser1.r_sp
    )
    g2 = streams.field_noise_raw(
        config.grid.seed, traj, cycle, 1, spc, config.laser2.r_sp
    )
    s1 = math.sqrt(config.laser1.r_sp * dt)
    s2 = math.sqrt(config.laser2.r_sp * dt)

    history = None
    if st.delayed:
        history = PairHistory(st.buf1.shape[0], dt, 0j, 0j)
        history.buf1[:] = st.buf1
        history.buf2[:] = st.buf2
        history.pos = st.pos

    t_cycle = cycle * spc * dt
    # Detuning is handed to lk_step through a zero-omega spec plus the
    # precomputed det array folded into a per-step DetuningSpec; instead we
    # evaluate chirp directly by giving lk_step the true spec and exact t.
    state = LaserPairState(st.e1, st.e2, st.n1, st.n2, t_cycle)
    next_rec = rec_first_local
    for i in range(spc):
        if i == next_rec:
            rec_e1[rec_pos] = state.e1
            rec_e2[rec_pos] = state.e2
            rec_n1[rec_pos] = state.n1
            rec_n2[rec_pos] = state.n2
            rec_pos += 1
            next_rec += stride
        state = replace(state, t=t_cycle + i * dt)
        state = lk_step(
            state,
            config.laser1,
            config.laser2,
            config.coupling,
            DetuningSpec(det[i], 0.0, config.detuning.chirp_reset),
            (p1[i], p2[i]),
            dt,
            history=history,
            noise=(
                complex(s1 * g1[i, 0], s1 * g1[i, 1]),
                complex(s2 * g2[i, 0], s2 * g2[i, 1]),
            ),
            t_cycle_start=t_cycle,
        )
    st.e1, st.e2, st.n1, st.n2 = state.e1, state.e2, state.n1, state.n2
    if history is not None:
        st.buf1[:] = history.buf1
        st.buf2[:] = history.buf2
        st.pos = history.pos
    return rec_pos


def iter_blocks(
    config: SimConfig,
    trajectory_index: int = 0,
    block_cycles: int = 256,
    backend: str = "numba",
    initial: LaserPairState | None = None,
) -> Iterator[Trajectory]:
    """Integrate one trajectory, yielding consecutive cycle blocks.

    Blocks share state (fields, inversions, delay history), so the
    concatenation equals one uninterrupted run; memory stays bounded for
    long statistics runs.  `initial` overrides the stock small-field
    initial condition.
    """
    config.validate()
    if backend not in ("numba", "numpy"):
        raise ConfigError(f"unknown backend: {backend!r}")
    run_cycle = _run_cycle_kernel if backend == "numba" else _run_cycle_numpy

    spc = config.steps_per_cycle()
    dt = config.grid.dt
    stride = config.grid.record_stride
    n_cycles = config.grid.n_cycles
    st = _RunState(config, initial)

    static_drive = config.detuning.chirp_reset == CHIRP_RESET_PER_CYCLE
    drive = _cycle_drive(config, 0) if static_drive else None

    c0 = 0
    while c0 < n_cycles:
        c1 = min(c0 + block_cycles, n_cycles)
        first_step, n_rec = _records_in(c0 * spc, c1 * spc, stride)
        rec = (
            np.empty(n_rec, dtype=np.complex128),
            np.empty(n_rec, dtype=np.complex128),
            np.empty(n_rec, dtype=np.float64),
            np.empty(n_rec, dtype=np.float64),
        )
        rec_pos = 0
        for cycle in range(c0, c1):
            p1, p2, det = drive if static_drive else _cycle_drive(config, cycle)
            rec_pos = run_cycle(config, st, cycle, trajectory_index, p1, p2, det, rec, rec_pos)
        st.cycle = c1

        block_rec_offset = (first_step // stride) if first_step >= 0 else 0
        starts = np.array(
            [
                -(-(k * spc) // stride) - block_rec_offset
                for k in range(c0, c1)
            ],
            dtype=np.int64,
        )
        yield Trajectory(
            t0=(first_step if first_step >= 0 else 0) * dt,
            dt=stride * dt,
            e1=rec[0],
            e2=rec[1],
            n1=rec[2],
            n2=rec[3],
            cycle_starts=starts,
            period=spc * dt,
            sim_dt=dt,
            record_stride=stride,
            seed=config.grid.seed,
            trajectory_index=trajectory_index,
        )
        c0 = c1


def simulate(
    config: SimConfig,
    trajectory_index: int = 0,
    backend: str = "numba",
    initial: LaserPairState | None = None,
) -> Trajectory:
    """Integrate the configured number of modulation cycles.

    Laser 1 runs on pump1 (CW in all stock configurations), laser 2 on
    pump2; returns the decimated trajectory with per-cycle start indices.
    """
    blocks = list(iter_blocks(config, trajectory_index, backend=backend, initial=initial))
    spc = config.steps_per_cycle()
    stride = config.grid.record_stride
    first_step, _ = _records_in(0, config.grid.n_cycles * spc, stride)
    starts = np.array(
        [-(-(k * spc) // stride) for k in range(config.grid.n_cycles)],
        dtype=np.int64,
    )
    return Trajectory(
        t0=(first_step if first_step >= 0 else 0) * config.grid.dt,
        dt=stride * config.grid.dt,
        e1=np.concatenate([b.e1 for b in blocks]),
        e2=np.concatenate([b.e2 for b in blocks]),
        n1=np.concatenate([b.n1 for b in blocks]),
        n2=np.concatenate([b.n2 for b in blocks]),
        cycle_starts=starts,
        period=spc * config.grid.dt,
        sim_dt=config.grid.dt,
        record_stride=stride,
        seed=config.grid.seed,
        trajectory_index=trajectory_index,
    )


# --------------------------------------------------------------------------
# trajectory file format
# --------------------------------------------------------------------------

_TRAJ_COLUMNS = "t_ns,e1_re,e1_im,e2_re,e2_im,n1,n2"


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Columnar CSV: '#'-prefixed grid metadata, then one row per sample."""
    with open(path, "w") as f:
        f.write(f"# t0_ns={traj.t0!r}\n")
        f.write(f"# dt_ns={traj.dt!r}\n")
        f.write(f"# sim_dt_ns={traj.sim_dt!r}\n")
        f.write(f"# record_stride={traj.record_stride}\n")
        f.write(f"# period_ns={traj.period!r}\n")
        f.write(f"# seed={traj.seed}\n")
        f.write(f"# trajectory_index={traj.trajectory_index}\n")
        f.write("# cycle_starts=" + ",".join(str(i) for i in traj.cycle_starts) + "\n")
        f.write(_TRAJ_COLUMNS + "\n")
        t = traj.times()
        for k in range(len(traj)):
            f.write(
                f"{t[k]:.9g},{traj.e1[k].real:.17g},{traj.e1[k].imag:.17g},"
                f"{traj.e2[k].real:.17g},{traj.e2[k].imag:.17g},"
                f"{traj.n1[k]:.17g},{traj.n2[k]:.17g}\n"
            )


def read_trajectory_csv(path) -> Trajectory:
    meta: dict[str, str] = {}
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val.strip()
            elif line != _TRAJ_COLUMNS:
                rows.append([float(x) for x in line.split(",")])
    data = np.array(rows, dtype=float)
    if data.size == 0:
        data = np.zeros((0, 7))
    starts = meta.get("cycle_starts", "")
    cycle_starts = np.array(
        [int(s) for s in starts.split(",") if s], dtype=np.int64
    )
    return Trajectory(
        t0=float(meta["t0_ns"]),
        dt=float(meta["dt_ns"]),
        e1=data[:, 1] + 1j * data[:, 2],
        e2=data[:, 3] + 1j * data[:, 4],
        n1=data[:, 5],
        n2=data[:, 6],
        cycle_starts=cycle_starts,
        period=float(meta["period_ns"]),
        sim_dt=float(meta["sim_dt_ns"]),
        record_stride=int(meta["record_stride"]),
        seed=int(meta["seed"]),
        trajectory_index=int(meta.get("trajectory_index", 0)),
    )
