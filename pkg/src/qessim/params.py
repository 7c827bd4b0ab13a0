"""Physical and numerical parameter sets for the coupled-laser model.

Unit conventions, used everywhere in this package:
times in ns, rates in 1/ns, angular frequencies in rad/ns, angular chirp
rates in rad/ns^2.  Fields are dimensionless slowly-varying envelopes
normalized so that |E|^2 is the normalized intensity; inversions are
dimensionless and zero at threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConfigError

TWO_PI = 2.0 * math.pi

PUMP_CW = "cw"
PUMP_GAIN_SWITCHED = "gain-switched"
COUPLING_INSTANTANEOUS = "instantaneous"
COUPLING_DELAYED = "delayed"
CHIRP_RESET_PER_CYCLE = "per-cycle"
CHIRP_RESET_NEVER = "never"


@dataclass(frozen=True)
class LaserParams:
    """Single-laser rate-equation parameters."""

    alpha: float = 2.0  # linewidth enhancement factor
    gamma: float = 150.0  # photon decay rate (1/ns)
    tau: float = 1.0  # carrier lifetime (ns)
    r_sp: float = 0.2  # spontaneous-emission variance rate (1/ns)

    def validate(self) -> None:
        if not math.isfinite(self.alpha):
            raise ConfigError("alpha must be finite")
        if self.gamma < 0 or not math.isfinite(self.gamma):
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        if self.tau <= 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        if self.r_sp < 0:
            raise ConfigError(f"r_sp must be >= 0, got {self.r_sp}")


@dataclass(frozen=True)
class CouplingSpec:
    """Mutual coupling between the two laser cavities."""

    kappa: float = 0.005  # coupling rate (1/ns); high-loss chip default
    psi: float = 0.0  # feedback phase delay (rad), folded into [0, 2pi)
    tau_d: float = 0.02  # feedback time delay (ns)
    mode: str = COUPLING_INSTANTANEOUS

    def __post_init__(self):
        object.__setattr__(self, "psi", self.psi % TWO_PI)

    def validate(self) -> None:
        if self.kappa < 0:
            raise ConfigError(f"kappa must be >= 0, got {self.kappa}")
        if self.tau_d < 0:
            raise ConfigError(f"tau_d must be >= 0, got {self.tau_d}")
        if self.mode not in (COUPLING_INSTANTANEOUS, COUPLING_DELAYED):
            raise ConfigError(f"unknown coupling mode: {self.mode!r}")


@dataclass(frozen=True)
class DetuningSpec:
    """Initial detuning of laser 2 and its phenomenological linear chirp.

    The field equation of laser 2 carries the term i*(omega + beta0*t_ref),
    so the detected beat frequency is |omega + beta0*t_ref|; with opposite
    signs the beat crosses zero at t_ref = |omega| / beta0.
    """

    omega: float = 0.0  # initial angular detuning (rad/ns)
    beta0: float = 0.0  # angular chirp rate (rad/ns^2)
    chirp_reset: str = CHIRP_RESET_PER_CYCLE

    def validate(self) -> None:
        if self.beta0 < 0:
            raise ConfigError(f"beta0 must be >= 0, got {self.beta0}")
        if self.chirp_reset not in (CHIRP_RESET_PER_CYCLE, CHIRP_RESET_NEVER):
            raise ConfigError(f"unknown chirp_reset: {self.chirp_reset!r}")


@dataclass(frozen=True)
class PumpSpec:
    """Pump drive of one laser: constant, or periodically gain-switched.

    In gain-switched mode the cycle window is t in [-t_mod/2, +t_mod/2] with
    the super-Gaussian pulse centered at 0; the pump floor between pulses is
    -p_bar/2 (below threshold).
    """

    mode: str = PUMP_CW
    p_bar: float = 8.0  # peak normalized pump
    delta_tau: float = 5.0  # current-pulse duration (ns)
    m: int = 5  # super-Gaussian order
    t_mod: float = 20.0  # modulation period (ns)

    def validate(self) -> None:
        if self.mode not in (PUMP_CW, PUMP_GAIN_SWITCHED):
            raise ConfigError(f"unknown pump mode: {self.mode!r}")
        if self.mode == PUMP_GAIN_SWITCHED:
            if self.t_mod <= 0:
                raise ConfigError(f"t_mod must be > 0, got {self.t_mod}")
            if not self.delta_tau < self.t_mod:
                raise ConfigError(
                    f"delta_tau ({self.delta_tau}) must be < t_mod ({self.t_mod})"
                )
            if self.m < 1 or int(self.m) != self.m:
                raise ConfigError(f"m must be a positive integer, got {self.m}")


@dataclass(frozen=True)
class SimGrid:
    """Integration grid and output decimation."""

    dt: float = 1e-4  # integration step (ns)
    n_cycles: int = 1
    record_stride: int = 100  # keep every record_stride-th step
    seed: int = 0  # 64-bit master seed

    def validate(self, coupling: CouplingSpec | None = None) -> None:
        if self.dt <= 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if self.n_cycles < 1:
            raise ConfigError(f"n_cycles must be >= 1, got {self.n_cycles}")
        if self.record_stride < 1:
            raise ConfigError(
                f"record_stride must be >= 1, got {self.record_stride}"
            )
        if (
            coupling is not None
            and coupling.mode == COUPLING_DELAYED
            and not self.dt < coupling.tau_d
        ):
            raise ConfigError(
                f"delayed coupling requires dt < tau_d "
                f"(dt={self.dt}, tau_d={coupling.tau_d})"
            )


@dataclass(frozen=True)
class SimConfig:
    """Full configuration of one coupled-pair simulation.

    Laser 1 is the CW local oscillator, laser 2 carries the detuning/chirp
    term and is the one that gets gain-switched.
    """

    laser1: LaserParams
    laser2: LaserParams
    coupling: CouplingSpec
    detuning: DetuningSpec
    pump1: PumpSpec
    pump2: PumpSpec
    grid: SimGrid

    def validate(self) -> None:
        self.laser1.validate()
        self.laser2.validate()
        self.coupling.validate()
        self.detuning.validate()
        self.pump1.validate()
        self.pump2.validate()
        self.grid.validate(self.coupling)
        if self.period() <= 0:
            raise ConfigError("modulation period must be positive")

    def period(self) -> float:
        """Modulation period of the run (ns).

        Gain-switched pumps impose their t_mod; an all-CW configuration
        still uses pump2.t_mod as the bookkeeping cycle length.
        """
        if self.pump2.mode == PUMP_GAIN_SWITCHED:
            return self.pump2.t_mod
        if self.pump1.mode == PUMP_GAIN_SWITCHED:
            return self.pump1.t_mod
        return self.pump2.t_mod

    def steps_per_cycle(self) -> int:
        return max(1, round(self.period() / self.grid.dt))

    def with_seed(self, seed: int) -> "SimConfig":
        return replace(self, grid=replace(self.grid, seed=seed))


def default_laser() -> LaserParams:
    """Reference InP DFB device parameters used throughout."""
    return LaserParams(alpha=2.0, gamma=150.0, tau=1.0, r_sp=0.2)


def default_detuning() -> DetuningSpec:
    # beta0 is the published thermal chirp rate, 2*pi * 1 MHz/ns in rad/ns^2.
    return DetuningSpec(omega=0.0, beta0=TWO_PI * 1e-3)


KAPPA_LOW_LOSS = 5.0  # locking-prone chip (1/ns)
KAPPA_HIGH_LOSS = 0.005  # high waveguide loss chip, ~30 dB lower rate (1/ns)
