"""Deterministic derivation of random-number streams.

Every stochastic quantity in the simulator draws from its own counter-based
Philox stream keyed by ``(master_seed, tag)``.  The tag packs a domain, a
trajectory index, a cycle index and a channel index into one 64-bit word, so
independent workers regenerate exactly the same noise no matter how cycles
are scheduled, and no two streams can collide.

Tag layout (most significant bits first):

    bits 62-63  domain      (what kind of noise)
    bits 40-61  trajectory  (22 bits, up to ~4M independent trajectories)
    bits  2-39  cycle       (38 bits)
    bits  0-1   channel     (laser index, or sub-channel within a domain)
"""

from __future__ import annotations

import numpy as np

DOMAIN_FIELD = 0  # spontaneous-emission noise entering the field equations
DOMAIN_AMPLIFIER = 1  # additive noise of the RF amplifier
DOMAIN_EXTRACTOR = 2  # extractor seed material
DOMAIN_MISC = 3  # anything else (test fixtures, ad-hoc draws)

_TRAJ_BITS = 22
_CYCLE_BITS = 38


def stream_key(
    master_seed: int,
    domain: int,
    trajectory: int = 0,
    cycle: int = 0,
    channel: int = 0,
) -> np.ndarray:
    """Return the 2-word Philox key for one logical stream."""
    if not 0 <= domain < 4:
        raise ValueError(f"domain out of range: {domain}")
    if not 0 <= trajectory < (1 << _TRAJ_BITS):
        raise ValueError(f"trajectory index out of range: {trajectory}")
    if not 0 <= cycle < (1 << _CYCLE_BITS):
        raise ValueError(f"cycle index out of range: {cycle}")
    if not 0 <= channel < 4:
        raise ValueError(f"channel out of range: {channel}")
    tag = (domain << 62) | (trajectory << 40) | (cycle << 2) | channel
    return np.array([master_seed & 0xFFFFFFFFFFFFFFFF, tag], dtype=np.uint64)


def stream(
    master_seed: int,
    domain: int,
    trajectory: int = 0,
    cycle: int = 0,
    channel: int = 0,
) -> np.random.Generator:
    """Create the Generator for one logical stream."""
    key = stream_key(master_seed, domain, trajectory, cycle, channel)
    return np.random.Generator(np.random.Philox(key=key))


_ZERO_CACHE: dict[int, np.ndarray] = {}


def field_noise_raw(
    master_seed: int,
    trajectory: int,
    cycle: int,
    laser: int,
    n_steps: int,
    variance_rate: float,
) -> np.ndarray:
    """Raw standard-normal draws (n_steps, 2) for one laser over one cycle.

    Column 0 drives the real quadrature, column 1 the imaginary one; the
    integrator scales by sqrt(variance_rate * dt), so both quadratures
    accumulate a variance of variance_rate * T over a span T.  A zero
    variance rate short-circuits to a shared zero array.
    """
    if variance_rate == 0.0:
        z = _ZERO_CACHE.get(n_steps)
        if z is None:
            z = np.zeros((n_steps, 2))
            _ZERO_CACHE[n_steps] = z
        return z
    g = stream(master_seed, DOMAIN_FIELD, trajectory, cycle, laser)
    return g.standard_normal((n_steps, 2))
