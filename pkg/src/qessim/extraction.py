"""Seeded randomness extraction.

A Toeplitz universal-hash extractor over GF(2), sized by the leftover-hash
bound from the measured min-entropy.  Samples enter the bitstream
least-significant-bit first; one seed may be reused across blocks, which is
standard for Toeplitz hashing.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as _signal

from .errors import ConfigError


@dataclass(frozen=True)
class ExtractorConfig:
    """Block extractor configuration: m output bits from n input bits."""

    n_bits: int
    m_bits: int
    seed_bits: np.ndarray  # exactly n + m - 1 bits
    epsilon: float  # security parameter of the leftover-hash sizing

    def __post_init__(self):
        seed = np.asarray(self.seed_bits, dtype=np.uint8)
        object.__setattr__(self, "seed_bits", seed)

    def validate(self) -> None:
        if not 0 < self.m_bits <= self.n_bits:
            raise ConfigError(
                f"need 0 < m <= n, got m={self.m_bits}, n={self.n_bits}"
            )
        if self.seed_bits.shape[0] != self.n_bits + self.m_bits - 1:
            raise ConfigError(
                f"seed must have n+m-1 = {self.n_bits + self.m_bits - 1} bits, "
                f"got {self.seed_bits.shape[0]}"
            )
        if not np.all((self.seed_bits == 0) | (self.seed_bits == 1)):
            raise ConfigError("seed bits must be 0/1")
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError(f"epsilon must be in (0, 1), got {self.epsilon}")

    def seed_fingerprint(self) -> str:
        return hashlib.sha256(np.packbits(self.seed_bits).tobytes()).hexdigest()[:16]


def output_length(n_bits: int, h_min_per_bit: float, epsilon: float) -> int:
    """Leftover-hash output size m = floor(n*h - 2*log2(1/eps)), floored at 0."""
    if not 0.0 < h_min_per_bit <= 1.0:
        raise ConfigError(f"h_min_per_bit must be in (0, 1], got {h_min_per_bit}")
    if not 0.0 < epsilon < 1.0:
        raise ConfigError(f"epsilon must be in (0, 1), got {epsilon}")
    m = math.floor(n_bits * h_min_per_bit - 2.0 * math.log2(1.0 / epsilon))
    return max(0, m)


def toeplitz_extract(input_bits, seed_bits, m: int) -> np.ndarray:
    """Multiply the input by the seeded m x n Toeplitz matrix over GF(2).

    T[i, j] = seed[m - 1 + j - i]: the matrix diagonal is seed[m-1], the
    first column (read away from the diagonal) is seed[m-1], ..., seed[0]
    and the first row is seed[m-1], ..., seed[n+m-2].
    """
    x = np.asarray(input_bits, dtype=np.int64)
    s = np.asarray(seed_bits, dtype=np.int64)
    n = x.shape[0]
    if m < 1:
        raise ConfigError("m must be >= 1")
    if s.shape[0] != n + m - 1:
        raise ConfigError(
            f"seed must have n+m-1 = {n + m - 1} bits, got {s.shape[0]}"
        )
    # y_i = sum_j seed[m-1+j-i] x_j = correlate(seed, x)[m-1-i]
    if n * m > 1_000_000:
        # FFT correlation; coefficients are bounded by n, so rounding the
        # float result back to integers is exact at these sizes.
        corr = np.rint(
            _signal.fftconvolve(s.astype(float), x[::-1].astype(float), mode="valid")
        ).astype(np.int64)
    else:
        corr = np.correlate(s, x, mode="valid")
    return (corr[::-1] & 1).astype(np.uint8)


def bits_from_codes(codes, bits_per_sample: int) -> np.ndarray:
    """Unpack integer codes into a bit array, LSB first per sample."""
    c = np.asarray(codes)
    if np.any(c < 0) or np.any(c >= (1 << bits_per_sample)):
        raise ConfigError("code out of range for the stated bit width")
    shifts = np.arange(bits_per_sample, dtype=np.uint16)
    bits = (c.astype(np.uint16)[:, None] >> shifts[None, :]) & 1
    return bits.astype(np.uint8).reshape(-1)


def pack_bits(bits) -> bytes:
    """Pack a 0/1 array into bytes, first bit in the LSB of the first byte."""
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes()


def extract_blocks(bits, config: ExtractorConfig) -> np.ndarray:
    """Run the block extractor over the bitstream.

    Consumes floor(len(bits)/n) blocks of n bits; each yields m output
    bits via the same seeded Toeplitz matrix; leftover input bits are
    discarded.
    """
    config.validate()
    x = np.asarray(bits, dtype=np.uint8)
    n, m = config.n_bits, config.m_bits
    n_blocks = x.shape[0] // n
    if n_blocks == 0:
        raise ConfigError(f"need at least {n} input bits, got {x.shape[0]}")
    out = np.empty(n_blocks * m, dtype=np.uint8)
    for k in range(n_blocks):
        out[k * m : (k + 1) * m] = toeplitz_extract(
            x[k * n : (k + 1) * n], config.seed_bits, m
        )
    return out
