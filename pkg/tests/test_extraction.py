"""Toeplitz extractor: oracle equivalence, sizing, statistical smoke."""

import math

import numpy as np
import pytest

from qessim.errors import ConfigError
from qessim.extraction import (
    ExtractorConfig,
    bits_from_codes,
    extract_blocks,
    output_length,
    pack_bits,
    toeplitz_extract,
)


def toeplitz_matrix(seed, n, m):
    """Brute-force construction: T[i, j] = seed[m - 1 + j - i]."""
    s = np.asarray(seed, dtype=np.int64)
    T = np.empty((m, n), dtype=np.int64)
    for i in range(m):
        for j in range(n):
            T[i, j] = s[m - 1 + j - i]
    return T


def oracle_extract(input_bits, seed, m):
    T = toeplitz_matrix(seed, len(input_bits), m)
    return (T @ np.asarray(input_bits, dtype=np.int64)) % 2


class TestOutputLength:
    def test_near_full_entropy(self):
        assert output_length(1024, 1.0, 2.0**-32) == 960

    def test_nothing_extractable(self):
        # n*h <= 2*log2(1/eps) leaves nothing
        assert output_length(100, 0.5, 2.0**-32) == 0

    def test_arcsine_eight_bit_sizing(self):
        # h from the arcsine edge-bin min-entropy oracle (4.650556 bits of 8)
        h = 4.650556 / 8.0
        m = output_length(4096, h, 2.0**-64)
        assert m == math.floor(4096 * h - 128.0)
        assert m == 2253

    def test_domain_checks(self):
        with pytest.raises(ConfigError):
            output_length(100, 0.0, 0.5)
        with pytest.raises(ConfigError):
            output_length(100, 0.5, 1.5)


class TestToeplitzExtract:
    def test_all_zero_seed(self):
        out = toeplitz_extract(np.ones(8, dtype=np.uint8), np.zeros(15, dtype=np.uint8), 8)
        assert np.all(out == 0)

    def test_identity_seed(self):
        n = m = 6
        seed = np.zeros(n + m - 1, dtype=np.uint8)
        seed[m - 1] = 1  # unit diagonal
        x = np.array([1, 0, 1, 1, 0, 1], dtype=np.uint8)
        assert np.array_equal(toeplitz_extract(x, seed, m), x)

    def test_worked_example(self):
        # computed with the explicit-matrix oracle before implementation
        seed = np.array([1, 0, 1, 0, 1, 1], dtype=np.uint8)
        x = np.array([1, 1, 0, 1], dtype=np.uint8)
        expected = oracle_extract(x, seed, 3)
        assert np.array_equal(expected, [0, 0, 1])
        assert np.array_equal(toeplitz_extract(x, seed, 3), expected)

    @pytest.mark.parametrize("n,m", [(4, 3), (5, 5), (8, 8), (12, 8), (12, 1), (11, 7)])
    def test_exhaustive_small_sizes(self, n, m):
        rng = np.random.default_rng(n * 100 + m)
        for _ in range(3):
            seed = rng.integers(0, 2, size=n + m - 1).astype(np.uint8)
            T = toeplitz_matrix(seed, n, m)
            # all 2^n inputs at once against the matrix oracle
            xs = ((np.arange(1 << n)[:, None] >> np.arange(n)[None, :]) & 1).astype(np.int64)
            want = (xs @ T.T) % 2
            for k in range(1 << n):
                got = toeplitz_extract(xs[k].astype(np.uint8), seed, m)
                assert np.array_equal(got, want[k])

    def test_fft_path_matches_direct(self):
        rng = np.random.default_rng(33)
        n, m = 4096, 700  # n*m > 1e6 triggers the FFT path
        seed = rng.integers(0, 2, size=n + m - 1).astype(np.uint8)
        x = rng.integers(0, 2, size=n).astype(np.uint8)
        fast = toeplitz_extract(x, seed, m)
        direct = (np.correlate(seed.astype(np.int64), x.astype(np.int64), "valid")[::-1] & 1)
        assert np.array_equal(fast, direct.astype(np.uint8))

    def test_linearity(self):
        rng = np.random.default_rng(30)
        n, m = 64, 32
        seed = rng.integers(0, 2, size=n + m - 1).astype(np.uint8)
        for _ in range(1000):
            x = rng.integers(0, 2, size=n).astype(np.uint8)
            y = rng.integers(0, 2, size=n).astype(np.uint8)
            lhs = toeplitz_extract(x ^ y, seed, m)
            rhs = toeplitz_extract(x, seed, m) ^ toeplitz_extract(y, seed, m)
            assert np.array_equal(lhs, rhs)

    def test_length_mismatch(self):
        with pytest.raises(ConfigError):
            toeplitz_extract(np.zeros(8, dtype=np.uint8), np.zeros(9, dtype=np.uint8), 4)


class TestBiasedInputSmoke:
    def test_uniformization(self):
        rng = np.random.default_rng(42)
        n = 4096
        h = -math.log2(0.9)  # i.i.d. Pr[1] = 0.9
        m = output_length(n, h, 2.0**-64)
        assert m > 0
        seed = rng.integers(0, 2, size=n + m - 1).astype(np.uint8)
        cfg = ExtractorConfig(n, m, seed, 2.0**-64)
        blocks_needed = -(-1_000_000 // m)
        raw = (rng.random(blocks_needed * n) < 0.9).astype(np.uint8)
        out = extract_blocks(raw, cfg)[:1_000_000]
        n_out = out.shape[0]
        ones = int(out.sum())
        sigma = math.sqrt(n_out * 0.25)
        assert abs(ones - n_out / 2) < 3.0 * sigma
        centered = out.astype(float) - out.mean()
        lag1 = float(np.dot(centered[:-1], centered[1:]) / np.dot(centered, centered))
        assert abs(lag1) < 4.0 / math.sqrt(n_out)


class TestPlumbing:
    def test_bits_from_codes_lsb_first(self):
        bits = bits_from_codes(np.array([0b1011, 0b0001]), 4)
        assert np.array_equal(bits, [1, 1, 0, 1, 1, 0, 0, 0])

    def test_bits_from_codes_range_check(self):
        with pytest.raises(ConfigError):
            bits_from_codes(np.array([16]), 4)

    def test_pack_bits(self):
        assert pack_bits([1, 0, 0, 0, 0, 0, 0, 0, 1]) == bytes([0x01, 0x01])

    def test_config_validation(self):
        seed = np.zeros(10, dtype=np.uint8)
        with pytest.raises(ConfigError):
            ExtractorConfig(8, 0, seed, 0.5).validate()
        with pytest.raises(ConfigError):
            ExtractorConfig(8, 4, np.zeros(5, dtype=np.uint8), 0.5).validate()
        with pytest.raises(ConfigError):
            ExtractorConfig(8, 3, seed, 1.5).validate()
        ExtractorConfig(8, 3, seed, 0.5).validate()

    def test_extract_blocks_discards_remainder(self):
        rng = np.random.default_rng(5)
        seed = rng.integers(0, 2, size=8 + 4 - 1).astype(np.uint8)
        cfg = ExtractorConfig(8, 4, seed, 0.5)
        out = extract_blocks(np.ones(20, dtype=np.uint8), cfg)
        assert out.shape[0] == 8  # two full blocks of 8 in, 4 out each

    def test_seed_fingerprint_stable(self):
        seed = np.arange(11) % 2
        a = ExtractorConfig(8, 4, seed, 0.5).seed_fingerprint()
        b = ExtractorConfig(8, 4, seed.copy(), 0.5).seed_fingerprint()
        assert a == b and len(a) == 16
