"""Deterministic, counter-based random number generation.

All randomness in this package flows through the generator defined here so
that outputs are reproducible bit-for-bit from a 64-bit seed, independent of
numpy's global state and of how many values were drawn before.

The construction (documented in the README so it can be re-implemented):

    raw64(seed, i) = xs(mix(seed XOR mix(i * GAMMA + GAMMA2)))

where `mix` is the SplitMix64 finalizer and `xs` is one xorshift64* round.
Uniforms take the top 53 bits; normals come from the Box-Muller transform
applied to consecutive uniform pairs.
"""

from __future__ import annotations

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GAMMA = 0x9E3779B97F4A7C15
_GAMMA2 = 0xD1B54A32D192ED03
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_XS_MUL = np.uint64(0x2545F4914F6CDD1D)

_U53_SCALE = float(2.0**-53)


def _mix64(z: np.ndarray) -> np.ndarray:
    # SplitMix64 finalizer
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _xorshift_star(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(12))
    z = z ^ (z << np.uint64(25))
    z = z ^ (z >> np.uint64(27))
    return z * _XS_MUL


def raw64(seed: int, index: np.ndarray) -> np.ndarray:
    """Hash (seed, index) pairs to uniformly distributed uint64 values."""
    idx = np.asarray(index, dtype=np.uint64)
    z = idx * np.uint64(_GAMMA) + np.uint64(_GAMMA2)
    z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ _mix64(z)
    return _xorshift_star(_mix64(z))


def derive_seed(seed: int, tag: int) -> int:
    """Derive an independent child seed (e.g. one noise stream per frame)."""
    return int(raw64(seed, np.asarray([tag & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))[0])


def uniform01(seed: int, index: np.ndarray) -> np.ndarray:
    """Uniform doubles in [0, 1) addressed by sample index."""
    return np.asarray(raw64(seed, index) >> np.uint64(11), dtype=np.float64) * _U53_SCALE


def normal(seed: int, n: int) -> np.ndarray:
    """`n` standard-normal doubles for sample indices 0..n-1.

    Sample 2p and 2p+1 form a Box-Muller pair: u1 is forced into (0, 1] so
    log(u1) is finite, u2 supplies the angle; the pair yields (r*cos, r*sin).
    """
    if n <= 0:
        return np.zeros(0, dtype=np.float64)
    pairs = (n + 1) // 2
    idx = np.arange(2 * pairs, dtype=np.uint64)
    bits = raw64(seed, idx)
    u1 = (np.asarray(bits[0::2] >> np.uint64(11), dtype=np.float64) + 1.0) * _U53_SCALE
    u2 = np.asarray(bits[1::2] >> np.uint64(11), dtype=np.float64) * _U53_SCALE
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    out = np.empty(2 * pairs, dtype=np.float64)
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    return out[:n]


def lattice_uniform(seed: int, ys: np.ndarray, xs: np.ndarray, channel: int) -> np.ndarray:
    """Position-addressed uniform noise on the integer lattice.

    The value at (y, x, channel) depends only on the seed and the coordinates,
    so any padded or cropped evaluation of the same lattice agrees exactly.
    Coordinates must lie in [-65536, 65535].
    """
    y = np.asarray(ys, dtype=np.int64) + 65536
    x = np.asarray(xs, dtype=np.int64) + 65536
    if (y < 0).any() or (x < 0).any() or (y >= 1 << 17).any() or (x >= 1 << 17).any():
        raise ValueError("lattice coordinates out of supported range")
    idx = ((y.astype(np.uint64) << np.uint64(17)) | x.astype(np.uint64)) << np.uint64(3)
    idx |= np.uint64(channel & 0x7)
    return uniform01(seed, idx)
