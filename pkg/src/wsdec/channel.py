"""BPSK over AWGN: modulation, SNR conversion, noise and LLRs.

Noise is drawn with the Box-Muller transform from uniform doubles built out of
raw 64-bit Philox output, so a seed pins the noise bit-exactly regardless of
the numpy version's default normal sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gf2 import BitVector

SNR_MODES = ("ebn0", "esn0")


@dataclass(frozen=True)
class SnrSpec:
    mode: str
    value_db: float

    def __post_init__(self):
        mode = self.mode.lower()
        if mode not in SNR_MODES:
            raise ValueError(f"SNR mode must be one of {SNR_MODES}, got {self.mode!r}")
        if not math.isfinite(self.value_db):
            raise ValueError("SNR must be finite")
        object.__setattr__(self, "mode", mode)


@dataclass(frozen=True)
class NoiseModel:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def variance(self) -> float:
        return self.sigma ** 2


def bpsk_modulate(c: BitVector | np.ndarray) -> np.ndarray:
    bits = c.to_array() if isinstance(c, BitVector) else np.asarray(c)
    return 1.0 - 2.0 * bits.astype(np.float64)


def snr_to_sigma(spec: SnrSpec, rate: float = 1.0) -> NoiseModel:
    """Eb/N0 uses ``sigma^2 = 1 / (2 R 10^(dB/10))``; Es/N0 ignores the rate."""
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate}")
    lin = 10.0 ** (spec.value_db / 10.0)
    if spec.mode == "ebn0":
        var = 1.0 / (2.0 * rate * lin)
    else:
        var = 1.0 / (2.0 * lin)
    return NoiseModel(math.sqrt(var))


def uniform_from_raw(raw: np.ndarray) -> np.ndarray:
    """Map raw uint64 words to doubles in [0, 1) using the top 53 bits."""
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def standard_normal(rng: np.random.Generator, n: int) -> np.ndarray:
    """Box-Muller normals from ``rng``'s raw bit stream."""
    pairs = (n + 1) // 2
    raw = rng.bit_generator.random_raw(2 * pairs)
    u = uniform_from_raw(np.asarray(raw, dtype=np.uint64))
    u1 = 1.0 - u[:pairs]  # (0, 1], keeps log finite
    u2 = u[pairs:]
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:n]


def awgn_transmit(x: np.ndarray, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x + noise.sigma * standard_normal(rng, x.size).reshape(x.shape)


def llr(y: np.ndarray, noise: NoiseModel) -> np.ndarray:
    """``log P(y|+1) / P(y|-1) = 2 y / sigma^2``."""
    return 2.0 * np.asarray(y, dtype=np.float64) / noise.variance


def squared_distance(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    d = np.asarray(y, dtype=np.float64) - x
    return np.einsum("...i,...i->...", d, d)
