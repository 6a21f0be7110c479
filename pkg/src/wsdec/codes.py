"""CRC-aided polar code construction.

CRC convention: systematic append ``v = [m | p]``, message bit ``m_0`` is the
coefficient of the highest power of ``m(x)``, zero initial register, no
reflection, no final XOR.  The polar transform is the n-fold Kronecker power
of ``[[1, 0], [1, 1]]`` without bit-reversal; information positions come from
the 5G NR reliability sequence.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from importlib import resources
from typing import Sequence

import numpy as np

from .gf2 import BinaryMatrix, BitVector, DimensionError, gf2_mat_vec


class CodeConstructionError(ValueError):
    pass


# g(x) = 1 + x^5 + x^9 + x^10 + x^11, the polynomial used for the CA-polar runs.
CRC11_POLY = 0xE21


@lru_cache(maxsize=None)
def nr_reliability_sequence() -> tuple[int, ...]:
    """Polar sequence Q_0^{1023} in ascending reliability order."""
    text = resources.files("wsdec.data").joinpath("nr_polar_sequence.txt").read_text()
    return tuple(int(s) for s in text.split("\n") if s.strip() and not s.startswith("#"))


@dataclass(frozen=True)
class CrcSpec:
    """CRC generator polynomial, coefficients in ascending degree."""

    coefficients: tuple[int, ...]

    def __post_init__(self):
        c = tuple(int(b) for b in self.coefficients)
        object.__setattr__(self, "coefficients", c)
        if len(c) < 2 or any(b not in (0, 1) for b in c):
            raise CodeConstructionError(f"bad CRC coefficients {c!r}")
        if c[0] != 1 or c[-1] != 1:
            raise CodeConstructionError("CRC polynomial needs nonzero x^0 and leading coefficients")

    @property
    def k_crc(self) -> int:
        return len(self.coefficients) - 1

    @classmethod
    def from_int(cls, poly: int) -> CrcSpec:
        """Bit ``i`` of ``poly`` is the coefficient of ``x^i`` (0xE21 is CRC-11)."""
        if poly < 3:
            raise CodeConstructionError(f"polynomial {poly:#x} has degree < 1")
        return cls(tuple((poly >> i) & 1 for i in range(poly.bit_length())))

    def to_int(self) -> int:
        return sum(b << i for i, b in enumerate(self.coefficients))


def crc_remainder(msg: Sequence[int], spec: CrcSpec) -> np.ndarray:
    """Parity bits of ``msg`` by polynomial long division (MSB first)."""
    kc = spec.k_crc
    g_desc = spec.coefficients[::-1]
    reg = [int(b) for b in msg] + [0] * kc
    for j in range(len(msg)):
        if reg[j]:
            for t in range(kc + 1):
                reg[j + t] ^= g_desc[t]
    return np.array(reg[len(msg):], dtype=np.uint8)


def build_crc_matrices(spec: CrcSpec, K: int) -> tuple[BinaryMatrix, BinaryMatrix]:
    """Systematic generator ``[I | P]`` and parity check ``[P^T | I]``."""
    if K < 1:
        raise CodeConstructionError("message length must be at least 1")
    kc = spec.k_crc
    P = np.array([crc_remainder(np.eye(K, dtype=np.uint8)[i], spec) for i in range(K)],
                 dtype=np.uint8).reshape(K, kc)
    g = np.hstack([np.eye(K, dtype=np.uint8), P])
    h = np.hstack([P.T, np.eye(kc, dtype=np.uint8)])
    return BinaryMatrix.from_array(g), BinaryMatrix.from_array(h)


def _check_pow2(N: int) -> int:
    n = N.bit_length() - 1
    if N < 1 or (1 << n) != N:
        raise CodeConstructionError(f"blocklength {N} is not a power of two")
    return n


def select_info_set(N: int, K_total: int, seq: Sequence[int] | None = None) -> tuple[int, ...]:
    """The ``K_total`` most reliable positions below ``N``, sorted ascending."""
    if seq is None:
        seq = nr_reliability_sequence()
    _check_pow2(N)
    if K_total > N:
        raise ValueError(f"cannot place {K_total} information bits in {N} positions")
    if K_total < 0:
        raise ValueError("negative information length")
    if N > max(seq) + 1:
        raise ValueError(f"reliability sequence only covers N <= {max(seq) + 1}")
    filtered = [i for i in seq if i < N]
    return tuple(sorted(filtered[len(filtered) - K_total:]))


def kronecker_kernel(N: int) -> np.ndarray:
    n = _check_pow2(N)
    F = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    G = np.ones((1, 1), dtype=np.uint8)
    for _ in range(n):
        G = np.kron(G, F)
    return G


@dataclass(frozen=True)
class PolarSpec:
    N: int
    info_set: tuple[int, ...]
    reliability_sequence: tuple[int, ...] = field(default=None, repr=False)

    def __post_init__(self):
        _check_pow2(self.N)
        info = tuple(sorted(int(i) for i in self.info_set))
        if len(set(info)) != len(info) or any(not 0 <= i < self.N for i in info):
            raise CodeConstructionError("info set must hold distinct indices below N")
        object.__setattr__(self, "info_set", info)
        if self.reliability_sequence is None:
            object.__setattr__(self, "reliability_sequence", nr_reliability_sequence())


def polar_generator(spec: PolarSpec) -> BinaryMatrix:
    return BinaryMatrix.from_array(kronecker_kernel(spec.N)[list(spec.info_set)])


@dataclass(frozen=True, eq=False)
class CaPolarCode:
    N: int
    K: int
    crc: CrcSpec
    g_crc: BinaryMatrix
    h_crc: BinaryMatrix
    g_polar: BinaryMatrix
    g_combined: BinaryMatrix
    polar_spec: PolarSpec

    @property
    def k_crc(self) -> int:
        return self.crc.k_crc

    @property
    def kv(self) -> int:
        """Length of the CRC-encoded message ``v``."""
        return self.K + self.crc.k_crc

    @property
    def rate(self) -> float:
        return self.K / self.N

    @property
    def info_set(self) -> tuple[int, ...]:
        return self.polar_spec.info_set

    @cached_property
    def fingerprint(self) -> bytes:
        """SHA-256 of the row-major packed combined generator."""
        return hashlib.sha256(self.g_combined.packed.tobytes()).digest()

    @cached_property
    def frozen_mask(self) -> np.ndarray:
        mask = np.ones(self.N, dtype=bool)
        mask[list(self.info_set)] = False
        mask.setflags(write=False)
        return mask

    # Array paths used by the batched decoders and the simulator.

    def encode_array(self, m: np.ndarray) -> np.ndarray:
        """Encode rows of a (..., K) 0/1 array to (..., N)."""
        return (np.asarray(m, dtype=np.int64) @ self.g_combined.array.astype(np.int64) & 1).astype(np.uint8)

    def v_to_codeword(self, v: np.ndarray) -> np.ndarray:
        return (np.asarray(v, dtype=np.int64) @ self.g_polar.array.astype(np.int64) & 1).astype(np.uint8)

    @cached_property
    def kernel(self) -> np.ndarray:
        k = kronecker_kernel(self.N).astype(np.int64)
        k.setflags(write=False)
        return k

    def codeword_to_v(self, c: np.ndarray) -> np.ndarray:
        """Invert the polar transform (an involution over GF(2)) and read the info positions."""
        u = np.asarray(c, dtype=np.int64) @ self.kernel & 1
        return u[..., list(self.info_set)].astype(np.uint8)

    def crc_syndrome(self, v: np.ndarray) -> np.ndarray:
        return (np.asarray(v, dtype=np.int64) @ self.h_crc.array.T.astype(np.int64) & 1).astype(np.uint8)

    def crc_ok(self, v: np.ndarray) -> np.ndarray:
        return ~self.crc_syndrome(v).any(axis=-1)

    def describe(self) -> dict:
        return {"N": self.N, "K": self.K, "crc_poly": hex(self.crc.to_int()),
                "info_set": list(self.info_set), "fingerprint": self.fingerprint.hex()}


def build_ca_polar(N: int, K: int, crc: CrcSpec | int = CRC11_POLY,
                   seq: Sequence[int] | None = None) -> CaPolarCode:
    if isinstance(crc, int):
        crc = CrcSpec.from_int(crc)
    _check_pow2(N)
    if K < 1 or K + crc.k_crc > N:
        raise CodeConstructionError(f"K + K_crc = {K + crc.k_crc} does not fit in N = {N}")
    seq = tuple(seq) if seq is not None else nr_reliability_sequence()
    g_crc, h_crc = build_crc_matrices(crc, K)
    pspec = PolarSpec(N, select_info_set(N, K + crc.k_crc, seq), seq)
    g_polar = polar_generator(pspec)
    return CaPolarCode(N, K, crc, g_crc, h_crc, g_polar, g_crc @ g_polar, pspec)


def _gf2_pivots(g: np.ndarray) -> tuple[list[int], np.ndarray]:
    """Pivot columns of a full-row-rank ``g`` and the inverse of ``g[:, pivots]``."""
    k, n = g.shape
    a = np.concatenate([g.astype(np.uint8) & 1, np.eye(k, dtype=np.uint8)], axis=1)
    pivots, row = [], 0
    for col in range(n):
        hit = np.flatnonzero(a[row:, col])
        if hit.size == 0:
            continue
        r = row + hit[0]
        a[[row, r]] = a[[r, row]]
        others = np.flatnonzero(a[:, col])
        others = others[others != row]
        a[others] ^= a[row]
        pivots.append(col)
        row += 1
        if row == k:
            break
    if row < k:
        raise CodeConstructionError("generator matrix does not have full row rank")
    # rows of a now hold E @ g with E @ g[:, pivots] = I, so E is the inverse we need
    return pivots, a[:, n:]


@dataclass(frozen=True, eq=False)
class LinearCode:
    """A plain binary linear code given by its generator, no CRC.

    Shares the interface the decoders, sphere builder and WSD rely on, so small
    arbitrary codes can be used as exhaustive test beds.  ``v`` is the message
    itself and every ``v`` passes the (empty) check.
    """

    N: int
    K: int
    g_combined: BinaryMatrix

    @classmethod
    def from_array(cls, g) -> LinearCode:
        m = BinaryMatrix.from_array(g)
        code = cls(m.cols, m.rows, m)
        code._pivots  # rank check up front
        return code

    @classmethod
    def random(cls, N: int, K: int, rng: np.random.Generator) -> LinearCode:
        while True:
            g = rng.integers(0, 2, (K, N), dtype=np.uint8)
            try:
                return cls.from_array(g)
            except CodeConstructionError:
                continue

    k_crc = 0

    @property
    def kv(self) -> int:
        return self.K

    @property
    def rate(self) -> float:
        return self.K / self.N

    @cached_property
    def g_crc(self) -> BinaryMatrix:
        return BinaryMatrix.from_array(np.eye(self.K, dtype=np.uint8))

    @cached_property
    def fingerprint(self) -> bytes:
        return hashlib.sha256(self.g_combined.packed.tobytes()).digest()

    @cached_property
    def _pivots(self) -> tuple[list[int], np.ndarray]:
        return _gf2_pivots(self.g_combined.array)

    def encode_array(self, m: np.ndarray) -> np.ndarray:
        return (np.asarray(m, dtype=np.int64) @ self.g_combined.array.astype(np.int64) & 1).astype(np.uint8)

    def codeword_to_v(self, c: np.ndarray) -> np.ndarray:
        """Message of a codeword, read off an information set."""
        piv, inv = self._pivots
        c = np.asarray(c, dtype=np.int64)
        return (c[..., piv] @ inv.astype(np.int64) & 1).astype(np.uint8)

    def crc_ok(self, v: np.ndarray) -> np.ndarray:
        return np.ones(np.asarray(v).shape[:-1], dtype=bool)

    def describe(self) -> dict:
        return {"N": self.N, "K": self.K, "fingerprint": self.fingerprint.hex()}


def _expect_len(v: BitVector, n: int, what: str):
    if v.length != n:
        raise DimensionError(f"{what} must have length {n}, got {v.length}")


def encode(m: BitVector, code: CaPolarCode) -> BitVector:
    _expect_len(m, code.K, "message")
    return gf2_mat_vec(m, code.g_combined)


def crc_encode(m: BitVector, code: CaPolarCode) -> BitVector:
    _expect_len(m, code.K, "message")
    return gf2_mat_vec(m, code.g_crc)


def crc_check(v: BitVector, code: CaPolarCode) -> bool:
    _expect_len(v, code.kv, "CRC word")
    return bool(code.crc_ok(v.to_array()))


def extract_message(v: BitVector, code: CaPolarCode) -> BitVector:
    _expect_len(v, code.kv, "CRC word")
    return BitVector.from_bits(v.to_array()[: code.K])
