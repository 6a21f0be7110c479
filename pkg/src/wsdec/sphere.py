"""Weight spectrum enumeration and code-weight sphere sets.

The sphere ``S_r(0)`` holds every nonzero codeword of weight at most ``d_r``
(the r-th smallest nonzero weight).  Any codeword's neighborhood is obtained
by XOR-ing these members onto it.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterator

import numpy as np

from .codes import CaPolarCode
from .gf2 import BitVector, DimensionError, pack_bits, unpack_bits

DEFAULT_ENUM_CAP = 26
_LOW_BITS = 16


class EnumerationCapError(ValueError):
    pass


class SphereCacheError(Exception):
    """Base class for cache load failures."""


class CorruptHeaderError(SphereCacheError):
    pass


class TruncatedPayloadError(SphereCacheError):
    pass


class IntegrityError(SphereCacheError):
    pass


class FingerprintMismatchError(SphereCacheError):
    pass


@dataclass(frozen=True)
class WeightSpectrum:
    weights: tuple[int, ...]
    shell_counts: tuple[int, ...]
    total: int

    @property
    def L(self) -> int:
        """Index of the largest distinct weight."""
        return len(self.weights) - 1

    @property
    def d_min(self) -> int:
        return self.weights[1] if len(self.weights) > 1 else 0

    def cumulative(self) -> list[int]:
        """``|S_r(0)|`` for r = 1..L."""
        return np.cumsum(self.shell_counts[1:]).tolist()


def _check_cap(code: CaPolarCode, cap: int):
    if code.K > cap:
        raise EnumerationCapError(
            f"K = {code.K} needs 2^{code.K} codewords; the enumeration cap is K <= {cap}. "
            "Pass a larger cap explicitly if you really want this."
        )


def _packed_words(code: CaPolarCode) -> np.ndarray:
    """Generator rows as little-endian uint64 words, shape (K, W)."""
    nbytes = code.g_combined.packed.shape[1]
    W = (nbytes + 7) // 8
    buf = np.zeros((code.K, W * 8), dtype=np.uint8)
    buf[:, :nbytes] = code.g_combined.packed
    return buf.view("<u8")


def _iter_codeword_chunks(code: CaPolarCode) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(first_message_index, words)`` blocks covering all 2^K messages.

    Message index ``i`` encodes ``m_j = (i >> j) & 1``.
    """
    rows = _packed_words(code)
    low = min(code.K, _LOW_BITS)
    table = np.zeros((1 << low, rows.shape[1]), dtype="<u8")
    for j in range(low):
        table[1 << j: 2 << j] = table[: 1 << j] ^ rows[j]
    high_rows = rows[low:]
    base = np.zeros(rows.shape[1], dtype="<u8")
    for h in range(1 << (code.K - low)):
        if h:
            # Gray-code step: flip the row of the lowest changed bit
            base = base.copy()
            prev = (h - 1) ^ ((h - 1) >> 1)
            cur = h ^ (h >> 1)
            base ^= high_rows[(prev ^ cur).bit_length() - 1]
            offset = cur << low
        else:
            offset = 0
        yield offset, table ^ base


def _weights(words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(words).sum(axis=1, dtype=np.int64)


def enumerate_spectrum(code: CaPolarCode, cap: int = DEFAULT_ENUM_CAP) -> WeightSpectrum:
    _check_cap(code, cap)
    counts = np.zeros(code.N + 1, dtype=np.int64)
    for _, words in _iter_codeword_chunks(code):
        counts += np.bincount(_weights(words), minlength=code.N + 1)
    w = np.flatnonzero(counts)
    return WeightSpectrum(tuple(w.tolist()), tuple(counts[w].tolist()), 1 << code.K)


def sort_members(bits: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Order by weight, then lexicographically on (c_0, c_1, ...)."""
    keys = [bits[:, j] for j in range(bits.shape[1] - 1, -1, -1)] + [weights]
    return np.lexsort(keys)


@dataclass(frozen=True, eq=False)
class SphereSet:
    code_fingerprint: bytes
    N: int
    K: int
    radius_index: int
    weights_included: tuple[int, ...]
    packed: np.ndarray  # (member_count, ceil(N/8)) LSB-first rows
    weights: np.ndarray

    @property
    def member_count(self) -> int:
        return int(self.packed.shape[0])

    def __len__(self) -> int:
        return self.member_count

    @cached_property
    def bits(self) -> np.ndarray:
        b = unpack_bits(self.packed, self.N)
        b.setflags(write=False)
        return b

    @cached_property
    def support(self) -> np.ndarray:
        """Members as a float 0/1 matrix, used for correlation deltas."""
        s = self.bits.astype(np.float64)
        s.setflags(write=False)
        return s

    @property
    def members(self) -> list[tuple[BitVector, int]]:
        return [(BitVector(self.N, row.tobytes()), int(w)) for row, w in zip(self.packed, self.weights)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SphereSet):
            return NotImplemented
        return (self.code_fingerprint == other.code_fingerprint
                and (self.N, self.K, self.radius_index) == (other.N, other.K, other.radius_index)
                and self.weights_included == other.weights_included
                and np.array_equal(self.packed, other.packed)
                and np.array_equal(self.weights, other.weights))

    __hash__ = None


def build_sphere(code: CaPolarCode, r: int, spectrum: WeightSpectrum | None = None,
                 cap: int = DEFAULT_ENUM_CAP) -> SphereSet:
    _check_cap(code, cap)
    if spectrum is None:
        spectrum = enumerate_spectrum(code, cap)
    if not 1 <= r <= spectrum.L:
        raise ValueError(f"radius index must be in 1..{spectrum.L}, got {r}")
    d_r = spectrum.weights[r]
    picked_words, picked_w = [], []
    for _, words in _iter_codeword_chunks(code):
        w = _weights(words)
        keep = (w > 0) & (w <= d_r)
        if keep.any():
            picked_words.append(words[keep])
            picked_w.append(w[keep])
    words = np.concatenate(picked_words)
    weights = np.concatenate(picked_w)
    nbytes = (code.N + 7) // 8
    packed = np.ascontiguousarray(words.view(np.uint8)[:, :nbytes])
    bits = unpack_bits(packed, code.N)
    order = sort_members(bits, weights)
    packed = np.ascontiguousarray(packed[order])
    packed.setflags(write=False)
    weights = weights[order]
    weights.setflags(write=False)
    return SphereSet(code.fingerprint, code.N, code.K, r, tuple(spectrum.weights[1: r + 1]),
                     packed, weights)


def recenter(center: BitVector, sphere: SphereSet) -> Iterator[BitVector]:
    """Yield ``center XOR w`` for each member ``w`` in stored order."""
    if center.length != sphere.N:
        raise DimensionError(f"center has length {center.length}, sphere is over N = {sphere.N}")
    c = np.frombuffer(center.bits, dtype=np.uint8)
    for row in sphere.packed:
        yield BitVector(sphere.N, (row ^ c).tobytes())


# Cache file layout (little-endian):
#   "WSD1" | version u16 | N u32 | K u32 | radius u16 | count u64 | sha256[32]
#   | n_weights u16 | weights u16... | payload count*ceil(N/8) | crc32(payload) u32
MAGIC = b"WSD1"
FORMAT_VERSION = 1
_HEAD = struct.Struct("<4sHIIHQ32sH")


def sphere_to_bytes(sphere: SphereSet) -> bytes:
    head = _HEAD.pack(MAGIC, FORMAT_VERSION, sphere.N, sphere.K, sphere.radius_index,
                      sphere.member_count, sphere.code_fingerprint, len(sphere.weights_included))
    wts = struct.pack(f"<{len(sphere.weights_included)}H", *sphere.weights_included)
    payload = sphere.packed.tobytes()
    return head + wts + payload + struct.pack("<I", zlib.crc32(payload))


def save_sphere(sphere: SphereSet, path: str | Path) -> None:
    Path(path).write_bytes(sphere_to_bytes(sphere))


def sphere_from_bytes(data: bytes, expected_fingerprint: bytes | None = None) -> SphereSet:
    if len(data) < _HEAD.size:
        raise CorruptHeaderError("file shorter than the fixed header")
    magic, version, N, K, r, count, fp, nw = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise CorruptHeaderError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise CorruptHeaderError(f"unsupported format version {version}")
    if N == 0 or r == 0 or nw != r:
        raise CorruptHeaderError(f"inconsistent header (N={N}, radius={r}, weights={nw})")
    pos = _HEAD.size
    if len(data) < pos + 2 * nw:
        raise CorruptHeaderError("header truncated inside the weight list")
    weights_included = struct.unpack_from(f"<{nw}H", data, pos)
    pos += 2 * nw
    if list(weights_included) != sorted(set(weights_included)) or weights_included[0] == 0:
        raise CorruptHeaderError(f"weight list {weights_included} is not strictly increasing")
    nbytes = (N + 7) // 8
    end = pos + count * nbytes
    if len(data) < end + 4:
        raise TruncatedPayloadError(f"expected {end + 4} bytes, file has {len(data)}")
    if len(data) > end + 4:
        raise CorruptHeaderError(f"{len(data) - end - 4} trailing bytes after the checksum")
    payload = data[pos:end]
    (crc,) = struct.unpack_from("<I", data, end)
    if zlib.crc32(payload) != crc:
        raise IntegrityError("payload checksum mismatch")
    if expected_fingerprint is not None and fp != expected_fingerprint:
        raise FingerprintMismatchError("sphere cache was built for a different code")
    packed = np.frombuffer(payload, dtype=np.uint8).reshape(count, nbytes).copy()
    if count and N % 8 and (packed[:, -1] >> (N % 8)).any():
        raise IntegrityError("nonzero padding bits in payload")
    weights = np.bitwise_count(packed).sum(axis=1, dtype=np.int64)
    if count and not np.isin(weights, weights_included).all():
        raise IntegrityError("member weight outside the recorded shells")
    bits = unpack_bits(packed, N)
    if not np.array_equal(sort_members(bits, weights), np.arange(count)):
        raise IntegrityError("members are not in (weight, lexicographic) order")
    packed.setflags(write=False)
    weights.setflags(write=False)
    return SphereSet(fp, N, K, r, tuple(weights_included), packed, weights)


def load_sphere(path: str | Path, code: CaPolarCode | None = None) -> SphereSet:
    """Read a cache file; with ``code`` given, also require a matching fingerprint."""
    return sphere_from_bytes(Path(path).read_bytes(), code.fingerprint if code is not None else None)


def codebook(code: CaPolarCode, cap: int = DEFAULT_ENUM_CAP) -> np.ndarray:
    """All 2^K codewords as a (2^K, N) uint8 array indexed by message index."""
    _check_cap(code, cap)
    out = np.empty((1 << code.K, code.N), dtype=np.uint8)
    nbytes = (code.N + 7) // 8
    for offset, words in _iter_codeword_chunks(code):
        bits = unpack_bits(np.ascontiguousarray(words.view(np.uint8)[:, :nbytes]), code.N)
        out[offset: offset + len(words)] = bits
    return out


def message_bits(K: int) -> np.ndarray:
    """(2^K, K) array whose row i holds the bits of message index i."""
    idx = np.arange(1 << K, dtype=np.int64)
    return ((idx[:, None] >> np.arange(K)) & 1).astype(np.uint8)


__all__ = [
    "WeightSpectrum", "SphereSet", "enumerate_spectrum", "build_sphere", "recenter",
    "save_sphere", "load_sphere", "codebook", "message_bits", "EnumerationCapError",
    "SphereCacheError", "CorruptHeaderError", "TruncatedPayloadError", "IntegrityError",
    "FingerprintMismatchError", "pack_bits",
]
