"""Bit-packed GF(2) vectors and matrices.

Bits are packed LSB-first: bit ``i`` lives in byte ``i // 8`` at position
``i % 8``.  Padding bits past ``length`` are always zero, so two vectors are
equal iff their packed bytes are equal.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class DimensionError(ValueError):
    """Operand shapes do not agree."""


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a 0/1 array along its last axis into LSB-first bytes."""
    return np.packbits(np.asarray(bits, dtype=np.uint8), axis=-1, bitorder="little")


def unpack_bits(packed: np.ndarray, length: int) -> np.ndarray:
    return np.unpackbits(packed, axis=-1, count=length, bitorder="little")


@dataclass(frozen=True)
class BitVector:
    length: int
    bits: bytes

    def __post_init__(self):
        if self.length < 0:
            raise DimensionError("length must be nonnegative")
        if len(self.bits) != (self.length + 7) // 8:
            raise DimensionError(
                f"{len(self.bits)} bytes cannot hold exactly {self.length} bits"
            )
        tail = self.length % 8
        if tail and self.bits[-1] >> tail:
            raise ValueError("padding bits beyond length must be zero")

    @classmethod
    def from_bits(cls, bits: Iterable[int] | np.ndarray) -> BitVector:
        arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits)
        arr = arr.astype(np.uint8).ravel()
        if arr.size and arr.max() > 1:
            raise ValueError("bits must be 0 or 1")
        return cls(int(arr.size), pack_bits(arr).tobytes())

    @classmethod
    def zeros(cls, length: int) -> BitVector:
        return cls(length, bytes((length + 7) // 8))

    def to_array(self) -> np.ndarray:
        """Unpacked uint8 array of the bits."""
        return unpack_bits(np.frombuffer(self.bits, dtype=np.uint8), self.length)

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i: int) -> int:
        if not -self.length <= i < self.length:
            raise IndexError(i)
        i %= self.length
        return (self.bits[i >> 3] >> (i & 7)) & 1

    def __iter__(self):
        return iter(self.to_array().tolist())

    def __xor__(self, other: BitVector) -> BitVector:
        return vec_xor(self, other)

    def __repr__(self) -> str:
        s = "".join(map(str, self.to_array()))
        return f"BitVector({s!r})" if self.length <= 64 else f"BitVector(len={self.length})"


@dataclass(frozen=True, eq=False)
class BinaryMatrix:
    rows: int
    cols: int
    row_data: tuple[BitVector, ...]

    def __post_init__(self):
        if len(self.row_data) != self.rows:
            raise DimensionError(f"expected {self.rows} rows, got {len(self.row_data)}")
        for r in self.row_data:
            if r.length != self.cols:
                raise DimensionError(f"row of length {r.length} in a {self.cols}-column matrix")

    @classmethod
    def from_array(cls, a: np.ndarray | Sequence[Sequence[int]]) -> BinaryMatrix:
        a = np.asarray(a, dtype=np.uint8)
        if a.ndim != 2:
            raise DimensionError("expected a 2-D array")
        if a.size and a.max() > 1:
            raise ValueError("entries must be 0 or 1")
        packed = pack_bits(a)
        rows = tuple(BitVector(a.shape[1], row.tobytes()) for row in packed)
        return cls(a.shape[0], a.shape[1], rows)

    @cached_property
    def packed(self) -> np.ndarray:
        """Row-major packed bytes, shape (rows, ceil(cols/8))."""
        nbytes = (self.cols + 7) // 8
        buf = b"".join(r.bits for r in self.row_data)
        return np.frombuffer(buf, dtype=np.uint8).reshape(self.rows, nbytes)

    @cached_property
    def array(self) -> np.ndarray:
        """Unpacked (rows, cols) uint8 view; read-only."""
        a = unpack_bits(self.packed, self.cols)
        a.setflags(write=False)
        return a

    def to_array(self) -> np.ndarray:
        return self.array.copy()

    @property
    def T(self) -> BinaryMatrix:
        return BinaryMatrix.from_array(self.array.T)

    def __matmul__(self, other: BinaryMatrix) -> BinaryMatrix:
        if self.cols != other.rows:
            raise DimensionError(f"cannot multiply {self.rows}x{self.cols} by {other.rows}x{other.cols}")
        prod = (self.array.astype(np.int64) @ other.array.astype(np.int64)) & 1
        return BinaryMatrix.from_array(prod)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMatrix):
            return NotImplemented
        return (self.rows, self.cols) == (other.rows, other.cols) and self.row_data == other.row_data

    def __hash__(self) -> int:
        return hash((self.rows, self.cols, self.row_data))

    def is_zero(self) -> bool:
        return not self.packed.any()


def gf2_mat_vec(v: BitVector, M: BinaryMatrix) -> BitVector:
    """Row vector times matrix over GF(2): XOR of the rows picked by ``v``."""
    if v.length != M.rows:
        raise DimensionError(f"vector of length {v.length} against {M.rows} matrix rows")
    sel = v.to_array().astype(bool)
    if not sel.any():
        return BitVector.zeros(M.cols)
    out = np.bitwise_xor.reduce(M.packed[sel], axis=0)
    return BitVector(M.cols, out.tobytes())


def vec_xor(a: BitVector, b: BitVector) -> BitVector:
    if a.length != b.length:
        raise DimensionError(f"length mismatch: {a.length} vs {b.length}")
    x = np.frombuffer(a.bits, dtype=np.uint8) ^ np.frombuffer(b.bits, dtype=np.uint8)
    return BitVector(a.length, x.tobytes())


def hamming_weight(v: BitVector) -> int:
    return int(np.bitwise_count(np.frombuffer(v.bits, dtype=np.uint8)).sum())


def hamming_distance(a: BitVector, b: BitVector) -> int:
    return hamming_weight(vec_xor(a, b))


def popcount_rows(packed: np.ndarray) -> np.ndarray:
    """Hamming weight of each row of a packed uint8 array."""
    return np.bitwise_count(packed).sum(axis=-1, dtype=np.int64)
