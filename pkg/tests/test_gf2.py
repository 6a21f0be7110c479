import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wsdec.gf2 import (BinaryMatrix, BitVector, DimensionError, gf2_mat_vec, hamming_distance,
                       hamming_weight, vec_xor)


def bits(n):
    return st.lists(st.integers(0, 1), min_size=n, max_size=n)


def naive_distance(a, b):
    return sum(1 for x, y in zip(a, b) if x != y)


def padding_is_zero(v: BitVector) -> bool:
    tail = v.length % 8
    return not tail or (v.bits[-1] >> tail) == 0


def test_packing_is_lsb_first():
    v = BitVector.from_bits([1, 0, 0, 0, 0, 0, 0, 0, 0, 1])
    assert v.bits == bytes([0x01, 0x02])
    assert list(v) == [1, 0, 0, 0, 0, 0, 0, 0, 0, 1]
    assert v[9] == 1 and v[-1] == 1 and v[1] == 0


def test_nonzero_padding_rejected():
    with pytest.raises(ValueError):
        BitVector(3, bytes([0b1000]))
    with pytest.raises(DimensionError):
        BitVector(9, bytes([0]))


def test_mat_vec_zero_vector():
    M = BinaryMatrix.from_array(np.random.default_rng(0).integers(0, 2, (3, 11)))
    assert gf2_mat_vec(BitVector.zeros(3), M) == BitVector.zeros(11)


def test_mat_vec_identity():
    v = BitVector.from_bits([1, 0, 1, 1])
    assert gf2_mat_vec(v, BinaryMatrix.from_array(np.eye(4, dtype=np.uint8))) == v


def test_mat_vec_hand_example():
    M = BinaryMatrix.from_array([[1, 0, 1], [0, 1, 1]])
    assert list(gf2_mat_vec(BitVector.from_bits([1, 1]), M)) == [1, 1, 0]


def test_mat_vec_dimension_mismatch():
    M = BinaryMatrix.from_array([[1, 0, 1], [0, 1, 1]])
    with pytest.raises(DimensionError):
        gf2_mat_vec(BitVector.from_bits([1, 1, 0]), M)


def test_xor_examples():
    a = BitVector.from_bits([1, 0, 1])
    assert list(vec_xor(a, BitVector.from_bits([1, 1, 0]))) == [0, 1, 1]
    assert vec_xor(a, a) == BitVector.zeros(3)
    assert vec_xor(a, BitVector.zeros(3)) == a
    with pytest.raises(DimensionError):
        vec_xor(a, BitVector.zeros(4))


def test_weight_and_distance_basics():
    assert hamming_weight(BitVector.zeros(77)) == 0
    a = BitVector.from_bits([1, 1, 0, 1])
    assert hamming_distance(a, a) == 0
    with pytest.raises(DimensionError):
        hamming_distance(a, BitVector.zeros(5))


def test_distance_against_naive_loop():
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        n = int(rng.integers(1, 80))
        a, b = rng.integers(0, 2, n), rng.integers(0, 2, n)
        va, vb = BitVector.from_bits(a), BitVector.from_bits(b)
        d = hamming_distance(va, vb)
        assert d == naive_distance(a, b)
        assert d == hamming_weight(vec_xor(va, vb))


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_mat_vec_linearity(data):
    k = data.draw(st.integers(1, 24))
    n = data.draw(st.integers(1, 256))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    M = BinaryMatrix.from_array(rng.integers(0, 2, (k, n)))
    v1 = BitVector.from_bits(data.draw(bits(k)))
    v2 = BitVector.from_bits(data.draw(bits(k)))
    lhs = gf2_mat_vec(v1 ^ v2, M)
    assert lhs == gf2_mat_vec(v1, M) ^ gf2_mat_vec(v2, M)
    for v in (lhs, v1 ^ v2, gf2_mat_vec(v1, M)):
        assert padding_is_zero(v)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 70).flatmap(lambda n: st.tuples(bits(n), bits(n))))
def test_distance_is_weight_of_xor(pair):
    a, b = (BitVector.from_bits(x) for x in pair)
    assert hamming_distance(a, b) == hamming_weight(vec_xor(a, b)) == naive_distance(*pair)


def test_matrix_rows_and_product():
    A = np.array([[1, 1, 0], [0, 1, 1]], dtype=np.uint8)
    B = np.array([[1, 0], [1, 1], [0, 1]], dtype=np.uint8)
    P = BinaryMatrix.from_array(A) @ BinaryMatrix.from_array(B)
    assert P == BinaryMatrix.from_array((A.astype(int) @ B) % 2)
    with pytest.raises(DimensionError):
        BinaryMatrix(2, 3, (BitVector.zeros(3),))
    with pytest.raises(DimensionError):
        BinaryMatrix.from_array(A) @ BinaryMatrix.from_array(A)
