import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given

from floquetlab.gf2 import GF2Basis, gf2_rank, in_span, pack_bits, parity, unpack_bits


def dense_rank(bits):
    m = np.array(bits, dtype=np.uint8) % 2
    rank = 0
    rows, cols = m.shape
    for col in range(cols):
        pivot = next((r for r in range(rank, rows) if m[r, col]), None)
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        for r in range(rows):
            if r != rank and m[r, col]:
                m[r] ^= m[rank]
        rank += 1
    return rank


@st.composite
def bit_matrices(draw):
    rows = draw(st.integers(1, 12))
    cols = draw(st.integers(1, 150))
    flat = draw(st.lists(st.booleans(), min_size=rows * cols, max_size=rows * cols))
    return np.array(flat, dtype=bool).reshape(rows, cols)


@pytest.mark.parametrize(
    "bits, expected",
    [
        ([[1, 0], [0, 1]], 2),
        ([[1, 1], [1, 1]], 1),
        ([[0, 0, 0]], 0),
        ([[1, 1, 0], [0, 1, 1], [1, 0, 1]], 2),  # third row is the sum
    ],
)
def test_gf2_rank(bits, expected):
    assert gf2_rank(pack_bits(np.array(bits, dtype=bool))) == expected


@given(bit_matrices())
def test_gf2_rank_hypothesis(bits):
    assert gf2_rank(pack_bits(bits)) == dense_rank(bits)


@given(bit_matrices())
def test_pack_unpack(bits):
    assert np.array_equal(unpack_bits(pack_bits(bits), bits.shape[1]), bits)


def test_parity():
    words = pack_bits(np.array([[1, 1, 0, 1], [1, 1, 0, 0]], dtype=bool))
    assert parity(words).tolist() == [True, False]


@given(bit_matrices())
def test_basis_membership(bits):
    rows = pack_bits(bits)
    basis = GF2Basis(rows.shape[1])
    added = basis.extend(rows)
    assert added == dense_rank(bits)
    combo = np.bitwise_xor.reduce(rows[::2], axis=0)
    assert basis.contains(combo)
    assert in_span(combo, rows)


def test_basis_rejects_outside_vector():
    basis = GF2Basis(1)
    basis.add(pack_bits(np.array([1, 1, 0], dtype=bool)))
    basis.add(pack_bits(np.array([0, 1, 1], dtype=bool)))
    assert basis.contains(pack_bits(np.array([1, 0, 1], dtype=bool)))
    assert not basis.contains(pack_bits(np.array([1, 0, 0], dtype=bool)))
    assert not in_span(pack_bits(np.array([1, 0, 0], dtype=bool)), np.empty((0, 1), dtype=np.uint64))


def test_basis_width_checked():
    with pytest.raises(ValueError, match="expected 2 words"):
        GF2Basis(2).add(np.zeros(1, dtype=np.uint64))
