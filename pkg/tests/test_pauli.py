import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import assume, given

from floquetlab.pauli import NonHermitianProductError, PauliOperator, ordered_product

from . import dense


def P(label, n):
    return PauliOperator.from_label(label, n)


@st.composite
def paulis(draw, n=None):
    if n is None:
        n = draw(st.integers(1, 5))
    letters = draw(st.lists(st.sampled_from("IXYZ"), min_size=n, max_size=n))
    negative = draw(st.booleans())
    sparse = {q: letter for q, letter in enumerate(letters) if letter != "I"}
    return PauliOperator.from_sparse(n, sparse, negative)


@st.composite
def pauli_tuples(draw, size=2):
    n = draw(st.integers(1, 5))
    return tuple(draw(paulis(n)) for _ in range(size))


@pytest.mark.parametrize(
    "a, b, n, expected",
    [
        ("+X0", "+Z0", 1, False),  # anticommuting pair
        ("+X0", "+X0", 1, True),  # self
        ("+X0X1", "+Z0Z1", 2, True),  # two sign flips cancel
        ("+Y0", "-Y0", 1, True),
        ("+X0Y1Z2", "+Z0Z1Z2", 3, True),
        ("+X0Y1Z2", "+Z0", 3, False),
    ],
)
def test_commutes(a, b, n, expected):
    assert P(a, n).commutes(P(b, n)) is expected


def test_commutes_matches_dense_on_two_qubits():
    a, b = P("+X0X1", 2), P("+Z0Z1", 2)
    A, B = dense.pauli_matrix(a), dense.pauli_matrix(b)
    assert np.allclose(A @ B, B @ A)


@given(pauli_tuples())
def test_commutes_hypothesis(pair):
    a, b = pair
    A, B = dense.pauli_matrix(a), dense.pauli_matrix(b)
    assert a.commutes(b) == np.allclose(A @ B, B @ A)


@given(pauli_tuples())
def test_product_with_phase_hypothesis(pair):
    a, b = pair
    sigma, e = a.product_with_phase(b)
    assert not sigma.negative
    expected = dense.pauli_matrix(a) @ dense.pauli_matrix(b)
    assert np.allclose(expected, 1j**e * dense.pauli_matrix(sigma))


def test_x_times_z_tracks_phase():
    x, z = P("+X0", 1), P("+Z0", 1)
    sigma, e = x.product_with_phase(z)
    assert sigma.x_bits.tolist() == [True]
    assert sigma.z_bits.tolist() == [True]
    assert e == 3  # XZ = -iY
    with pytest.raises(NonHermitianProductError, match="not Hermitian"):
        x.multiply(z)


@given(paulis())
def test_square_is_identity(p):
    square = p.multiply(p)
    assert square.is_identity()
    assert square.sign == 1
    assert square == PauliOperator.identity(p.n)


@given(pauli_tuples(size=3))
def test_multiply_associative(triple):
    a, b, c = triple
    assume(a.commutes(b) and b.commutes(c) and a.commutes(c))
    assert a.multiply(b.multiply(c)) == a.multiply(b).multiply(c)


@given(pauli_tuples(size=4))
def test_ordered_product_matches_dense(ops):
    expected = np.eye(2 ** ops[0].n, dtype=complex)
    for op in ops:
        expected = expected @ dense.pauli_matrix(op)
    hermitian = np.allclose(expected, expected.conj().T)
    if hermitian:
        assert np.allclose(dense.pauli_matrix(ordered_product(ops)), expected)
    else:
        with pytest.raises(NonHermitianProductError):
            ordered_product(ops)


@pytest.mark.parametrize(
    "label, region, expected",
    [
        ("+X0Z1", {0}, "+X0"),
        ("-X0Y1Z2", {0, 1, 2}, "-X0Y1Z2"),  # full set
        ("+X0Y1Z2", set(), "+I"),  # empty region
        ("-Y1Z2", {0, 2}, "-Z2"),  # sign preserved
    ],
)
def test_restrict(label, region, expected):
    assert str(P(label, 3).restrict(region)) == expected


def test_restrict_out_of_range():
    with pytest.raises(ValueError, match="out of range"):
        P("+X0", 2).restrict({2})


@pytest.mark.parametrize("label", ["+I", "-X0", "+X0Y3Z5", "-Y2Z4"])
def test_label_round_trip(label):
    assert str(PauliOperator.from_label(label, 6)) == label


@pytest.mark.parametrize("label", ["X0", "+Q1", "+X0X0", "+", "+X"])
def test_label_invalid(label):
    with pytest.raises(ValueError):
        PauliOperator.from_label(label, 3)


def test_size_mismatch():
    with pytest.raises(ValueError, match="size mismatch"):
        P("+X0", 1).commutes(P("+X0", 2))
    with pytest.raises(ValueError, match="size mismatch"):
        P("+X0", 1).multiply(P("+X0", 2))


def test_identity_and_padding():
    identity = PauliOperator.identity(70)
    assert identity.is_identity() and identity.sign == 1
    p = P("-X3Y65", 70).pad(130)
    assert p.n == 130
    assert str(p) == "-X3Y65"
    assert p.weight == 2
    assert p.support == (3, 65)


def test_operators_are_immutable():
    p = P("+X0", 1)
    with pytest.raises(ValueError):
        p.x[0] = 0
