"""Pauli strings with sign tracking.

An operator is stored as ``(-1)**negative * sigma(x, z)`` where
``sigma(x, z) = i**|x & z| X**x Z**z`` is the Hermitian Pauli string with the
given bits (``Y`` has both bits set). Bits are packed into ``uint64`` words.
"""
import re
from typing import Dict, Iterable, Mapping, Sequence, Tuple

import numpy as np

from floquetlab.compat import popcount
from floquetlab.gf2 import n_words, pack_bits, unpack_bits


class NonHermitianProductError(ValueError):
    """A product of Pauli operators carried an odd power of i."""


_LETTERS = {(False, False): "I", (True, False): "X", (True, True): "Y", (False, True): "Z"}
_BITS = {"X": (True, False), "Y": (True, True), "Z": (False, True)}
_LABEL = re.compile(r"^(?P<sign>[+-])(?P<body>I|(?:[XYZ]\d+)+)$")
_TERM = re.compile(r"([XYZ])(\d+)")


def phase_exponent(xs: np.ndarray, zs: np.ndarray, negatives: np.ndarray) -> int:
    """Power of i (mod 4) of the ordered product of stacked Pauli rows.

    ``xs`` and ``zs`` have shape ``(k, words)``. The product
    ``P_0 P_1 ... P_{k-1}`` equals ``i**e * sigma(X, Z)`` with ``X`` and ``Z``
    the XOR of the rows; this returns ``e``.
    """
    xs = np.asarray(xs, dtype=np.uint64)
    zs = np.asarray(zs, dtype=np.uint64)
    if xs.shape[0] == 0:
        return 0
    z_before = np.bitwise_xor.accumulate(zs, axis=0)
    z_before = np.concatenate([np.zeros_like(zs[:1]), z_before[:-1]], axis=0)
    x_total = np.bitwise_xor.reduce(xs, axis=0)
    z_total = np.bitwise_xor.reduce(zs, axis=0)
    e = (
        2 * int(np.count_nonzero(negatives))
        + int(popcount(xs & zs).sum())
        + 2 * int(popcount(xs & z_before).sum())
        - int(popcount(x_total & z_total).sum())
    )
    return e % 4


def pair_phase_exponent(x1, z1, r1, x2, z2, r2) -> np.ndarray:
    """Vectorized :func:`phase_exponent` for products ``P1 * P2`` of row pairs.

    Bit arrays broadcast over leading axes with words on the last axis.
    """
    e = (
        2 * (np.asarray(r1, dtype=np.int64) + np.asarray(r2, dtype=np.int64))
        + popcount(x1 & z1).sum(axis=-1)
        + popcount(x2 & z2).sum(axis=-1)
        + 2 * popcount(z1 & x2).sum(axis=-1)
        - popcount((x1 ^ x2) & (z1 ^ z2)).sum(axis=-1)
    )
    return np.mod(e, 4)


class PauliOperator:
    """Hermitian n-qubit Pauli string with sign ±1.

    Instances are immutable; the packed word arrays are read-only.

    Parameters
    ----------
    n : int
        Number of qubits.
    x, z : np.ndarray
        Packed ``uint64`` words of the X and Z components.
    negative : bool
        True for sign -1.
    """

    __slots__ = ("n", "x", "z", "negative")

    def __init__(self, n: int, x: np.ndarray, z: np.ndarray, negative: bool = False):
        if n < 1:
            raise ValueError(f"a Pauli operator needs at least one qubit, got n={n}")
        width = n_words(n)
        x = np.array(x, dtype=np.uint64).reshape(-1)
        z = np.array(z, dtype=np.uint64).reshape(-1)
        if x.shape != (width,) or z.shape != (width,):
            raise ValueError(f"expected {width} words for n={n}, got {x.shape} and {z.shape}")
        x.flags.writeable = False
        z.flags.writeable = False
        self.n = n
        self.x = x
        self.z = z
        self.negative = bool(negative)

    @classmethod
    def identity(cls, n: int) -> "PauliOperator":
        width = n_words(n)
        return cls(n, np.zeros(width, np.uint64), np.zeros(width, np.uint64))

    @classmethod
    def from_bits(cls, x_bits, z_bits, negative: bool = False) -> "PauliOperator":
        x_bits = np.asarray(x_bits, dtype=bool)
        z_bits = np.asarray(z_bits, dtype=bool)
        if x_bits.shape != z_bits.shape or x_bits.ndim != 1:
            raise ValueError(f"bit vectors must be 1-d of equal length, got {x_bits.shape}, {z_bits.shape}")
        return cls(x_bits.size, pack_bits(x_bits), pack_bits(z_bits), negative)

    @classmethod
    def from_sparse(cls, n: int, paulis: Mapping[int, str], negative: bool = False) -> "PauliOperator":
        """Build from a ``{qubit: "X" | "Y" | "Z"}`` mapping."""
        x_bits = np.zeros(n, dtype=bool)
        z_bits = np.zeros(n, dtype=bool)
        for qubit, letter in paulis.items():
            if not 0 <= qubit < n:
                raise ValueError(f"qubit {qubit} out of range for n={n}")
            try:
                x_bits[qubit], z_bits[qubit] = _BITS[letter]
            except KeyError:
                raise ValueError(f"unknown Pauli letter {letter!r}") from None
        return cls.from_bits(x_bits, z_bits, negative)

    @classmethod
    def from_label(cls, label: str, n: int) -> "PauliOperator":
        """Parse the textual form produced by ``str()``, e.g. ``"-X0Y3Z5"``.

        >>> str(PauliOperator.from_label("+X0Z2", 3))
        '+X0Z2'
        """
        match = _LABEL.match(label.strip())
        if match is None:
            raise ValueError(f"cannot parse Pauli label {label!r}")
        paulis: Dict[int, str] = {}
        body = match.group("body")
        if body != "I":
            for letter, index in _TERM.findall(body):
                qubit = int(index)
                if qubit in paulis:
                    raise ValueError(f"qubit {qubit} repeated in {label!r}")
                paulis[qubit] = letter
        return cls.from_sparse(n, paulis, negative=match.group("sign") == "-")

    @property
    def x_bits(self) -> np.ndarray:
        return unpack_bits(self.x, self.n)

    @property
    def z_bits(self) -> np.ndarray:
        return unpack_bits(self.z, self.n)

    @property
    def sign(self) -> int:
        return -1 if self.negative else 1

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(int(q) for q in np.flatnonzero(self.x_bits | self.z_bits))

    @property
    def weight(self) -> int:
        return int(popcount(self.x | self.z).sum())

    def is_identity(self) -> bool:
        return not (self.x.any() or self.z.any())

    def letters(self) -> Dict[int, str]:
        xb, zb = self.x_bits, self.z_bits
        return {q: _LETTERS[(bool(xb[q]), bool(zb[q]))] for q in self.support}

    def _check_size(self, other: "PauliOperator") -> None:
        if not isinstance(other, PauliOperator):
            raise TypeError(f"expected a PauliOperator, got {type(other).__name__}")
        if other.n != self.n:
            raise ValueError(f"size mismatch: {self.n} qubits vs {other.n} qubits")

    def commutes(self, other: "PauliOperator") -> bool:
        self._check_size(other)
        form = popcount(self.x & other.z).sum() + popcount(self.z & other.x).sum()
        return not (int(form) & 1)

    def product_with_phase(self, other: "PauliOperator") -> Tuple["PauliOperator", int]:
        """Return ``(sigma, e)`` with ``self * other == i**e * sigma``.

        ``sigma`` has sign +1; ``e`` is taken mod 4.
        """
        self._check_size(other)
        e = int(pair_phase_exponent(self.x, self.z, self.negative, other.x, other.z, other.negative))
        return PauliOperator(self.n, self.x ^ other.x, self.z ^ other.z), e

    def multiply(self, other: "PauliOperator") -> "PauliOperator":
        """Hermitian product ``self * other``.

        Raises
        ------
        NonHermitianProductError
            If the operands anticommute, so the product carries a factor of ±i.
        """
        sigma, e = self.product_with_phase(other)
        if e & 1:
            raise NonHermitianProductError(f"{self} * {other} = i^{e} {sigma} is not Hermitian")
        return PauliOperator(self.n, sigma.x, sigma.z, negative=e == 2)

    def __mul__(self, other: "PauliOperator") -> "PauliOperator":
        return self.multiply(other)

    def __neg__(self) -> "PauliOperator":
        return PauliOperator(self.n, self.x, self.z, not self.negative)

    def with_sign(self, negative: bool) -> "PauliOperator":
        return PauliOperator(self.n, self.x, self.z, negative)

    def restrict(self, region: Iterable[int]) -> "PauliOperator":
        """Zero all bits outside ``region``; the sign is kept."""
        mask = np.zeros(self.n, dtype=bool)
        for qubit in region:
            if not 0 <= qubit < self.n:
                raise ValueError(f"qubit {qubit} out of range for n={self.n}")
            mask[qubit] = True
        packed = pack_bits(mask)
        return PauliOperator(self.n, self.x & packed, self.z & packed, self.negative)

    def pad(self, n: int) -> "PauliOperator":
        """The same operator acting on a larger register of ``n`` qubits."""
        if n < self.n:
            raise ValueError(f"cannot pad {self.n} qubits down to {n}")
        width = n_words(n)
        x = np.zeros(width, np.uint64)
        z = np.zeros(width, np.uint64)
        x[: self.x.size] = self.x
        z[: self.z.size] = self.z
        return PauliOperator(n, x, z, self.negative)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliOperator):
            return NotImplemented
        return (
            self.n == other.n
            and self.negative == other.negative
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.z, other.z)
        )

    def __hash__(self) -> int:
        return hash((self.n, self.negative, self.x.tobytes(), self.z.tobytes()))

    def __str__(self) -> str:
        sign = "-" if self.negative else "+"
        body = "".join(f"{letter}{q}" for q, letter in self.letters().items())
        return sign + (body or "I")

    def __repr__(self) -> str:
        return f"PauliOperator({str(self)!r}, n={self.n})"


def commutes(a: PauliOperator, b: PauliOperator) -> bool:
    return a.commutes(b)


def multiply(a: PauliOperator, b: PauliOperator) -> PauliOperator:
    return a.multiply(b)


def restrict(p: PauliOperator, region: Iterable[int]) -> PauliOperator:
    return p.restrict(region)


def ordered_product(operators: Sequence[PauliOperator]) -> PauliOperator:
    """Hermitian product ``P_0 P_1 ... P_{k-1}`` of operators in the given order.

    Raises
    ------
    NonHermitianProductError
        If the ordered product carries an odd power of i.
    """
    if not operators:
        raise ValueError("ordered_product needs at least one operator")
    n = operators[0].n
    for op in operators[1:]:
        if op.n != n:
            raise ValueError(f"size mismatch: {n} qubits vs {op.n} qubits")
    xs = np.stack([op.x for op in operators])
    zs = np.stack([op.z for op in operators])
    negatives = np.array([op.negative for op in operators])
    e = phase_exponent(xs, zs, negatives)
    x = np.bitwise_xor.reduce(xs, axis=0)
    z = np.bitwise_xor.reduce(zs, axis=0)
    if e & 1:
        raise NonHermitianProductError(f"ordered product of {len(operators)} operators carries i^{e}")
    return PauliOperator(n, x, z, negative=e == 2)
