"""Destabilizer/stabilizer tableau simulation of Clifford circuits.

Rows ``0..n-1`` hold destabilizers and rows ``n..2n-1`` stabilizers, each as
packed X/Z words plus a sign bit, following the Aaronson-Gottesman layout.
Gates act column-wise; measurements of arbitrary Pauli strings act directly
on the rows.
"""
import logging
from typing import Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np

from floquetlab.compat import popcount
from floquetlab.gf2 import gf2_rank, n_words, pack_bits, unpack_bits
from floquetlab.pauli import PauliOperator, pair_phase_exponent, phase_exponent
from floquetlab.rng import SeedLike, as_generator

logger = logging.getLogger(__name__)

_ONE = np.uint64(1)

SINGLE_QUBIT_GATES = ("H", "S", "S_DAG", "X", "Y", "Z")
TWO_QUBIT_GATES = ("CX", "CY", "CZ")
_INVERSES = {"S": "S_DAG", "S_DAG": "S"}


class Gate(NamedTuple):
    """A named Clifford gate and the qubits it acts on.

    Attributes
    ----------
    name : str
        One of ``H, S, S_DAG, X, Y, Z, CX, CY, CZ``.
    targets : tuple of int
        Qubit indices; for controlled gates the control comes first.
    """

    name: str
    targets: Tuple[int, ...]


class MeasurementResult(NamedTuple):
    """Outcome of a Pauli measurement.

    Attributes
    ----------
    outcome : int
        +1 or -1.
    deterministic : bool
        True if the measured operator was already in the stabilizer group.
    """

    outcome: int
    deterministic: bool


def invert_circuit(gates: Sequence[Gate]) -> List[Gate]:
    return [Gate(_INVERSES.get(g.name, g.name), g.targets) for g in reversed(gates)]


def symplectic_form(a: np.ndarray, b: np.ndarray) -> int:
    """Symplectic product of two unpacked ``(x | z)`` bit vectors."""
    k = a.size // 2
    return int(np.count_nonzero(a[:k] & b[k:]) + np.count_nonzero(a[k:] & b[:k])) & 1


def random_symplectic(k: int, rng: SeedLike) -> np.ndarray:
    """Uniformly random element of Sp(2k, GF(2)).

    Row ``j`` is the image of ``X_j`` and row ``k + j`` the image of ``Z_j``,
    each as ``(x bits | z bits)``. Pairs are drawn one at a time from the
    symplectic complement of the pairs already chosen.
    """
    rng = as_generator(rng)
    pairs: List[Tuple[np.ndarray, np.ndarray]] = []

    def project(r: np.ndarray) -> np.ndarray:
        for v, w in pairs:
            if symplectic_form(r, w):
                r = r ^ v
            if symplectic_form(r, v):
                r = r ^ w
        return r

    for _ in range(k):
        while True:
            v = project(rng.integers(0, 2, 2 * k).astype(bool))
            if v.any():
                break
        while True:
            w = project(rng.integers(0, 2, 2 * k).astype(bool))
            if symplectic_form(v, w):
                break
        pairs.append((v, w))
    images = np.zeros((2 * k, 2 * k), dtype=bool)
    for j, (v, w) in enumerate(pairs):
        images[j] = v
        images[k + j] = w
    return images


_NIBBLE_POPCOUNT = np.array([bin(i).count("1") for i in range(16)], dtype=np.int64)


def _clifford_table(images: np.ndarray, signs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Action of a 4-qubit Clifford on all 256 local Pauli patterns.

    A pattern packs the X bits in its low nibble and the Z bits in its high
    nibble. Returns the image X nibble, Z nibble and a sign-flip flag.
    """
    weights = 1 << np.arange(4)
    gen_x = (images[:, :4] * weights).sum(axis=1)
    gen_z = (images[:, 4:] * weights).sum(axis=1)
    patterns = np.arange(256)
    a, b = patterns & 15, patterns >> 4
    cur_x = np.zeros(256, dtype=np.int64)
    cur_z = np.zeros(256, dtype=np.int64)
    e = _NIBBLE_POPCOUNT[a & b].copy()
    for g in range(8):
        selected = ((patterns >> g) & 1).astype(bool)
        gx, gz = gen_x[g], gen_z[g]
        step = (
            2 * int(signs[g])
            + _NIBBLE_POPCOUNT[cur_x & cur_z]
            + _NIBBLE_POPCOUNT[gx & gz]
            + 2 * _NIBBLE_POPCOUNT[cur_z & gx]
            - _NIBBLE_POPCOUNT[(cur_x ^ gx) & (cur_z ^ gz)]
        )
        e = np.where(selected, e + step, e)
        cur_x = np.where(selected, cur_x ^ gx, cur_x)
        cur_z = np.where(selected, cur_z ^ gz, cur_z)
    e %= 4
    assert not (e & 1).any(), "conjugated Pauli lost Hermiticity"
    return cur_x, cur_z, e == 2


def _column(arr: np.ndarray, q: int) -> np.ndarray:
    word, bit = divmod(q, 64)
    return ((arr[:, word] >> np.uint64(bit)) & _ONE).astype(bool)


def _set_column(arr: np.ndarray, q: int, values: np.ndarray) -> None:
    word, bit = divmod(q, 64)
    mask = _ONE << np.uint64(bit)
    arr[:, word] = (arr[:, word] & ~mask) | (values.astype(np.uint64) << np.uint64(bit))


def _single(x: np.ndarray, z: np.ndarray, r: np.ndarray, name: str, q: int) -> None:
    xq, zq = _column(x, q), _column(z, q)
    if name == "H":
        r ^= xq & zq
        _set_column(x, q, zq)
        _set_column(z, q, xq)
    elif name == "S":
        r ^= xq & zq
        _set_column(z, q, zq ^ xq)
    elif name == "S_DAG":
        r ^= xq & ~zq
        _set_column(z, q, zq ^ xq)
    elif name == "X":
        r ^= zq
    elif name == "Y":
        r ^= xq ^ zq
    elif name == "Z":
        r ^= xq


def _cx(x: np.ndarray, z: np.ndarray, r: np.ndarray, c: int, t: int) -> None:
    xc, zc = _column(x, c), _column(z, c)
    xt, zt = _column(x, t), _column(z, t)
    r ^= xc & zt & ~(xt ^ zc)
    _set_column(x, t, xt ^ xc)
    _set_column(z, c, zc ^ zt)


def _apply_gate(x, z, r, n: int, name: str, targets: Sequence[int]) -> None:
    for q in targets:
        if not 0 <= q < n:
            raise ValueError(f"qubit {q} out of range for n={n}")
    if name in SINGLE_QUBIT_GATES:
        if len(targets) != 1:
            raise ValueError(f"{name} takes one target, got {tuple(targets)}")
        _single(x, z, r, name, targets[0])
    elif name in TWO_QUBIT_GATES:
        if len(targets) != 2:
            raise ValueError(f"{name} takes two targets, got {tuple(targets)}")
        c, t = targets
        if c == t:
            raise ValueError(f"{name} control and target coincide on qubit {c}")
        if name == "CX":
            _cx(x, z, r, c, t)
        elif name == "CZ":
            _single(x, z, r, "H", t)
            _cx(x, z, r, c, t)
            _single(x, z, r, "H", t)
        else:
            _single(x, z, r, "S_DAG", t)
            _cx(x, z, r, c, t)
            _single(x, z, r, "S", t)
    else:
        raise ValueError(f"unknown gate {name!r}")


def conjugate(p: PauliOperator, gates: Iterable[Gate]) -> PauliOperator:
    """``U p U^dagger`` for the circuit ``U`` given as a gate sequence in time order."""
    x, z = p.x[np.newaxis, :].copy(), p.z[np.newaxis, :].copy()
    r = np.array([p.negative])
    for gate in gates:
        _apply_gate(x, z, r, p.n, gate.name, gate.targets)
    return PauliOperator(p.n, x[0], z[0], bool(r[0]))


class StabilizerState:
    """Pure stabilizer state on ``n`` qubits.

    Use :meth:`new_zero_state` to construct one.
    """

    def __init__(self, n: int, x: np.ndarray, z: np.ndarray, r: np.ndarray):
        self.n = n
        self._x = x
        self._z = z
        self._r = r

    @classmethod
    def new_zero_state(cls, n: int) -> "StabilizerState":
        """The all-zero state: stabilizers ``Z_i``, destabilizers ``X_i``."""
        if n < 1:
            raise ValueError(f"a state needs at least one qubit, got n={n}")
        eye = np.eye(n, dtype=bool)
        zero = np.zeros((n, n), dtype=bool)
        x = pack_bits(np.vstack([eye, zero]))
        z = pack_bits(np.vstack([zero, eye]))
        return cls(n, x, z, np.zeros(2 * n, dtype=bool))

    def copy(self) -> "StabilizerState":
        return StabilizerState(self.n, self._x.copy(), self._z.copy(), self._r.copy())

    def _row(self, i: int) -> PauliOperator:
        return PauliOperator(self.n, self._x[i], self._z[i], bool(self._r[i]))

    def stabilizers(self) -> List[PauliOperator]:
        return [self._row(i) for i in range(self.n, 2 * self.n)]

    def destabilizers(self) -> List[PauliOperator]:
        return [self._row(i) for i in range(self.n)]

    # -- gates ---------------------------------------------------------------

    def _check_qubit(self, q: int) -> None:
        if not 0 <= q < self.n:
            raise ValueError(f"qubit {q} out of range for n={self.n}")

    def apply_clifford(self, name: str, *targets: int) -> None:
        """Conjugate every row by the named gate.

        Parameters
        ----------
        name : str
            ``H, S, S_DAG, X, Y, Z`` (one target) or ``CX, CY, CZ``
            (control, target).
        """
        _apply_gate(self._x, self._z, self._r, self.n, name, targets)

    def apply_circuit(self, gates: Iterable[Gate]) -> None:
        for gate in gates:
            self.apply_clifford(gate.name, *gate.targets)

    def random_clifford_4q(self, targets: Sequence[int], rng: SeedLike) -> None:
        """Apply a uniformly random 4-qubit Clifford (up to global phase)."""
        targets = tuple(int(q) for q in targets)
        if len(targets) != 4 or len(set(targets)) != 4:
            raise ValueError(f"random_clifford_4q needs 4 distinct qubits, got {targets}")
        for q in targets:
            self._check_qubit(q)
        rng = as_generator(rng)
        images = random_symplectic(4, rng)
        signs = rng.integers(0, 2, 8).astype(bool)
        table_x, table_z, table_r = _clifford_table(images, signs)

        pattern = np.zeros(2 * self.n, dtype=np.int64)
        for j, q in enumerate(targets):
            pattern |= _column(self._x, q).astype(np.int64) << j
            pattern |= _column(self._z, q).astype(np.int64) << (4 + j)
        new_x, new_z = table_x[pattern], table_z[pattern]
        for j, q in enumerate(targets):
            _set_column(self._x, q, ((new_x >> j) & 1).astype(bool))
            _set_column(self._z, q, ((new_z >> j) & 1).astype(bool))
        self._r ^= table_r[pattern]

    # -- measurement ---------------------------------------------------------

    def _check_operator(self, p: PauliOperator) -> None:
        if not isinstance(p, PauliOperator):
            raise TypeError(f"expected a PauliOperator, got {type(p).__name__}")
        if p.n != self.n:
            raise ValueError(f"size mismatch: state has {self.n} qubits, operator has {p.n}")

    def _anticommuting(self, p: PauliOperator) -> np.ndarray:
        words = np.flatnonzero(p.x | p.z)
        if words.size == 0:
            return np.zeros(2 * self.n, dtype=bool)
        form = popcount(self._x[:, words] & p.z[words]).sum(axis=1)
        form += popcount(self._z[:, words] & p.x[words]).sum(axis=1)
        return (form & 1).astype(bool)

    def _rowsum(self, targets: np.ndarray, source: int) -> None:
        """Replace each target row by ``target * source``."""
        if targets.size == 0:
            return
        xi, zi, ri = self._x[targets], self._z[targets], self._r[targets]
        xh, zh, rh = self._x[source], self._z[source], self._r[source]
        e = pair_phase_exponent(xi, zi, ri, xh, zh, rh)
        self._x[targets] = xi ^ xh
        self._z[targets] = zi ^ zh
        self._r[targets] = e == 2

    def _stabilized_sign(self, p: PauliOperator, destabilizer_hits: np.ndarray) -> int:
        rows = self.n + np.flatnonzero(destabilizer_hits)
        e = phase_exponent(self._x[rows], self._z[rows], self._r[rows])
        assert e % 2 == 0, f"product of stabilizers for {p} has phase i^{e}"
        negative = (e == 2) ^ p.negative
        return -1 if negative else 1

    def measure(self, p: PauliOperator, rng: SeedLike) -> MeasurementResult:
        """Measure the Hermitian Pauli ``p``, collapsing the state.

        Returns
        -------
        MeasurementResult
            The outcome and whether it was determined before measuring.

        Raises
        ------
        ValueError
            If ``p`` is the identity or has the wrong size.
        """
        self._check_operator(p)
        if p.is_identity():
            raise ValueError("cannot measure the identity operator")
        n = self.n
        anti = self._anticommuting(p)
        stabilizer_hits = np.flatnonzero(anti[n:])
        if stabilizer_hits.size == 0:
            return MeasurementResult(self._stabilized_sign(p, anti[:n]), True)

        pivot = n + int(stabilizer_hits[0])
        others = np.flatnonzero(anti)
        others = others[(others != pivot) & (others != pivot - n)]
        self._rowsum(others, pivot)
        self._x[pivot - n] = self._x[pivot]
        self._z[pivot - n] = self._z[pivot]
        self._r[pivot - n] = self._r[pivot]
        outcome = 1 - 2 * int(as_generator(rng).integers(2))
        self._x[pivot] = p.x
        self._z[pivot] = p.z
        self._r[pivot] = p.negative ^ (outcome == -1)
        return MeasurementResult(outcome, False)

    def expectation(self, p: PauliOperator) -> int:
        """+1 or -1 if ``±p`` is a stabilizer, otherwise 0. Never mutates."""
        self._check_operator(p)
        anti = self._anticommuting(p)
        if anti[self.n :].any():
            return 0
        if p.is_identity():
            return p.sign
        return self._stabilized_sign(p, anti[: self.n])

    def commutation_vector(self, p: PauliOperator) -> np.ndarray:
        """Bit ``j`` is set iff ``p`` anticommutes with stabilizer row ``j``."""
        self._check_operator(p)
        return self._anticommuting(p)[self.n :]

    # -- entanglement --------------------------------------------------------

    def entropy(self, region: Iterable[int]) -> int:
        """Von Neumann entropy of ``region`` in units of log 2.

        Uses ``S_A = rank(stabilizers restricted to A) - |A|``.
        """
        columns = sorted(set(int(q) for q in region))
        for q in columns:
            self._check_qubit(q)
        if not columns:
            return 0
        n = self.n
        idx = np.array(columns)
        xb = unpack_bits(self._x[n:], n)[:, idx]
        zb = unpack_bits(self._z[n:], n)[:, idx]
        return gf2_rank(pack_bits(np.concatenate([xb, zb], axis=1))) - len(columns)

    # -- diagnostics ---------------------------------------------------------

    def check_invariants(self) -> None:
        """Assert the symplectic pairing of destabilizer and stabilizer rows."""
        n = self.n
        xb = unpack_bits(self._x, n).astype(np.int64)
        zb = unpack_bits(self._z, n).astype(np.int64)
        gram = (xb @ zb.T + zb @ xb.T) % 2
        expected = np.zeros((2 * n, 2 * n), dtype=np.int64)
        expected[:n, n:] = np.eye(n, dtype=np.int64)
        expected[n:, :n] = np.eye(n, dtype=np.int64)
        bad = np.argwhere(gram != expected)
        assert bad.size == 0, f"tableau pairing broken at rows {bad[:4].tolist()}"
        assert self._x.shape == (2 * n, n_words(n)), f"unexpected tableau shape {self._x.shape}"

    def dump(self) -> str:
        lines = [f"destab[{i}] {self._row(i)}" for i in range(self.n)]
        lines += [f"stab[{i}] {self._row(self.n + i)}" for i in range(self.n)]
        return "\n".join(lines)

    def __repr__(self) -> str:
        return f"<StabilizerState n={self.n}>"


def new_zero_state(n: int) -> StabilizerState:
    return StabilizerState.new_zero_state(n)
