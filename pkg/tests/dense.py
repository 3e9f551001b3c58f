"""Dense state-vector reference used to check the tableau code on few qubits."""
from typing import Sequence, Tuple

import numpy as np
from scipy.linalg import svd

from floquetlab.pauli import PauliOperator

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
_SINGLE = {"I": I2, "X": X, "Y": Y, "Z": Z}


def _controlled(u: np.ndarray) -> np.ndarray:
    out = np.eye(4, dtype=complex)
    out[2:, 2:] = u
    return out


GATES = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "S": np.diag([1, 1j]),
    "S_DAG": np.diag([1, -1j]),
    "X": X,
    "Y": Y,
    "Z": Z,
    "CX": _controlled(X),
    "CY": _controlled(Y),
    "CZ": _controlled(Z),
}


def multikron(*mats) -> np.ndarray:
    out = np.array([[1]], dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def pauli_matrix(p: PauliOperator) -> np.ndarray:
    letters = p.letters()
    mats = [_SINGLE[letters.get(q, "I")] for q in range(p.n)]
    return p.sign * multikron(*mats)


def zero_state(n: int) -> np.ndarray:
    psi = np.zeros(2**n, dtype=complex)
    psi[0] = 1
    return psi


def apply_unitary(psi: np.ndarray, u: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    k = len(targets)
    tensor = psi.reshape((2,) * n)
    gate = u.reshape((2,) * (2 * k))
    out = np.tensordot(gate, tensor, axes=(list(range(k, 2 * k)), list(targets)))
    out = np.moveaxis(out, list(range(k)), list(targets))
    return out.reshape(-1)


def apply_gate(psi: np.ndarray, name: str, targets: Sequence[int], n: int) -> np.ndarray:
    return apply_unitary(psi, GATES[name], targets, n)


def expectation(psi: np.ndarray, p: PauliOperator) -> float:
    return float(np.real(np.vdot(psi, pauli_matrix(p) @ psi)))


def project(psi: np.ndarray, p: PauliOperator, outcome: int) -> Tuple[float, np.ndarray]:
    """Probability of ``outcome`` and the normalized post-measurement state."""
    projector = (np.eye(psi.size) + outcome * pauli_matrix(p)) / 2
    out = projector @ psi
    prob = float(np.real(np.vdot(out, out)))
    if prob < 1e-12:
        return 0.0, out
    return prob, out / np.sqrt(prob)


def entropy(psi: np.ndarray, region: Sequence[int], n: int) -> float:
    """Von Neumann entropy in bits."""
    region = list(region)
    rest = [q for q in range(n) if q not in region]
    tensor = psi.reshape((2,) * n).transpose(region + rest)
    s = svd(tensor.reshape(2 ** len(region), -1), compute_uv=False)
    probs = s**2
    probs = probs[probs > 1e-12]
    return float(-(probs * np.log2(probs)).sum())
