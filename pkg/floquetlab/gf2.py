"""Bit-packed linear algebra over GF(2).

Rows are stored as ``uint64`` words, 64 columns per word, column ``j`` at bit
``j % 64`` of word ``j // 64``. All reductions are vectorized over rows.
"""
import logging
from typing import Iterable, List, Optional, Tuple

import numpy as np

from floquetlab.compat import popcount

logger = logging.getLogger(__name__)

_ONE = np.uint64(1)


def n_words(n_bits: int) -> int:
    return max(1, -(-n_bits // 64))


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a boolean array along its last axis into ``uint64`` words.

    >>> pack_bits(np.array([1, 0, 1], dtype=bool))
    array([5], dtype=uint64)
    """
    bits = np.asarray(bits, dtype=bool)
    n = bits.shape[-1]
    width = n_words(n) * 64
    padded = np.zeros(bits.shape[:-1] + (width,), dtype=bool)
    padded[..., :n] = bits
    packed = np.packbits(padded, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64)


def unpack_bits(words: np.ndarray, n_bits: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`, truncated to ``n_bits`` columns."""
    words = np.ascontiguousarray(words, dtype="<u8")
    as_bytes = words.view(np.uint8)
    bits = np.unpackbits(as_bytes, axis=-1, bitorder="little")
    return bits[..., :n_bits].astype(bool)


def parity(words: np.ndarray) -> np.ndarray:
    """Parity of the set bits along the last axis."""
    return (popcount(words).sum(axis=-1) & 1).astype(bool)


def get_bit(words: np.ndarray, column: int) -> np.ndarray:
    word, bit = divmod(column, 64)
    return ((words[..., word] >> np.uint64(bit)) & _ONE).astype(bool)


def gf2_rank(rows: np.ndarray) -> int:
    """Rank over GF(2) of packed rows, shape ``(k, words)``.

    Forward elimination only; the input is not modified.
    """
    m = np.array(rows, dtype=np.uint64, copy=True)
    if m.ndim == 1:
        m = m[np.newaxis, :]
    k, width = m.shape
    rank = 0
    for word in range(width):
        if rank == k:
            break
        if not m[rank:, word].any():
            continue
        for bit in range(64):
            if rank == k:
                break
            mask = _ONE << np.uint64(bit)
            hits = np.flatnonzero(m[rank:, word] & mask)
            if hits.size == 0:
                continue
            pivot = rank + hits[0]
            if pivot != rank:
                m[[rank, pivot]] = m[[pivot, rank]]
            below = rank + 1 + np.flatnonzero(m[rank + 1 :, word] & mask)
            if below.size:
                m[below] ^= m[rank]
            rank += 1
    return rank


def in_span(vector: np.ndarray, rows: np.ndarray) -> bool:
    """Whether a packed vector lies in the row span of ``rows``."""
    vector = np.asarray(vector, dtype=np.uint64)
    if not vector.any():
        return True
    rows = np.asarray(rows, dtype=np.uint64)
    if rows.size == 0:
        return False
    return gf2_rank(rows) == gf2_rank(np.vstack([rows, vector[np.newaxis, :]]))


class GF2Basis:
    """Incrementally grown basis of packed GF(2) vectors.

    Every stored row has a pivot (its lowest set column) that no later row
    touches, so reducing a vector against the rows in insertion order clears
    each pivot exactly once.

    Parameters
    ----------
    width : int
        Number of ``uint64`` words per vector.
    """

    def __init__(self, width: int):
        self.width = width
        self._rows: List[np.ndarray] = []
        self._pivots: List[Tuple[int, np.uint64]] = []

    def __len__(self) -> int:
        return len(self._rows)

    def reduce(self, vector: np.ndarray) -> np.ndarray:
        residue = np.array(vector, dtype=np.uint64, copy=True)
        if residue.shape != (self.width,):
            raise ValueError(f"expected {self.width} words, got shape {residue.shape}")
        for row, (word, mask) in zip(self._rows, self._pivots):
            if residue[word] & mask:
                residue ^= row
        return residue

    def add(self, vector: np.ndarray) -> bool:
        """Insert ``vector``; return False if it was already in the span."""
        residue = self.reduce(vector)
        nonzero = np.flatnonzero(residue)
        if nonzero.size == 0:
            return False
        word = int(nonzero[0])
        value = residue[word]
        mask = value & (~value + _ONE)
        self._rows.append(residue)
        self._pivots.append((word, mask))
        return True

    def extend(self, vectors: Iterable[np.ndarray]) -> int:
        return sum(self.add(v) for v in vectors)

    def contains(self, vector: np.ndarray) -> bool:
        return not self.reduce(vector).any()

    def rows(self) -> Optional[np.ndarray]:
        if not self._rows:
            return None
        return np.vstack(self._rows)
