"""Shims for behaviour that differs across numpy releases."""
import numpy as np
from packaging.version import Version

if Version(np.__version__) >= Version("2.0.0"):

    def popcount(words: np.ndarray) -> np.ndarray:
        """Number of set bits in each element of an unsigned integer array."""
        return np.bitwise_count(words).astype(np.int64)

else:
    _BYTE_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)

    def popcount(words: np.ndarray) -> np.ndarray:  # type: ignore
        """Number of set bits in each element of an unsigned integer array."""
        words = np.ascontiguousarray(words, dtype=np.uint64)
        as_bytes = words.view(np.uint8).reshape(words.shape + (8,))
        return _BYTE_POPCOUNT[as_bytes].sum(axis=-1)
