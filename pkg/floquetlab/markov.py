"""Markov description of the logical dynamics over whole cycles.

The logical subgroup after a red round is one of six configurations (see
:data:`floquetlab.protocol.CONFIGURATIONS`). A cycle applies one of five
channels with probabilities ``p1..p5``; :class:`TransferMatrix` holds the
resulting column-stochastic 6x6 matrix ``S[to, from]``.
"""
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, NamedTuple, Optional, Sequence

import numpy as np

from floquetlab.lattice import HoneycombLattice
from floquetlab.pipeline import map_realizations
from floquetlab.protocol import (
    CHANNELS,
    CONFIGURATIONS,
    MISS_MODES,
    ProtocolConfig,
    one_cycle_channel,
    prepare_channel_state,
    prepare_configuration,
    transition,
)
from floquetlab.rng import realization_rng

if TYPE_CHECKING:  # pragma: no cover
    from floquetlab.observables import TimeSeries

logger = logging.getLogger(__name__)

N_CONFIGURATIONS = len(CONFIGURATIONS)

# configuration reached from each configuration (rows) under each channel
# (identity, em_exchange, measure_f_x, measure_f_z, measure_f_xz)
_ACTION = np.array(
    [
        [0, 1, 2, 3, 5],
        [1, 0, 2, 3, 5],
        [2, 2, 2, 4, 4],
        [3, 3, 4, 3, 4],
        [4, 4, 4, 4, 4],
        [5, 5, 4, 4, 5],
    ]
)

REFERENCE_PROBABILITIES = (0.31, 0.30, 0.12, 0.23, 0.04)


class TransferMatrix:
    """Column-stochastic transfer matrix over the six logical configurations.

    Parameters
    ----------
    matrix : np.ndarray
        ``(6, 6)`` with ``matrix[to, from]``.
    probabilities : sequence of float, optional
        The channel probabilities it was built from.
    """

    def __init__(self, matrix: np.ndarray, probabilities: Optional[Sequence[float]] = None):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (N_CONFIGURATIONS, N_CONFIGURATIONS):
            raise ValueError(f"expected a {N_CONFIGURATIONS}x{N_CONFIGURATIONS} matrix, got shape {matrix.shape}")
        if (matrix < -1e-12).any() or (matrix > 1 + 1e-12).any():
            raise ValueError("transfer matrix entries must lie in [0, 1]")
        if not np.allclose(matrix.sum(axis=0), 1.0, atol=1e-9):
            raise ValueError(f"transfer matrix columns must sum to 1, got {matrix.sum(axis=0)}")
        self.matrix = matrix
        self.probabilities = None if probabilities is None else tuple(float(p) for p in probabilities)

    @classmethod
    def build(cls, probabilities: Sequence[float]) -> "TransferMatrix":
        """Matrix of the five channels with probabilities ``p1..p5``.

        Mass ``1 - sum(p)`` not assigned to any channel stays on the diagonal.

        >>> TransferMatrix.build((1, 0, 0, 0, 0)).matrix.trace()
        6.0
        """
        p = np.asarray(probabilities, dtype=float)
        if p.shape != (len(CHANNELS),):
            raise ValueError(f"expected {len(CHANNELS)} channel probabilities, got {p.shape}")
        if (p < 0).any() or p.sum() > 1 + 1e-9:
            raise ValueError(f"channel probabilities must be non-negative with sum <= 1, got {p.tolist()}")
        matrix = np.zeros((N_CONFIGURATIONS, N_CONFIGURATIONS))
        for start in range(N_CONFIGURATIONS):
            for channel, target in enumerate(_ACTION[start]):
                matrix[target, start] += p[channel]
            matrix[start, start] += max(1.0 - p.sum(), 0.0)
        return cls(matrix, p)

    def power(self, t: int) -> np.ndarray:
        if t < 0:
            raise ValueError(f"t must be non-negative, got t={t}")
        return np.linalg.matrix_power(self.matrix, t)

    def propagate(self, p0: Sequence[float], t: int) -> np.ndarray:
        """Configuration distribution after ``t`` cycles starting from ``p0``."""
        return self.power(t) @ np.asarray(p0, dtype=float)

    def predict_G(self, t: int) -> float:
        """Probability that ``m_x`` is stabilized after ``t`` cycles from ``(m_x, m_z)``."""
        St = self.power(t)
        return float(St[0, 0] + St[2, 0])

    def predict_series(self, T: int) -> np.ndarray:
        out = np.empty(T + 1)
        St = np.eye(N_CONFIGURATIONS)
        for t in range(T + 1):
            out[t] = St[0, 0] + St[2, 0]
            St = self.matrix @ St
        return out

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues ordered by decreasing modulus, ties by decreasing real part."""
        values = np.linalg.eigvals(self.matrix)
        order = np.lexsort((-values.real, -np.round(np.abs(values), 12)))
        return values[order]

    def decay_rate(self) -> float:
        """``-log |lambda_3|``, the asymptotic decay rate of ``G``."""
        modulus = abs(self.eigenvalues()[2])
        return float("inf") if modulus == 0 else float(-np.log(modulus))

    def to_dict(self) -> Dict:
        values = self.eigenvalues()
        return {
            "configurations": ["(" + ",".join(c) + ")" for c in CONFIGURATIONS],
            "probabilities": None if self.probabilities is None else dict(zip(CHANNELS, self.probabilities)),
            "matrix": self.matrix.tolist(),
            "eigenvalues": [[float(v.real), float(v.imag)] for v in values],
            "decay_rate": self.decay_rate(),
        }

    def __repr__(self) -> str:
        return f"<TransferMatrix decay_rate={self.decay_rate():.4f}>"


class ChannelEstimate(NamedTuple):
    """Empirical channel frequencies from one-cycle runs."""

    probabilities: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray
    samples: int

    def transfer_matrix(self) -> TransferMatrix:
        return TransferMatrix.build(self.probabilities)

    def to_dict(self) -> Dict:
        return {
            "samples": self.samples,
            "probabilities": dict(zip(CHANNELS, self.probabilities.tolist())),
            "stderr": dict(zip(CHANNELS, self.stderr.tolist())),
            "counts": dict(zip(CHANNELS, self.counts.tolist())),
        }


@dataclass(frozen=True)
class _SamplingConfig:
    protocol: ProtocolConfig
    start: int = 0


def _channel_sample(sample: int, *, config: _SamplingConfig) -> int:
    lattice = HoneycombLattice.build(config.protocol.L)
    rng = realization_rng(config.protocol.seed, sample)
    state = prepare_channel_state(lattice, rng)
    return CHANNELS.index(one_cycle_channel(state, lattice, config.protocol, rng))


def _transition_sample(sample: int, *, config: _SamplingConfig) -> int:
    lattice = HoneycombLattice.build(config.protocol.L)
    rng = realization_rng(config.protocol.seed, sample, config.start)
    state = prepare_configuration(lattice, config.start, rng)
    return transition(state, config.protocol, rng)


def _protocol(lattice: HoneycombLattice, p_M: float, seed: int, miss_mode: str) -> ProtocolConfig:
    if miss_mode not in MISS_MODES:
        raise ValueError(f"unknown miss_mode {miss_mode!r}, expected one of {MISS_MODES}")
    if miss_mode != "blue_green":
        raise ValueError(f"the transfer-matrix model needs miss_mode='blue_green', got {miss_mode!r}")
    return ProtocolConfig(L=lattice.L, p_M=p_M, p_S=0.0, miss_mode=miss_mode, cycles=1, seed=seed)


def estimate(
    lattice: HoneycombLattice,
    p_M: float,
    samples: int,
    seed: int,
    miss_mode: str = "blue_green",
    executor: Optional[str] = None,
    workers: Optional[int] = None,
) -> ChannelEstimate:
    """Channel frequencies over ``samples`` independent one-cycle runs from ``(m_x, m_z)``."""
    if samples < 1:
        raise ValueError(f"samples must be positive, got {samples}")
    config = _SamplingConfig(_protocol(lattice, p_M, seed, miss_mode))
    labels = map_realizations(_channel_sample, "channel", range(samples), config, executor, workers)
    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=len(CHANNELS))
    p = counts / samples
    logger.info(f"channel frequencies at p_M={p_M}: {np.round(p, 3).tolist()}")
    return ChannelEstimate(p, np.sqrt(p * (1 - p) / samples), counts, samples)


def estimate_columns(
    lattice: HoneycombLattice,
    p_M: float,
    samples: int,
    seed: int,
    miss_mode: str = "blue_green",
    executor: Optional[str] = None,
    workers: Optional[int] = None,
) -> TransferMatrix:
    """Sample every column of the transfer matrix directly.

    Each configuration is prepared ``samples`` times and run for one cycle;
    column ``c`` holds the frequencies of the configurations reached.
    """
    if samples < 1:
        raise ValueError(f"samples must be positive, got {samples}")
    protocol = _protocol(lattice, p_M, seed, miss_mode)
    matrix = np.zeros((N_CONFIGURATIONS, N_CONFIGURATIONS))
    for start in range(N_CONFIGURATIONS):
        config = _SamplingConfig(protocol, start)
        reached = map_realizations(_transition_sample, f"column-{start}", range(samples), config, executor, workers)
        matrix[:, start] = np.bincount(np.asarray(reached, dtype=np.int64), minlength=N_CONFIGURATIONS) / samples
        logger.debug(f"column {start}: {np.round(matrix[:, start], 3).tolist()}")
    return TransferMatrix(matrix)


def compare(matrix: TransferMatrix, measured: "TimeSeries", t_max: Optional[int] = None) -> Dict:
    """Predicted against measured ``G(t)`` for ``t <= t_max``."""
    T = measured.T if t_max is None else min(t_max, measured.T)
    predicted = matrix.predict_series(T)
    values = measured.values[: T + 1]
    stderr = measured.stderr[: T + 1]
    return {
        "t": list(range(T + 1)),
        "predicted": predicted.tolist(),
        "measured": values.tolist(),
        "stderr": stderr.tolist(),
        "within_two_stderr": bool(np.all(np.abs(predicted - values) <= 2 * stderr + 1e-12)),
    }
