"""Scalar diagnostics computed from readout series and tableaus."""
import logging
import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import linregress

from floquetlab.errors import DecayWindowWarning, FitError
from floquetlab.pipeline import map_realizations
from floquetlab.rng import realization_rng
from floquetlab.tableau import StabilizerState

if TYPE_CHECKING:  # pragma: no cover
    from floquetlab.lattice import HoneycombLattice
    from floquetlab.protocol import ProtocolConfig, RunRecord

logger = logging.getLogger(__name__)

DEFAULT_ANCILLAS = 10


# -- time series ----------------------------------------------------------------


@dataclass(frozen=True)
class TimeSeries:
    """Realization average of a readout, indexed by ``t = 0..T``."""

    values: np.ndarray
    stderr: np.ndarray
    count: int = 1

    def __post_init__(self):
        if self.values.shape != self.stderr.shape or self.values.ndim != 1:
            raise ValueError(f"values and stderr must be 1-d of equal length, got {self.values.shape}, {self.stderr.shape}")
        if (self.stderr < 0).any():
            raise ValueError("stderr must be non-negative")

    @property
    def T(self) -> int:
        return len(self.values) - 1

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "TimeSeries":
        """Mean and standard error over the first axis of ``samples``."""
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 2 or samples.shape[0] == 0:
            raise ValueError(f"expected a (realizations, T + 1) array, got shape {samples.shape}")
        count = samples.shape[0]
        mean = samples.mean(axis=0)
        if count > 1:
            stderr = samples.std(axis=0, ddof=1) / np.sqrt(count)
        else:
            stderr = np.zeros_like(mean)
        return cls(mean, stderr, count)

    @classmethod
    def from_records(cls, records: Sequence["RunRecord"], field: str = "G") -> "TimeSeries":
        rows = [getattr(r, field) for r in records]
        if any(row is None for row in rows):
            raise ValueError(f"some records did not record {field!r}")
        return cls.from_samples(np.vstack(rows))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": np.arange(len(self.values)), "mean": self.values, "stderr": self.stderr})


def fourier_components(series) -> Tuple[float, float]:
    """Zero- and pi-frequency components ``(G_0, G_pi)`` of a readout series.

    ``G_0 = (2/T) sum_t G(t)`` and ``G_pi = (2/T) sum_t (-1)**t G(t)`` with the
    sums over ``t = 1..T``; the initialization readout at ``t = 0`` is left
    out so both components are exact for period-2 and constant series.

    Parameters
    ----------
    series : TimeSeries or array_like
        ``G(0), G(1), ..., G(T)``.
    """
    values = np.asarray(series.values if isinstance(series, TimeSeries) else series, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("fourier_components needs a non-empty 1-d series")
    T = values.size - 1
    if T < 2:
        raise ValueError(f"fourier_components needs T >= 2, got T={T}")
    t = np.arange(1, T + 1)
    body = values[1:]
    return 2.0 / T * float(body.sum()), 2.0 / T * float(((-1.0) ** t * body).sum())


# -- entanglement -------------------------------------------------------------


@dataclass(frozen=True)
class TeePartition:
    """Three disjoint qubit regions."""

    A: FrozenSet[int]
    B: FrozenSet[int]
    C: FrozenSet[int]

    def __post_init__(self):
        for name in "ABC":
            object.__setattr__(self, name, frozenset(int(q) for q in getattr(self, name)))
        if self.A & self.B or self.B & self.C or self.A & self.C:
            raise ValueError("TEE regions overlap")

    @property
    def regions(self) -> Tuple[FrozenSet[int], FrozenSet[int], FrozenSet[int]]:
        return self.A, self.B, self.C


def tee(tableau: StabilizerState, partition: TeePartition) -> int:
    """Topological entanglement entropy in units of log 2.

    ``-(S_A + S_B + S_C - S_AB - S_BC - S_AC + S_ABC)``, which is 1 for the
    code state and 0 for a product state.
    """
    A, B, C = partition.regions
    if len(A | B | C) >= tableau.n:
        raise ValueError("TEE regions must leave part of the system out")
    S = tableau.entropy
    return -(S(A) + S(B) + S(C) - S(A | B) - S(B | C) - S(A | C) + S(A | B | C))


def pinwheel_links(lattice: "HoneycombLattice", plaquette: int) -> Tuple[int, ...]:
    """The six red links leaving the corners of a red ``plaquette``, clockwise."""
    item = lattice.plaquettes[plaquette]
    if item.color != "red":
        raise ValueError(f"plaquette {plaquette} is {item.color}, expected red")
    corner = {q: k for k, q in enumerate(item.qubits)}
    spokes = [
        index for index in lattice.links_by_color["red"] if plaquette in lattice.links[index].connects
    ]
    return tuple(sorted(spokes, key=lambda index: min(corner.get(q, 6) for q in lattice.links[index].qubits)))


def default_partition(lattice: "HoneycombLattice", plaquette: Optional[int] = None) -> TeePartition:
    """Pinwheel of red links around one red plaquette.

    The six red links leaving the plaquette's corners are grouped into three
    consecutive pairs; ``A``, ``B`` and ``C`` hold the four qubits of each
    pair. The neighbouring red plaquettes must be distinct, so ``L >= 6``.
    """
    if lattice.L < 6:
        raise ValueError(f"the pinwheel partition needs L >= 6, got L={lattice.L}")
    if plaquette is None:
        plaquette = lattice.plaquettes_of_color("red")[0]
    spokes = pinwheel_links(lattice, plaquette)
    regions: List[set] = [set(), set(), set()]
    for k, index in enumerate(spokes):
        regions[k // 2].update(lattice.links[index].qubits)
    return TeePartition(*regions)


# -- defects ------------------------------------------------------------------


class DefectReport(NamedTuple):
    """Plaquettes without a definite value after a red round.

    Attributes
    ----------
    undetermined : int
        Number of plaquettes ``P`` with ``<P> = 0``.
    pairs : list of tuple
        Undetermined pairs ``(u, v)`` whose product has a definite value.
    """

    undetermined: int
    pairs: List[Tuple[int, int]]


def plaquette_defects(tableau: StabilizerState, lattice: "HoneycombLattice", pairs: bool = False) -> DefectReport:
    operators = lattice.plaquette_operators(tableau.n)
    loose = [p for p, op in enumerate(operators) if tableau.expectation(op) == 0]
    found = []
    if pairs:
        for a, u in enumerate(loose):
            for v in loose[a + 1 :]:
                if tableau.expectation(operators[u].multiply(operators[v])) != 0:
                    found.append((u, v))
    return DefectReport(len(loose), found)


# -- decay ---------------------------------------------------------------------


class DecayFit(NamedTuple):
    """Exponential fit ``G(2t) + G(2t - 1) ~ exp(-2 beta t)``."""

    beta: float
    stderr: float
    window: Tuple[int, int]
    points: int


def decay_rate(series: TimeSeries, discard: int = 4) -> DecayFit:
    """Fit the decay rate of the paired readout ``G(2t) + G(2t - 1)``.

    The window skips the first ``discard`` cycles and ends before the first
    pair whose sum is below three standard errors or nonpositive.

    Raises
    ------
    ValueError
        If ``T < 10``.
    FitError
        If fewer than two points remain in the window.
    """
    if series.T < 10:
        raise ValueError(f"decay_rate needs T >= 10, got T={series.T}")
    times, paired = [], []
    for tau in range(2, series.T + 1, 2):
        if tau - 1 <= discard:
            continue
        value = series.values[tau] + series.values[tau - 1]
        error = np.hypot(series.stderr[tau], series.stderr[tau - 1])
        if value <= 0:
            warnings.warn(
                f"nonpositive paired readout at t={tau}; decay fit window ends at t={times[-1] if times else tau}",
                category=DecayWindowWarning,
            )
            break
        if value < 3 * error:
            break
        times.append(tau)
        paired.append(value)
    if len(times) < 2:
        raise FitError(f"decay fit window holds {len(times)} point(s)")
    fit = linregress(times, np.log(paired))
    beta = max(-float(fit.slope), 0.0)
    logger.debug(f"decay fit over t={times[0]}..{times[-1]}: beta={beta:.4f}")
    return DecayFit(beta, float(fit.stderr), (times[0], times[-1]), len(times))


# -- purification -------------------------------------------------------------


@dataclass(frozen=True)
class PurificationConfig:
    protocol: "ProtocolConfig"
    ancillas: int = DEFAULT_ANCILLAS
    scramble: bool = True

    def __post_init__(self):
        if self.ancillas < 1:
            raise ValueError(f"ancillas must be positive, got ancillas={self.ancillas}")


def scrambled_state(n_system: int, ancillas: int, gates: int, rng) -> StabilizerState:
    """Zero state of system plus ancillas after ``gates`` random 4-qubit Cliffords."""
    n = n_system + ancillas
    tableau = StabilizerState.new_zero_state(n)
    for _ in range(gates):
        tableau.random_clifford_4q(rng.choice(n, size=4, replace=False), rng)
    return tableau


def purification_run(config: PurificationConfig, realization: int = 0) -> np.ndarray:
    """Ancilla entropy ``S_a(t)`` for ``t = 0..T`` of one realization.

    The lattice and the ancillas are scrambled together by ``8 L**3`` random
    4-qubit Cliffords, after which the perturbed schedule runs; ``S_a`` is
    recorded after every cycle.
    """
    # protocol imports this module for its readouts
    from floquetlab.lattice import HoneycombLattice
    from floquetlab.protocol import CodeState, run_cycle

    protocol = config.protocol
    rng = realization_rng(protocol.seed, realization)
    lattice = HoneycombLattice.build(protocol.L)
    gates = 8 * protocol.L**3 if config.scramble else 0
    tableau = scrambled_state(lattice.n_qubits, config.ancillas, gates, rng)
    ancillas = range(lattice.n_qubits, tableau.n)
    state = CodeState(tableau, lattice)
    entropy = np.zeros(protocol.cycles + 1, dtype=np.int64)
    entropy[0] = tableau.entropy(ancillas)
    for t in range(1, protocol.cycles + 1):
        run_cycle(state, protocol, rng)
        entropy[t] = tableau.entropy(ancillas)
    logger.debug(f"purification realization {realization}: S_a {entropy[0]} -> {entropy[-1]}")
    return entropy


def _purification_stage(realization: int, *, config: PurificationConfig) -> np.ndarray:
    return purification_run(config, realization)


def purification_experiment(
    config: PurificationConfig, executor: Optional[str] = None, workers: Optional[int] = None
) -> np.ndarray:
    """``(realizations, T + 1)`` ancilla entropies."""
    runs = map_realizations(
        _purification_stage, "purification", range(config.protocol.realizations), config, executor, workers
    )
    return np.vstack(runs)


def purification_time(series: Iterable[float]) -> Optional[int]:
    """First ``t`` at which the ancilla entropy vanishes, or None."""
    for t, value in enumerate(series):
        if value == 0:
            return t
    return None


class PowerLawFit(NamedTuple):
    exponent: float
    stderr: float
    prefactor: float


def fit_power_law(sizes: Sequence[float], values: Sequence[float]) -> PowerLawFit:
    """Fit ``values ~ prefactor * sizes**exponent`` on log-log axes."""
    sizes = np.asarray(sizes, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = (sizes > 0) & (values > 0)
    if np.count_nonzero(keep) < 2:
        raise FitError("a power-law fit needs at least two positive points")
    fit = linregress(np.log(sizes[keep]), np.log(values[keep]))
    return PowerLawFit(float(fit.slope), float(fit.stderr), float(np.exp(fit.intercept)))
