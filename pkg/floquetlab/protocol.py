"""The perturbed measurement schedule and its readouts.

A cycle measures the link operators color by color in the order blue, green,
red. Two perturbations act on individual links: a link can be *missed*
(skipped) with probability ``p_M`` in the rounds the miss mode allows, and
a measured link can be replaced by its two *single-qubit* factors with
probability ``p_S``.
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from floquetlab.errors import ChannelClassificationError, ReadoutTimingError
from floquetlab.gf2 import GF2Basis, n_words, pack_bits
from floquetlab.lattice import COLORS, ROUND_ORDER, HoneycombLattice
from floquetlab.observables import default_partition, plaquette_defects, tee
from floquetlab.pauli import PauliOperator
from floquetlab.pipeline import map_realizations
from floquetlab.rng import SeedLike, as_generator, realization_rng
from floquetlab.tableau import StabilizerState

logger = logging.getLogger(__name__)

MISS_MODES = ("blue_green", "green_only", "all_rounds")
_MISSABLE = {
    "blue_green": ("blue", "green"),
    "green_only": ("green",),
    "all_rounds": ("blue", "green", "red"),
}

# per-link actions of a cycle schedule
MEASURE, SKIP, SINGLE = 0, 1, 2

CONFIGURATIONS: Tuple[Tuple[str, str], ...] = (
    ("m_x", "m_z"),
    ("e_x", "e_z"),
    ("m_x", "e_x"),
    ("m_z", "e_z"),
    ("f_x", "f_z"),
    ("m_xz", "e_xz"),
)
# every configuration stabilizes its two strings and their product
_STABILIZED = (
    frozenset({"m_x", "m_z", "m_xz"}),
    frozenset({"e_x", "e_z", "e_xz"}),
    frozenset({"m_x", "e_x", "f_x"}),
    frozenset({"m_z", "e_z", "f_z"}),
    frozenset({"f_x", "f_z", "f_xz"}),
    frozenset({"m_xz", "e_xz", "f_xz"}),
)
CHANNELS = ("identity", "em_exchange", "measure_f_x", "measure_f_z", "measure_f_xz")
# configuration reached from (m_x, m_z) -> channel that produced it
_CHANNEL_OF_CONFIGURATION = {0: "identity", 1: "em_exchange", 2: "measure_f_x", 3: "measure_f_z", 5: "measure_f_xz"}

PERFECT_WARMUP_CYCLES = 2


@dataclass(frozen=True)
class ProtocolConfig:
    """Parameters of one experiment.

    Parameters
    ----------
    L : int
        Plaquettes per direction, a multiple of 3.
    p_M, p_S : float
        Missing and single-qubit replacement probabilities.
    miss_mode : str
        Which rounds can miss: ``blue_green``, ``green_only`` or ``all_rounds``.
    cycles : int
        Number of cycles ``T`` after initialization.
    d : int, optional
        Width of the strip used by the corrected readout; defaults to 7 in
        ``all_rounds`` mode and 11 otherwise.
    seed : int
    realizations : int
    corrected : bool
        Also record the error-corrected readout.
    record_tee : bool
        Record the tripartite entanglement entropy after every red round.
    record_defects : bool
        Record the number of undetermined plaquettes after every red round.
    """

    L: int
    p_M: float = 0.0
    p_S: float = 0.0
    miss_mode: str = "blue_green"
    cycles: int = 100
    d: Optional[int] = None
    seed: int = 0
    realizations: int = 1
    corrected: bool = False
    record_tee: bool = False
    record_defects: bool = False

    def __post_init__(self):
        if self.L < 3 or self.L % 3:
            raise ValueError(f"L must be a positive multiple of 3, got L={self.L}")
        for name in ("p_M", "p_S"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {name}={value}")
        if self.miss_mode not in MISS_MODES:
            raise ValueError(f"unknown miss_mode {self.miss_mode!r}, expected one of {MISS_MODES}")
        if self.cycles < 1:
            raise ValueError(f"cycles must be positive, got cycles={self.cycles}")
        if self.d is not None and (self.d < 1 or self.d % 2 == 0):
            raise ValueError(f"d must be an odd positive integer, got d={self.d}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got seed={self.seed}")
        if self.record_tee and self.L < 6:
            raise ValueError(f"recording the TEE needs L >= 6, got L={self.L}")
        if self.realizations < 1:
            raise ValueError(f"realizations must be positive, got realizations={self.realizations}")

    @property
    def strip_width(self) -> int:
        if self.d is not None:
            return self.d
        return 7 if self.miss_mode == "all_rounds" else 11

    def missable(self, color: str) -> bool:
        return color in _MISSABLE[self.miss_mode]


@dataclass
class RunRecord:
    """Time series of one realization, indexed by ``t = 0..T``."""

    realization: int
    seed: int
    G: np.ndarray
    corrected_G: Optional[np.ndarray] = None
    tee: Optional[np.ndarray] = None
    defects: Optional[np.ndarray] = None
    config: Optional[ProtocolConfig] = field(default=None, repr=False)


@dataclass
class CodeState:
    """A tableau together with where the schedule left it."""

    tableau: StabilizerState
    lattice: HoneycombLattice
    last_round: Optional[str] = None
    cycle: int = 0

    @property
    def n_qubits(self) -> int:
        return self.tableau.n

    def copy(self) -> "CodeState":
        return CodeState(self.tableau.copy(), self.lattice, self.last_round, self.cycle)

    def logical_strings(self) -> Dict[str, PauliOperator]:
        return self.lattice.logical_strings(self.n_qubits)


class CycleSchedule(NamedTuple):
    """Per-color link actions (``MEASURE``, ``SKIP`` or ``SINGLE``) of one cycle.

    Arrays follow the order of ``lattice.links_by_color[color]``.
    """

    blue: np.ndarray
    green: np.ndarray
    red: np.ndarray

    def actions(self, color: str) -> np.ndarray:
        return getattr(self, color)

    def links_with(self, lattice: HoneycombLattice, action: int) -> List[int]:
        out = []
        for color in COLORS:
            links = lattice.links_by_color[color]
            out.extend(links[k] for k in np.flatnonzero(self.actions(color) == action))
        return sorted(out)

    def missed_links(self, lattice: HoneycombLattice) -> List[int]:
        return self.links_with(lattice, SKIP)

    def single_links(self, lattice: HoneycombLattice) -> List[int]:
        return self.links_with(lattice, SINGLE)

    @classmethod
    def perfect(cls, lattice: HoneycombLattice) -> "CycleSchedule":
        return cls(*(np.zeros(len(lattice.links_by_color[c]), dtype=np.int8) for c in ROUND_ORDER))


def draw_schedule(lattice: HoneycombLattice, config: ProtocolConfig, rng: SeedLike) -> CycleSchedule:
    """Draw every link's action for one cycle.

    Two uniforms per link are consumed in every round regardless of the
    probabilities, in round order and then link order.
    """
    rng = as_generator(rng)
    arrays = {}
    for color in ROUND_ORDER:
        n = len(lattice.links_by_color[color])
        miss = rng.random(n)
        single = rng.random(n)
        actions = np.full(n, MEASURE, dtype=np.int8)
        if config.missable(color):
            actions[miss < config.p_M] = SKIP
        actions[(single < config.p_S) & (actions == MEASURE)] = SINGLE
        arrays[color] = actions
    return CycleSchedule(**arrays)


def apply_round(state: CodeState, color: str, actions: np.ndarray, rng: SeedLike) -> None:
    lattice = state.lattice
    rng = as_generator(rng)
    links = lattice.links_by_color[color]
    if len(actions) != len(links):
        raise ValueError(f"expected {len(links)} actions for the {color} round, got {len(actions)}")
    link_ops = lattice.link_operators(state.n_qubits)
    singles = lattice.single_qubit_operators(state.n_qubits)
    tableau = state.tableau
    for index, action in zip(links, actions):
        if action == MEASURE:
            tableau.measure(link_ops[index], rng)
        elif action == SINGLE:
            first, second = singles[index]
            tableau.measure(first, rng)
            tableau.measure(second, rng)
    state.last_round = color


def apply_schedule(state: CodeState, schedule: CycleSchedule, rng: SeedLike) -> None:
    """Run the three rounds of ``schedule`` on ``state``."""
    rng = as_generator(rng)
    for color in ROUND_ORDER:
        apply_round(state, color, schedule.actions(color), rng)
    state.cycle += 1


def run_cycle(state: CodeState, config: ProtocolConfig, rng: SeedLike) -> CycleSchedule:
    """Draw a schedule, apply it and return it."""
    rng = as_generator(rng)
    schedule = draw_schedule(state.lattice, config, rng)
    apply_schedule(state, schedule, rng)
    return schedule


def initialize(
    lattice: HoneycombLattice, rng: SeedLike, n_qubits: Optional[int] = None, tableau: Optional[StabilizerState] = None
) -> CodeState:
    """Prepare the code in the ``(m_x, m_z)`` configuration.

    Runs perfect cycles to fix every plaquette and then measures both ``m``
    loops. ``tableau`` lets callers start from a scrambled register; extra
    qubits beyond the lattice are left alone.
    """
    rng = as_generator(rng)
    if tableau is None:
        tableau = StabilizerState.new_zero_state(lattice.n_qubits if n_qubits is None else n_qubits)
    state = CodeState(tableau, lattice)
    perfect = CycleSchedule.perfect(lattice)
    for _ in range(PERFECT_WARMUP_CYCLES):
        apply_schedule(state, perfect, rng)
    strings = state.logical_strings()
    tableau.measure(strings["m_x"], rng)
    tableau.measure(strings["m_z"], rng)
    state.cycle = 0
    return state


def prepare_configuration(lattice: HoneycombLattice, configuration: int, rng: SeedLike) -> CodeState:
    """Initialize, then measure the two strings of ``CONFIGURATIONS[configuration]``."""
    if not 0 <= configuration < len(CONFIGURATIONS):
        raise ValueError(f"configuration must be in 0..{len(CONFIGURATIONS) - 1}, got {configuration}")
    rng = as_generator(rng)
    state = initialize(lattice, rng)
    if configuration:
        strings = state.logical_strings()
        for name in CONFIGURATIONS[configuration]:
            state.tableau.measure(strings[name], rng)
    return state


def prepare_channel_state(lattice: HoneycombLattice, rng: SeedLike) -> CodeState:
    return prepare_configuration(lattice, 0, rng)


def _require_red(state: CodeState) -> None:
    if state.last_round != "red":
        raise ReadoutTimingError(f"readouts need a completed red round, last round was {state.last_round!r}")


def readout_G(state: CodeState, kind: str = "m", direction: str = "x") -> int:
    """Squared expectation of the logical string; 1 iff it is stabilized.

    Raises
    ------
    ReadoutTimingError
        If the last round was not red.
    """
    _require_red(state)
    string = state.lattice.logical_string(kind, direction, state.n_qubits)
    return state.tableau.expectation(string) ** 2


@lru_cache(maxsize=None)
def _dressing_candidates(L: int, kind: str, direction: str, d: int, dressing: str) -> Tuple[int, ...]:
    lattice = HoneycombLattice.build(L)
    support = lattice.logical_string(kind, direction).support
    distance = lattice.qubit_distances(support)
    radius = d // 2
    if dressing == "red_links":
        items = lattice.links_by_color["red"]
        return tuple(k for k in items if all(distance[q] <= radius for q in lattice.links[k].qubits))
    return tuple(p.index for p in lattice.plaquettes if all(distance[q] <= radius for q in p.qubits))


def corrected_readout(
    state: CodeState,
    d: int = 11,
    dressing: str = "plaquettes",
    kind: str = "m",
    direction: str = "x",
) -> int:
    """Readout of the string dressed with nearby checks.

    Collects the commutation vectors (against the stabilizer rows) of every
    dressing operator inside the strip of width ``d`` around the string and
    returns 1 iff the string's own vector lies in their GF(2) span, i.e. some
    product of dressing operators makes the string a stabilizer.

    Parameters
    ----------
    dressing : str
        ``plaquettes`` or ``red_links``.
    """
    _require_red(state)
    if d < 1 or d % 2 == 0:
        raise ValueError(f"d must be an odd positive integer, got d={d}")
    if dressing not in ("plaquettes", "red_links"):
        raise ValueError(f"unknown dressing {dressing!r}")
    lattice, tableau = state.lattice, state.tableau
    string = lattice.logical_string(kind, direction, state.n_qubits)
    v = tableau.commutation_vector(string)
    if not v.any():
        return 1
    if dressing == "red_links":
        operators = lattice.link_operators(state.n_qubits)
    else:
        operators = lattice.plaquette_operators(state.n_qubits)
    basis = GF2Basis(n_words(state.n_qubits))
    for index in _dressing_candidates(lattice.L, kind, direction, d, dressing):
        w = tableau.commutation_vector(operators[index])
        if w.any():
            basis.add(pack_bits(w))
    return int(basis.contains(pack_bits(v)))


def config_readout(state: CodeState, config: ProtocolConfig) -> int:
    dressing = "red_links" if config.miss_mode == "all_rounds" else "plaquettes"
    return corrected_readout(state, config.strip_width, dressing)


def stabilized_strings(state: CodeState) -> frozenset:
    _require_red(state)
    tableau = state.tableau
    return frozenset(name for name, op in state.logical_strings().items() if tableau.expectation(op) != 0)


def _match(found: frozenset) -> Optional[int]:
    for index, expected in enumerate(_STABILIZED):
        if found == expected:
            return index
    return None


def classify_configuration(state: CodeState) -> Optional[int]:
    """Index into :data:`CONFIGURATIONS` of the state's logical subgroup, or None."""
    return _match(stabilized_strings(state))


def one_cycle_channel(
    state: CodeState,
    lattice: HoneycombLattice,
    config: ProtocolConfig,
    rng: SeedLike,
    return_schedule: bool = False,
):
    """Run one cycle from ``(m_x, m_z)`` and name the channel it applied.

    Raises
    ------
    ValueError
        If ``state`` is not in the ``(m_x, m_z)`` configuration.
    ChannelClassificationError
        If the resulting configuration is unreachable in one cycle.
    """
    if state.lattice is not lattice:
        raise ValueError("state was prepared on a different lattice")
    if classify_configuration(state) != 0:
        raise ValueError("one_cycle_channel needs a state in the (m_x, m_z) configuration")
    schedule = run_cycle(state, config, rng)
    found = stabilized_strings(state)
    index = _match(found)
    if index not in _CHANNEL_OF_CONFIGURATION:
        raise ChannelClassificationError(f"one cycle led to stabilized strings {sorted(found)}")
    channel = _CHANNEL_OF_CONFIGURATION[index]
    return (channel, schedule) if return_schedule else channel


def transition(state: CodeState, config: ProtocolConfig, rng: SeedLike) -> int:
    """Run one cycle from any configuration and return the configuration reached.

    Raises
    ------
    ChannelClassificationError
        If the result is none of the six configurations.
    """
    run_cycle(state, config, rng)
    found = stabilized_strings(state)
    index = _match(found)
    if index is None:
        raise ChannelClassificationError(f"cycle led to stabilized strings {sorted(found)}")
    return index


def run_realization(realization: int, *, config: ProtocolConfig) -> RunRecord:
    """Initialize and run ``config.cycles`` cycles, reading out after every red round."""
    rng = realization_rng(config.seed, realization)
    lattice = HoneycombLattice.build(config.L)
    state = initialize(lattice, rng)
    size = config.cycles + 1
    G = np.zeros(size, dtype=np.int8)
    corrected = np.zeros(size, dtype=np.int8) if config.corrected else None
    tees = np.zeros(size, dtype=np.int64) if config.record_tee else None
    defects = np.zeros(size, dtype=np.int64) if config.record_defects else None
    partition = default_partition(lattice) if config.record_tee else None

    for t in range(size):
        if t:
            run_cycle(state, config, rng)
        G[t] = readout_G(state)
        if corrected is not None:
            corrected[t] = config_readout(state, config)
        if tees is not None:
            tees[t] = tee(state.tableau, partition)
        if defects is not None:
            defects[t] = plaquette_defects(state.tableau, lattice).undetermined
    logger.debug(f"realization {realization}: mean G {G.mean():.3f}")
    return RunRecord(realization, config.seed, G, corrected, tees, defects, config)


def run_experiment(
    config: ProtocolConfig, executor: Optional[str] = None, workers: Optional[int] = None
) -> List[RunRecord]:
    """All realizations of ``config``, in realization order."""
    logger.info(
        f"running L={config.L} p_M={config.p_M} p_S={config.p_S} mode={config.miss_mode} "
        f"T={config.cycles} x {config.realizations}"
    )
    return map_realizations(run_realization, "realization", range(config.realizations), config, executor, workers)
