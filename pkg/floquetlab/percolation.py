"""Bond percolation on periodic lattices with winding detection.

Nodes carry integer cell coordinates; every bond stores the cell displacement
from its first to its second node. Merging clusters with a union-find that
tracks node offsets relative to the cluster root turns every closed loop into
a displacement vector, which is nonzero exactly when the loop winds around the
torus.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.interpolate import PchipInterpolator
from scipy.optimize import bisect

from floquetlab.errors import FitError
from floquetlab.pipeline import map_realizations
from floquetlab.rng import SeedLike, as_generator, realization_rng

if TYPE_CHECKING:  # pragma: no cover
    from floquetlab.lattice import HoneycombLattice

logger = logging.getLogger(__name__)

GRAPH_KINDS = ("kagome", "hexagonal", "square")
CRITERIA = ("x", "z", "either", "both")

# spawn key of the bootstrap stream, disjoint from the (sample, L) keys of the
# spanning samples
_BOOTSTRAP_STREAM = (0, 0, 1)


class PercolationGraph(NamedTuple):
    """A bond configuration on a periodic lattice.

    Attributes
    ----------
    kind : str
        ``kagome``, ``hexagonal`` or ``square``.
    L : int
        Period in cells along both directions.
    n_nodes : int
    bonds : np.ndarray
        ``(n_bonds, 2)`` node indices.
    displacements : np.ndarray
        ``(n_bonds, 2)`` cell displacement from the first to the second node.
    present : np.ndarray
        ``(n_bonds,)`` booleans.
    """

    kind: str
    L: int
    n_nodes: int
    bonds: np.ndarray
    displacements: np.ndarray
    present: np.ndarray

    @property
    def n_bonds(self) -> int:
        return int(self.bonds.shape[0])

    @property
    def n_present(self) -> int:
        return int(np.count_nonzero(self.present))

    def degrees(self) -> np.ndarray:
        return np.bincount(self.bonds.ravel(), minlength=self.n_nodes)

    def with_present(self, present: np.ndarray) -> "PercolationGraph":
        present = np.asarray(present, dtype=bool)
        if present.shape != (self.n_bonds,):
            raise ValueError(f"expected {self.n_bonds} bond flags, got shape {present.shape}")
        return self._replace(present=present)


class SpanResult(NamedTuple):
    """Winding of the largest-rank cluster.

    ``x`` / ``z`` are set when some cluster winds with a nonzero component
    along that direction; ``rank`` is the dimension (0, 1 or 2) of the
    winding lattice of the best cluster.
    """

    x: bool
    z: bool
    rank: int


class UnionFind:
    """Union-find with union by rank, path compression and node offsets.

    ``offset(node)`` is the displacement of ``node`` from its cluster root.
    Loops closed inside a cluster contribute their net displacement to the
    cluster's winding basis.
    """

    def __init__(self, size: int):
        self.parent = list(range(size))
        self.rank = [0] * size
        self.ox = [0] * size
        self.oy = [0] * size
        self.windings: Dict[int, List[Tuple[int, int]]] = {}
        self.num_components = size

    def find(self, x: int) -> Tuple[int, int, int]:
        """Return ``(root, dx, dy)`` with ``(dx, dy)`` the offset of ``x``."""
        path = []
        while self.parent[x] != x:
            path.append(x)
            x = self.parent[x]
        root = x
        ox = oy = 0
        for node in reversed(path):
            ox += self.ox[node]
            oy += self.oy[node]
            self.ox[node], self.oy[node] = ox, oy
            self.parent[node] = root
        if not path:
            return root, 0, 0
        return root, self.ox[path[0]], self.oy[path[0]]

    def _add_winding(self, root: int, w: Tuple[int, int]) -> None:
        basis = self.windings.setdefault(root, [])
        if len(basis) == 0:
            basis.append(w)
        elif len(basis) == 1:
            (ux, uy) = basis[0]
            if ux * w[1] - uy * w[0] != 0:
                basis.append(w)

    def union(self, a: int, b: int, dx: int = 0, dy: int = 0) -> bool:
        """Join ``a`` and ``b`` given ``position(b) = position(a) + (dx, dy)``.

        Returns True if two clusters merged.
        """
        ra, ax, ay = self.find(a)
        rb, bx, by = self.find(b)
        wx, wy = ax + dx - bx, ay + dy - by
        if ra == rb:
            if wx or wy:
                self._add_winding(ra, (wx, wy))
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
            wx, wy = -wx, -wy
        self.parent[rb] = ra
        self.ox[rb], self.oy[rb] = wx, wy
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        for w in self.windings.pop(rb, []):
            self._add_winding(ra, w)
        self.num_components -= 1
        return True

    def winding_basis(self, node: int) -> List[Tuple[int, int]]:
        return list(self.windings.get(self.find(node)[0], []))


# -- lattices ---------------------------------------------------------------


def _cells(L: int) -> Tuple[np.ndarray, np.ndarray]:
    j, i = np.divmod(np.arange(L * L), L)
    return i, j


@lru_cache(maxsize=None)
def _structure(kind: str, L: int) -> Tuple[int, np.ndarray, np.ndarray]:
    i, j = _cells(L)

    def cell(di, dj):
        return ((j + dj) % L) * L + (i + di) % L

    if kind == "square":
        here = cell(0, 0)
        bonds = [(here, cell(1, 0), (1, 0)), (here, cell(0, 1), (0, 1))]
        n_nodes = L * L
    elif kind == "hexagonal":
        # A = 2 * cell, B = 2 * cell + 1
        bonds = [
            (2 * cell(0, 0), 2 * cell(0, 0) + 1, (0, 0)),
            (2 * cell(0, 0) + 1, 2 * cell(0, 1), (0, 1)),
            (2 * cell(0, 0) + 1, 2 * cell(1, 0), (1, 0)),
        ]
        n_nodes = 2 * L * L
    elif kind == "kagome":
        # sites a, b, c of the up triangle in each cell
        a, b, c = 3 * cell(0, 0), 3 * cell(0, 0) + 1, 3 * cell(0, 0) + 2
        bonds = [
            (a, b, (0, 0)),
            (a, c, (0, 0)),
            (b, c, (0, 0)),
            (b, 3 * cell(1, 0), (1, 0)),
            (3 * cell(1, 0), 3 * cell(1, -1) + 2, (0, -1)),
            (3 * cell(1, -1) + 2, b, (-1, 1)),
        ]
        n_nodes = 3 * L * L
    else:
        raise ValueError(f"unknown graph kind {kind!r}, expected one of {GRAPH_KINDS}")
    pairs = np.concatenate([np.stack([u, v], axis=1) for u, v, _ in bonds]).astype(np.int64)
    disp = np.concatenate([np.tile(np.array(d, dtype=np.int64), (L * L, 1)) for _, _, d in bonds])
    pairs.flags.writeable = False
    disp.flags.writeable = False
    return n_nodes, pairs, disp


def lattice_graph(kind: str, L: int) -> PercolationGraph:
    """The full lattice with every bond present."""
    if L < 2:
        raise ValueError(f"L must be at least 2, got {L}")
    n_nodes, bonds, disp = _structure(kind, L)
    return PercolationGraph(kind, L, n_nodes, bonds, disp, np.ones(bonds.shape[0], dtype=bool))


def from_uniforms(kind: str, L: int, p_bond: float, uniforms: np.ndarray) -> PercolationGraph:
    """Bonds present where ``uniforms < p_bond``; shared uniforms couple samples across ``p_bond``."""
    if not 0.0 <= p_bond <= 1.0:
        raise ValueError(f"p_bond must lie in [0, 1], got {p_bond}")
    graph = lattice_graph(kind, L)
    return graph.with_present(np.asarray(uniforms) < p_bond)


def sample(kind: str, L: int, p_bond: float, rng: SeedLike) -> PercolationGraph:
    """Bond percolation sample: every bond present independently with probability ``p_bond``."""
    graph = lattice_graph(kind, L)
    return from_uniforms(kind, L, p_bond, as_generator(rng).random(graph.n_bonds))


def from_miss_sample(lattice: "HoneycombLattice", missed_links: Iterable[int]) -> PercolationGraph:
    """Contract every red link of ``lattice`` to a node.

    Green and blue links become the bonds of the resulting Kagome lattice and
    are present unless listed in ``missed_links``. Each node sits in the cell
    of its red link's first qubit.

    Raises
    ------
    ValueError
        If a red link is listed as missed.
    """
    red = lattice.links_by_color["red"]
    node_of_qubit = np.empty(lattice.n_qubits, dtype=np.int64)
    offset_of_qubit = np.zeros((lattice.n_qubits, 2), dtype=np.int64)
    for node, index in enumerate(red):
        link = lattice.links[index]
        u, v = link.qubits
        node_of_qubit[u] = node_of_qubit[v] = node
        offset_of_qubit[v] = link.shift

    bond_links = [k for k in range(len(lattice.links)) if lattice.links[k].color != "red"]
    position = {k: n for n, k in enumerate(bond_links)}
    present = np.ones(len(bond_links), dtype=bool)
    for k in missed_links:
        if lattice.links[k].color == "red":
            raise ValueError(f"link {k} is red; red links are contracted and cannot be missed")
        present[position[k]] = False

    bonds = np.empty((len(bond_links), 2), dtype=np.int64)
    disp = np.empty((len(bond_links), 2), dtype=np.int64)
    for n, k in enumerate(bond_links):
        link = lattice.links[k]
        u, v = link.qubits
        bonds[n] = node_of_qubit[u], node_of_qubit[v]
        disp[n] = np.asarray(link.shift) + offset_of_qubit[u] - offset_of_qubit[v]
    return PercolationGraph("kagome", lattice.L, len(red), bonds, disp, present)


# -- spanning -----------------------------------------------------------------


def cluster_forest(graph: PercolationGraph) -> UnionFind:
    uf = UnionFind(graph.n_nodes)
    for n in np.flatnonzero(graph.present):
        a, b = graph.bonds[n]
        dx, dy = graph.displacements[n]
        uf.union(int(a), int(b), int(dx), int(dy))
    return uf


def spans(graph: PercolationGraph) -> SpanResult:
    """Detect clusters winding around the torus."""
    uf = cluster_forest(graph)
    x = z = False
    rank = 0
    for basis in uf.windings.values():
        rank = max(rank, len(basis))
        x = x or any(w[0] != 0 for w in basis)
        z = z or any(w[1] != 0 for w in basis)
    return SpanResult(x, z, rank)


def _meets(result: SpanResult, criterion: str) -> bool:
    if criterion == "x":
        return result.x
    if criterion == "z":
        return result.z
    if criterion == "either":
        return result.x or result.z
    if criterion == "both":
        return result.rank == 2
    raise ValueError(f"unknown spanning criterion {criterion!r}, expected one of {CRITERIA}")


@dataclass(frozen=True)
class SpanningConfig:
    kind: str
    p_values: Tuple[float, ...]
    samples: int
    seed: int
    criterion: str = "x"


def _spanning_counts(L: int, *, config: SpanningConfig) -> List[int]:
    """Spanning counts at every ``p`` for one size, using coupled samples."""
    counts = np.zeros(len(config.p_values), dtype=np.int64)
    n_bonds = lattice_graph(config.kind, L).n_bonds
    for s in range(config.samples):
        uniforms = realization_rng(config.seed, s, L).random(n_bonds)
        for k, p in enumerate(config.p_values):
            graph = from_uniforms(config.kind, L, p, uniforms)
            counts[k] += _meets(spans(graph), config.criterion)
    logger.debug(f"{config.kind} L={L}: spanning counts {counts.tolist()}")
    return counts.tolist()


def spanning_table(
    kind: str,
    sizes: Sequence[int],
    p_values: Sequence[float],
    samples: int,
    seed: int,
    criterion: str = "x",
    executor: Optional[str] = None,
    workers: Optional[int] = None,
) -> pd.DataFrame:
    """Spanning probability for every ``(L, p_bond)``.

    Returns a frame with columns ``kind, L, p_bond, spanning_probability,
    stderr, samples``; suitable as input to :func:`floquetlab.collapse.collapse`.
    """
    if kind not in GRAPH_KINDS:
        raise ValueError(f"unknown graph kind {kind!r}, expected one of {GRAPH_KINDS}")
    if criterion not in CRITERIA:
        raise ValueError(f"unknown spanning criterion {criterion!r}, expected one of {CRITERIA}")
    if samples < 1:
        raise ValueError(f"samples must be positive, got {samples}")
    config = SpanningConfig(kind, tuple(float(p) for p in p_values), samples, seed, criterion)
    counts = map_realizations(_spanning_counts, "spanning", list(sizes), config, executor, workers)
    rows = []
    for L, per_p in zip(sizes, counts):
        for p, count in zip(config.p_values, per_p):
            prob = count / samples
            rows.append(
                {
                    "kind": kind,
                    "L": int(L),
                    "p_bond": p,
                    "spanning_probability": prob,
                    "stderr": np.sqrt(prob * (1 - prob) / samples),
                    "samples": samples,
                }
            )
    return pd.DataFrame(rows)


# -- threshold ------------------------------------------------------------------


class ThresholdEstimate(NamedTuple):
    """Crossing of spanning curves.

    Attributes
    ----------
    p_c : float
        Bond threshold estimate.
    stderr : float
        Parametric bootstrap standard deviation.
    missing_threshold : float
        The corresponding critical missing probability of the circuit.
    table : pd.DataFrame
        The spanning table the estimate came from.
    """

    p_c: float
    stderr: float
    missing_threshold: float
    table: pd.DataFrame


def missing_threshold(kind: str, p_c: float) -> float:
    """Critical missing probability implied by a bond threshold.

    Missing a blue or green link removes a Kagome bond, so the circuit
    threshold is ``1 - p_c``. When only green links can be missed the measured
    bonds form a triangular lattice whose dual is the hexagonal lattice, and
    the critical missing probability equals the hexagonal threshold itself.
    """
    if kind == "hexagonal":
        return p_c
    return 1.0 - p_c


def _pair_crossing(p: np.ndarray, small: np.ndarray, large: np.ndarray) -> float:
    f_small = PchipInterpolator(p, small)
    f_large = PchipInterpolator(p, large)
    grid = np.linspace(p[0], p[-1], 2001)
    d = f_large(grid) - f_small(grid)
    nonzero = np.flatnonzero(np.abs(d) > 1e-12)
    signs = np.sign(d[nonzero])
    changes = np.flatnonzero((signs[:-1] < 0) & (signs[1:] > 0))
    if changes.size == 0:
        raise FitError("spanning curves of consecutive sizes do not cross")
    jumps = d[nonzero[changes + 1]] - d[nonzero[changes]]
    k = changes[int(np.argmax(jumps))]
    lo, hi = grid[nonzero[k]], grid[nonzero[k + 1]]
    return float(bisect(lambda q: f_large(q) - f_small(q), lo, hi, xtol=1e-10))


def crossing_point(table: pd.DataFrame, column: str = "spanning_probability") -> float:
    """Mean crossing point of the curves of consecutive sizes.

    Raises
    ------
    FitError
        With fewer than two sizes or when some pair of curves does not cross.
    """
    sizes = sorted(table["L"].unique())
    if len(sizes) < 2:
        raise FitError(f"need at least two sizes to locate a crossing, got {sizes}")
    curves = {L: table[table["L"] == L].sort_values("p_bond") for L in sizes}
    crossings = []
    for small, large in zip(sizes[:-1], sizes[1:]):
        a, b = curves[small], curves[large]
        p = a["p_bond"].to_numpy(dtype=float)
        if not np.array_equal(p, b["p_bond"].to_numpy(dtype=float)):
            raise FitError(f"sizes {small} and {large} were sampled at different p_bond values")
        crossings.append(_pair_crossing(p, a[column].to_numpy(dtype=float), b[column].to_numpy(dtype=float)))
    logger.debug(f"pairwise crossings {crossings}")
    return float(np.mean(crossings))


def threshold_estimate(
    kind: str,
    sizes: Sequence[int],
    p_values: Sequence[float],
    samples: int,
    seed: int,
    criterion: str = "x",
    bootstrap: int = 100,
    executor: Optional[str] = None,
    workers: Optional[int] = None,
) -> ThresholdEstimate:
    """Locate the percolation threshold from the crossing of spanning curves.

    Curves are interpolated with monotone cubic splines; the crossing is
    bisected on the interpolants. The uncertainty comes from resampling every
    point's spanning count from its binomial distribution.
    """
    if len(set(sizes)) < 2:
        raise FitError(f"need at least two sizes, got {list(sizes)}")
    table = spanning_table(kind, sizes, p_values, samples, seed, criterion, executor, workers)
    return threshold_from_table(table, seed, bootstrap)


def threshold_from_table(table: pd.DataFrame, seed: int, bootstrap: int = 100) -> ThresholdEstimate:
    """Crossing and bootstrap error of an existing :func:`spanning_table`."""
    kind = str(table["kind"].iloc[0])
    sizes = table["L"].unique().tolist()
    samples = table["samples"].to_numpy(dtype=np.int64)
    p_c = crossing_point(table)
    rng = realization_rng(seed, *_BOOTSTRAP_STREAM)
    resampled = []
    for _ in range(bootstrap):
        fake = table.copy()
        fake["spanning_probability"] = rng.binomial(samples, table["spanning_probability"].to_numpy()) / samples
        try:
            resampled.append(crossing_point(fake))
        except FitError:
            continue
    stderr = float(np.std(resampled)) if len(resampled) > 1 else float("nan")
    logger.info(f"{kind} threshold {p_c:.5f} +- {stderr:.5f} from sizes {sorted(set(sizes))}")
    return ThresholdEstimate(p_c, stderr, missing_threshold(kind, p_c), table)


# -- cross-validation against the circuit -------------------------------------


class CrossValidation(NamedTuple):
    """Per-sample comparison of the percolation prediction with the circuit."""

    p_M: float
    samples: int
    agreement: float
    em_exchange_frequency: float
    spanning_frequency: float


def cross_validate(lattice: "HoneycombLattice", p_M: float, samples: int, seed: int) -> CrossValidation:
    """Feed the same missed-link samples to the circuit and to the percolation map.

    A cycle exchanges ``e`` and ``m`` exactly when the measured green and blue
    links connect the contracted red links into a cluster winding in both
    directions.
    """
    from floquetlab.protocol import ProtocolConfig, one_cycle_channel, prepare_channel_state

    config = ProtocolConfig(L=lattice.L, p_M=p_M, p_S=0.0, cycles=1, seed=seed)
    reference = prepare_channel_state(lattice, realization_rng(seed, 0, 1))
    agree = exchanged = spanning = 0
    for s in range(samples):
        rng = realization_rng(seed, s)
        channel, schedule = one_cycle_channel(reference.copy(), lattice, config, rng, return_schedule=True)
        predicted = spans(from_miss_sample(lattice, schedule.missed_links(lattice))).rank == 2
        actual = channel == "em_exchange"
        agree += predicted == actual
        exchanged += actual
        spanning += predicted
    return CrossValidation(p_M, samples, agree / samples, exchanged / samples, spanning / samples)
