"""Geometry and operator factory for the periodic honeycomb code.

Layout
------
Cells ``(i, j)`` with ``0 <= i, j < L`` carry two qubits, ``A(i, j)`` with
index ``2 * (j * L + i)`` and ``B(i, j)`` with the next index. Each cell owns
three links::

    kind 0   A(i, j) - B(i, j)        orientation z
    kind 1   B(i, j) - A(i, j + 1)    orientation x
    kind 2   B(i, j) - A(i + 1, j)    orientation y

Plaquette ``(a, b)`` has color ``(a + 2 b) mod 3`` (0 red, 1 green, 2 blue),
which closes on the torus when ``L`` is a multiple of 3. A link of kind ``k``
in cell ``(i, j)`` has color ``(i + 2 j + k) mod 3``; it joins the two
plaquettes of that color at its ends and borders two plaquettes of the other
colors. The link operator is ``XX``, ``YY`` or ``ZZ`` by orientation.
"""
import json
import logging
from collections import Counter, defaultdict, deque
from functools import lru_cache
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from floquetlab.pauli import PauliOperator, ordered_product
from floquetlab.percolation import PercolationGraph, from_miss_sample
from floquetlab.tableau import Gate, conjugate, invert_circuit

logger = logging.getLogger(__name__)

COLORS = ("red", "green", "blue")
ROUND_ORDER = ("blue", "green", "red")
ORIENTATIONS = ("z", "x", "y")
ORIENTATION_PAULI = {"x": "X", "y": "Y", "z": "Z"}
STRING_KINDS = ("m", "e", "f")
DIRECTIONS = ("x", "z", "xz")

# per link kind: cell displacement of the second qubit, of the joined
# plaquettes and of the bordering plaquettes (first -> second)
_SHIFT = ((0, 0), (0, 1), (1, 0))
_CONNECTS = (((0, 0), (1, 1)), ((1, 0), (0, 2)), ((0, 1), (2, 0)))
_BORDERS = (((1, 0), (0, 1)), ((0, 1), (1, 1)), ((1, 0), (1, 1)))


class Link(NamedTuple):
    """One edge of the honeycomb.

    Attributes
    ----------
    index : int
        ``3 * cell + kind``.
    kind : int
        0, 1 or 2, see the module docstring.
    cell : tuple of int
        Owning cell ``(i, j)``.
    qubits : tuple of int
        Endpoints; the first always sits in ``cell``.
    orientation : str
        ``x``, ``y`` or ``z``.
    color : str
        ``red``, ``green`` or ``blue``.
    shift : tuple of int
        Cell displacement from the first to the second endpoint.
    connects : tuple of int
        Plaquettes of the link's own color at its two ends.
    borders : tuple of int
        The two plaquettes the link is an edge of.
    """

    index: int
    kind: int
    cell: Tuple[int, int]
    qubits: Tuple[int, int]
    orientation: str
    color: str
    shift: Tuple[int, int]
    connects: Tuple[int, int]
    borders: Tuple[int, int]


class Plaquette(NamedTuple):
    """A hexagonal face with its six links and vertices in clockwise order."""

    index: int
    coords: Tuple[int, int]
    color: str
    links: Tuple[int, ...]
    qubits: Tuple[int, ...]


def _winding_cycle(
    edges: Sequence[Tuple[int, int, Tuple[int, int], int]],
    start: int,
    target: Tuple[int, int],
    bound: int,
) -> List[int]:
    """Shortest closed walk from ``start`` whose displacement equals ``target``.

    Searches the covering graph, states being ``(node, dx, dy)``. Returns the
    edge ids used an odd number of times.
    """
    adjacency: Dict[int, List[Tuple[int, int, int, int]]] = defaultdict(list)
    for a, b, (dx, dy), eid in edges:
        adjacency[a].append((b, dx, dy, eid))
        adjacency[b].append((a, -dx, -dy, eid))
    origin = (start, 0, 0)
    goal = (start,) + tuple(target)
    parent: Dict[Tuple[int, int, int], Optional[Tuple[Tuple[int, int, int], int]]] = {origin: None}
    queue = deque([origin])
    while queue:
        state = queue.popleft()
        node, ox, oy = state
        for nb, dx, dy, eid in adjacency[node]:
            nxt = (nb, ox + dx, oy + dy)
            if abs(nxt[1]) > bound or abs(nxt[2]) > bound or nxt in parent:
                continue
            parent[nxt] = (state, eid)
            if nxt == goal:
                used: Counter = Counter()
                cursor = nxt
                while parent[cursor] is not None:
                    cursor, step = parent[cursor]  # type: ignore
                    used[step] += 1
                return sorted(eid for eid, count in used.items() if count % 2)
            queue.append(nxt)
    raise RuntimeError(f"no closed walk with winding {target} from node {start}")


class HoneycombLattice:
    """The ``L x L`` honeycomb on a torus.

    Build instances with :meth:`build`, which shares one instance per ``L``.
    The geometry is fixed at construction; operator tables and logical
    strings are filled in lazily on first use and then reused.
    """

    def __init__(self, L: int):
        if L < 3 or L % 3:
            raise ValueError(f"L must be a positive multiple of 3 for a periodic 3-coloring, got L={L}")
        self.L = L
        self.n_qubits = 2 * L * L
        self.links: Tuple[Link, ...] = tuple(self._make_links())
        self.plaquettes: Tuple[Plaquette, ...] = tuple(self._make_plaquettes())
        by_color: Dict[str, List[int]] = {c: [] for c in COLORS}
        for link in self.links:
            by_color[link.color].append(link.index)
        self.links_by_color: Dict[str, Tuple[int, ...]] = {c: tuple(v) for c, v in by_color.items()}
        self._qubit_links = np.zeros((self.n_qubits, 3), dtype=np.int64)
        for link in self.links:
            for q in link.qubits:
                self._qubit_links[q, ORIENTATIONS.index(link.orientation)] = link.index
        self._link_ops: Dict[int, Tuple[PauliOperator, ...]] = {}
        self._single_ops: Dict[int, Tuple[Tuple[PauliOperator, PauliOperator], ...]] = {}
        self._plaquette_ops: Dict[int, Tuple[PauliOperator, ...]] = {}
        self._strings: Dict[Tuple[str, str], PauliOperator] = {}
        self._paths: Dict[Tuple[str, str], Tuple[int, ...]] = {}
        logger.debug(f"built honeycomb L={L}: {self.n_qubits} qubits, {len(self.links)} links")

    @classmethod
    def build(cls, L: int) -> "HoneycombLattice":
        return _cached_lattice(L)

    # -- indexing ------------------------------------------------------------

    def qubit(self, i: int, j: int, sublattice: str) -> int:
        L = self.L
        return 2 * ((j % L) * L + (i % L)) + (0 if sublattice == "A" else 1)

    def cell_of(self, qubit: int) -> Tuple[int, int]:
        cell = qubit // 2
        return cell % self.L, cell // self.L

    def plaquette_index(self, a: int, b: int) -> int:
        return (b % self.L) * self.L + (a % self.L)

    def color_of(self, a: int, b: int) -> str:
        return COLORS[(a + 2 * b) % 3]

    def link_index(self, i: int, j: int, kind: int) -> int:
        return 3 * ((j % self.L) * self.L + (i % self.L)) + kind

    def _make_links(self) -> Iterable[Link]:
        L = self.L
        for j in range(L):
            for i in range(L):
                for kind in range(3):
                    (si, sj) = _SHIFT[kind]
                    first = self.qubit(i, j, "A" if kind == 0 else "B")
                    second = self.qubit(i + si, j + sj, "B" if kind == 0 else "A")
                    connects = tuple(self.plaquette_index(i + di, j + dj) for di, dj in _CONNECTS[kind])
                    borders = tuple(self.plaquette_index(i + di, j + dj) for di, dj in _BORDERS[kind])
                    yield Link(
                        index=self.link_index(i, j, kind),
                        kind=kind,
                        cell=(i, j),
                        qubits=(first, second),
                        orientation=ORIENTATIONS[kind],
                        color=COLORS[(i + 2 * j + kind) % 3],
                        shift=_SHIFT[kind],
                        connects=connects,  # type: ignore
                        borders=borders,  # type: ignore
                    )

    def _make_plaquettes(self) -> Iterable[Plaquette]:
        L = self.L
        for b in range(L):
            for a in range(L):
                links = (
                    self.link_index(a, b - 1, 1),
                    self.link_index(a, b - 1, 0),
                    self.link_index(a - 1, b - 1, 2),
                    self.link_index(a - 1, b - 1, 1),
                    self.link_index(a - 1, b, 0),
                    self.link_index(a - 1, b, 2),
                )
                qubits = (
                    self.qubit(a, b, "A"),
                    self.qubit(a, b - 1, "B"),
                    self.qubit(a, b - 1, "A"),
                    self.qubit(a - 1, b - 1, "B"),
                    self.qubit(a - 1, b, "A"),
                    self.qubit(a - 1, b, "B"),
                )
                yield Plaquette(self.plaquette_index(a, b), (a, b), self.color_of(a, b), links, qubits)

    # -- operators -----------------------------------------------------------

    def _n(self, n_qubits: Optional[int]) -> int:
        n = self.n_qubits if n_qubits is None else n_qubits
        if n < self.n_qubits:
            raise ValueError(f"register of {n} qubits cannot hold a lattice of {self.n_qubits}")
        return n

    def link_operators(self, n_qubits: Optional[int] = None) -> Tuple[PauliOperator, ...]:
        """Check operators of all links, indexed like :attr:`links`.

        ``n_qubits`` pads the operators for registers with extra ancillas.
        """
        n = self._n(n_qubits)
        if n not in self._link_ops:
            ops = []
            for link in self.links:
                letter = ORIENTATION_PAULI[link.orientation]
                ops.append(PauliOperator.from_sparse(n, {q: letter for q in link.qubits}))
            self._link_ops[n] = tuple(ops)
        return self._link_ops[n]

    def link_operator(self, link: int) -> PauliOperator:
        return self.link_operators()[link]

    def single_qubit_operators(self, n_qubits: Optional[int] = None) -> Tuple[Tuple[PauliOperator, PauliOperator], ...]:
        """Per link, the two single-qubit factors of its check operator."""
        n = self._n(n_qubits)
        if n not in self._single_ops:
            pairs = []
            for link in self.links:
                letter = ORIENTATION_PAULI[link.orientation]
                u, v = link.qubits
                pairs.append((PauliOperator.from_sparse(n, {u: letter}), PauliOperator.from_sparse(n, {v: letter})))
            self._single_ops[n] = tuple(pairs)
        return self._single_ops[n]

    def plaquette_operators(self, n_qubits: Optional[int] = None) -> Tuple[PauliOperator, ...]:
        n = self._n(n_qubits)
        if n not in self._plaquette_ops:
            links = self.link_operators(n)
            self._plaquette_ops[n] = tuple(ordered_product([links[k] for k in p.links]) for p in self.plaquettes)
        return self._plaquette_ops[n]

    def plaquette_operator(self, plaquette: int) -> PauliOperator:
        """Clockwise product of the six link operators around ``plaquette``."""
        return self.plaquette_operators()[plaquette]

    def plaquettes_of_color(self, color: str) -> Tuple[int, ...]:
        return tuple(p.index for p in self.plaquettes if p.color == color)

    # -- logical strings -----------------------------------------------------

    def _superlattice_edges(self, kind: str) -> Tuple[List[Tuple[int, int, Tuple[int, int], int]], List[int]]:
        """Red links as edges of the primal (``m``) or dual (``e``) superlattice."""
        edges = []
        for index in self.links_by_color["red"]:
            link = self.links[index]
            if kind == "m":
                offsets, ends = _BORDERS[link.kind], link.borders
            else:
                offsets, ends = _CONNECTS[link.kind], link.connects
            disp = (offsets[1][0] - offsets[0][0], offsets[1][1] - offsets[0][1])
            edges.append((ends[0], ends[1], disp, index))
        node_colors = ("green", "blue") if kind == "m" else ("red",)
        nodes = [p.index for p in self.plaquettes if p.color in node_colors]
        return edges, nodes

    def logical_path(self, kind: str, direction: str) -> Tuple[int, ...]:
        """Link indices supporting the canonical ``kind`` string along ``direction``.

        For ``m`` and ``e`` these are red links forming a winding cycle of the
        primal or dual superlattice; for ``f`` they are the honeycomb links of
        a straight loop through row 0 (``x``) or column 0 (``z``).
        """
        if kind not in STRING_KINDS or direction not in DIRECTIONS:
            raise ValueError(f"invalid logical string ({kind!r}, {direction!r})")
        key = (kind, direction)
        if key in self._paths:
            return self._paths[key]
        L = self.L
        if direction == "xz":
            path = tuple(sorted(set(self.logical_path(kind, "x")) ^ set(self.logical_path(kind, "z"))))
        elif kind == "f":
            if direction == "x":
                path = tuple(k for i in range(L) for k in (self.link_index(i, 0, 0), self.link_index(i, 0, 2)))
            else:
                path = tuple(k for j in range(L) for k in (self.link_index(0, j, 0), self.link_index(0, j, 1)))
        else:
            edges, nodes = self._superlattice_edges(kind)
            target = (L, 0) if direction == "x" else (0, L)
            path = tuple(_winding_cycle(edges, min(nodes), target, bound=2 * L))
        self._paths[key] = path
        return path

    def _string_operator(self, kind: str, direction: str) -> PauliOperator:
        n = self.n_qubits
        if direction == "xz":
            return self.logical_string(kind, "x").multiply(self.logical_string(kind, "z"))
        path = self.logical_path(kind, direction)
        if kind == "f":
            links = self.link_operators()
            return ordered_product([links[k] for k in path])
        if kind == "m":
            sparse = {}
            for k in path:
                link = self.links[k]
                sparse[link.qubits[0]] = ORIENTATION_PAULI[link.orientation]
            return PauliOperator.from_sparse(n, sparse)
        plaquette_ops = self.plaquette_operators()
        pieces = []
        for k in path:
            link = self.links[k]
            green = next(p for p in link.borders if self.plaquettes[p].color == "green")
            pieces.append(plaquette_ops[green].restrict(link.qubits).with_sign(False))
        return ordered_product(pieces).with_sign(False)

    def logical_string(self, kind: str, direction: str, n_qubits: Optional[int] = None) -> PauliOperator:
        """Non-contractible ``e``, ``m`` or ``f`` loop operator.

        ``m`` strings act with the link Pauli on the first qubit of every red
        link along a primal superlattice cycle; ``e`` strings act with the
        bordering green plaquette on both qubits of every red link along a
        dual cycle; ``f`` strings are products of link operators along a
        straight honeycomb loop. ``xz`` strings are products of the ``x`` and
        ``z`` representatives.
        """
        if kind not in STRING_KINDS or direction not in DIRECTIONS:
            raise ValueError(f"invalid logical string ({kind!r}, {direction!r})")
        key = (kind, direction)
        if key not in self._strings:
            self._strings[key] = self._string_operator(kind, direction)
        op = self._strings[key]
        return op if n_qubits is None else op.pad(self._n(n_qubits))

    def logical_strings(self, n_qubits: Optional[int] = None) -> Dict[str, PauliOperator]:
        """All nine strings keyed ``"m_x"``, ``"e_xz"`` and so on."""
        return {
            f"{kind}_{direction}": self.logical_string(kind, direction, n_qubits)
            for kind in STRING_KINDS
            for direction in DIRECTIONS
        }

    # -- superlattice reduction ----------------------------------------------

    def disentangling_circuit(self, color: str = "red") -> List[Gate]:
        """Gates mapping each measured ``color`` link onto a single-qubit stabilizer.

        ``x`` links get ``CX(u, v)``, ``z`` links ``CX(v, u)`` and ``y`` links
        ``CY(u, v)``; afterwards qubit ``u`` of every link carries the link's
        Pauli and the remaining qubits host the superlattice toric code.
        """
        if color not in COLORS:
            raise ValueError(f"unknown color {color!r}")
        gates = []
        for index in self.links_by_color[color]:
            link = self.links[index]
            u, v = link.qubits
            if link.orientation == "x":
                gates.append(Gate("CX", (u, v)))
            elif link.orientation == "z":
                gates.append(Gate("CX", (v, u)))
            else:
                gates.append(Gate("CY", (u, v)))
        return gates

    def superlattice_qubits(self, color: str = "red") -> Tuple[int, ...]:
        """Second qubit of every ``color`` link, where the disentangled toric code lives."""
        if color not in COLORS:
            raise ValueError(f"unknown color {color!r}")
        return tuple(self.links[k].qubits[1] for k in self.links_by_color[color])

    def to_superlattice(self, op: PauliOperator, color: str = "red") -> PauliOperator:
        """``U op U^dagger`` for the disentangling circuit ``U``, minus its first-qubit factors.

        Raises
        ------
        ValueError
            If ``op`` does not commute with every ``color`` link.
        """
        image = conjugate(op, self.disentangling_circuit(color))
        letters = image.letters()
        for index in self.links_by_color[color]:
            link = self.links[index]
            pauli = ORIENTATION_PAULI[link.orientation]
            if letters.get(link.qubits[0], pauli) != pauli:
                raise ValueError(f"operator does not commute with {color} link {index}")
        return image.restrict(self.superlattice_qubits(color))

    def from_superlattice(self, op: PauliOperator, color: str = "red") -> PauliOperator:
        """``U^dagger op U``: a superlattice operator carried back to the honeycomb."""
        return conjugate(op, invert_circuit(self.disentangling_circuit(color)))

    def kagome_instance(self, missed_links: Iterable[int]) -> PercolationGraph:
        """Bond percolation graph with red links contracted to nodes."""
        return from_miss_sample(self, missed_links)

    # -- distances and serialization -----------------------------------------

    def neighbors(self, qubit: int) -> Tuple[int, int, int]:
        out = []
        for k in self._qubit_links[qubit]:
            u, v = self.links[int(k)].qubits
            out.append(v if u == qubit else u)
        return tuple(out)  # type: ignore

    def qubit_distances(self, sources: Iterable[int]) -> np.ndarray:
        """Graph distance, in honeycomb edges, from the nearest source qubit."""
        dist = np.full(self.n_qubits, -1, dtype=np.int64)
        queue = deque()
        for q in sources:
            if dist[q] < 0:
                dist[q] = 0
                queue.append(q)
        while queue:
            q = queue.popleft()
            for nb in self.neighbors(q):
                if dist[nb] < 0:
                    dist[nb] = dist[q] + 1
                    queue.append(nb)
        return dist

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "n_qubits": self.n_qubits,
            "links": [
                {
                    "index": link.index,
                    "qubits": list(link.qubits),
                    "orientation": link.orientation,
                    "color": link.color,
                    "connects": list(link.connects),
                    "borders": list(link.borders),
                }
                for link in self.links
            ],
            "plaquettes": [
                {"index": p.index, "coords": list(p.coords), "color": p.color, "links": list(p.links)}
                for p in self.plaquettes
            ],
            "logical_paths": {
                f"{kind}_{direction}": list(self.logical_path(kind, direction))
                for kind in STRING_KINDS
                for direction in ("x", "z")
            },
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def __repr__(self) -> str:
        return f"<HoneycombLattice L={self.L} qubits={self.n_qubits}>"


@lru_cache(maxsize=None)
def _cached_lattice(L: int) -> HoneycombLattice:
    return HoneycombLattice(L)


def build(L: int) -> HoneycombLattice:
    return HoneycombLattice.build(L)
