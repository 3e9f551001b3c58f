import json

import numpy as np
import pytest

from floquetlab.lattice import COLORS, ORIENTATION_PAULI, HoneycombLattice
from floquetlab.observables import default_partition, tee
from floquetlab.pauli import PauliOperator
from floquetlab.protocol import initialize
from floquetlab.tableau import invert_circuit


@pytest.fixture(scope="module", params=[3, 6])
def lattice(request):
    return HoneycombLattice.build(request.param)


def test_counts(lattice):
    L = lattice.L
    assert lattice.n_qubits == 2 * L * L
    assert len(lattice.links) == 3 * L * L
    assert len(lattice.plaquettes) == L * L
    for color in COLORS:
        assert len(lattice.links_by_color[color]) == L * L
        assert len(lattice.plaquettes_of_color(color)) == L * L // 3


def test_every_qubit_has_one_link_per_orientation(lattice):
    seen = {}
    for link in lattice.links:
        for q in link.qubits:
            seen.setdefault(q, []).append(link.orientation)
    assert len(seen) == lattice.n_qubits
    assert all(sorted(v) == ["x", "y", "z"] for v in seen.values())


def test_links_connect_plaquettes_of_their_color(lattice):
    for link in lattice.links:
        assert [lattice.plaquettes[p].color for p in link.connects] == [link.color, link.color]
        assert all(lattice.plaquettes[p].color != link.color for p in link.borders)


def test_build_is_cached():
    lattice = HoneycombLattice.build(3)
    assert lattice is HoneycombLattice.build(3)
    # operator tables are filled once per register size and then shared
    assert lattice.link_operators() is lattice.link_operators()
    padded = lattice.plaquette_operators(lattice.n_qubits + 2)
    assert padded is lattice.plaquette_operators(lattice.n_qubits + 2)
    assert padded is not lattice.plaquette_operators()
    assert lattice.logical_string("e", "x") is lattice.logical_string("e", "x")


@pytest.mark.parametrize("L", [0, 2, 4, 8])
def test_invalid_size(L):
    with pytest.raises(ValueError, match="multiple of 3"):
        HoneycombLattice(L)


def test_link_operators(lattice):
    for link, op in zip(lattice.links, lattice.link_operators()):
        assert op.support == tuple(sorted(link.qubits))
        assert set(op.letters().values()) == {ORIENTATION_PAULI[link.orientation]}


def test_plaquettes_commute_with_every_check(lattice):
    links = lattice.link_operators()
    for plaquette in lattice.plaquette_operators():
        assert plaquette.weight == 6
        assert all(plaquette.commutes(op) for op in links)
    plaquettes = lattice.plaquette_operators()
    assert all(a.commutes(b) for a in plaquettes for b in plaquettes)


def test_logical_strings_commute_with_red_checks_and_plaquettes(lattice):
    links = lattice.link_operators()
    red = [links[k] for k in lattice.links_by_color["red"]]
    plaquettes = lattice.plaquette_operators()
    strings = lattice.logical_strings()
    assert sorted(strings) == sorted(f"{k}_{d}" for k in "mef" for d in ("x", "z", "xz"))
    for name, string in strings.items():
        assert not string.is_identity(), name
        assert all(string.commutes(op) for op in red), name
        assert all(string.commutes(op) for op in plaquettes), name


@pytest.mark.parametrize(
    "a, b, expected",
    [
        ("m_x", "m_z", True),  # same kind
        ("e_x", "e_z", True),
        ("m_x", "e_x", True),  # parallel loops
        ("m_x", "e_z", False),  # crossing loops of different kinds
        ("m_z", "e_x", False),
        ("f_x", "f_z", True),
        ("m_x", "f_z", False),
        ("m_xz", "e_xz", True),
        ("m_x", "e_xz", False),
    ],
)
def test_logical_algebra(lattice, a, b, expected):
    strings = lattice.logical_strings()
    assert strings[a].commutes(strings[b]) is expected


def test_strings_pad_for_ancillas(lattice):
    padded = lattice.logical_string("m", "x", lattice.n_qubits + 4)
    assert padded.n == lattice.n_qubits + 4
    assert padded.support == lattice.logical_string("m", "x").support
    with pytest.raises(ValueError, match="cannot hold"):
        lattice.logical_string("m", "x", lattice.n_qubits - 1)


def test_invalid_string(lattice):
    with pytest.raises(ValueError, match="invalid logical string"):
        lattice.logical_string("q", "x")
    with pytest.raises(ValueError, match="invalid logical string"):
        lattice.logical_path("m", "y")


def test_fermion_is_product_of_electric_and_magnetic(lattice):
    # m_x e_x f_x lies in the instantaneous stabilizer group after a red round
    state = initialize(lattice, np.random.default_rng(3))
    strings = state.logical_strings()
    product = strings["m_x"].multiply(strings["e_x"]).multiply(strings["f_x"])
    assert state.tableau.expectation(product) != 0


def test_disentangling_circuit(lattice):
    state = initialize(lattice, np.random.default_rng(5))
    state.tableau.apply_circuit(lattice.disentangling_circuit("red"))
    for index in lattice.links_by_color["red"]:
        link = lattice.links[index]
        single = PauliOperator.from_sparse(lattice.n_qubits, {link.qubits[0]: ORIENTATION_PAULI[link.orientation]})
        assert state.tableau.expectation(single) != 0
    with pytest.raises(ValueError, match="unknown color"):
        lattice.disentangling_circuit("purple")


@pytest.fixture(scope="module")
def lattice6():
    return HoneycombLattice.build(6)


def test_disentangled_plaquettes_are_superlattice_stabilizers(lattice6):
    state = initialize(lattice6, np.random.default_rng(6))
    state.tableau.apply_circuit(lattice6.disentangling_circuit())
    hosts = set(lattice6.superlattice_qubits())
    assert len(hosts) == lattice6.n_qubits // 2
    for plaquette, op in zip(lattice6.plaquettes, lattice6.plaquette_operators()):
        reduced = lattice6.to_superlattice(op)
        assert set(reduced.support) <= hosts
        # red plaquettes become six-edge vertices, green and blue ones triangles
        assert reduced.weight == (6 if plaquette.color == "red" else 3)
        assert state.tableau.expectation(reduced) != 0


def test_tee_survives_the_disentangling_circuit(lattice6):
    state = initialize(lattice6, np.random.default_rng(7))
    state.tableau.apply_circuit(lattice6.disentangling_circuit())
    assert tee(state.tableau, default_partition(lattice6)) == 1


def test_disentangling_round_trip(lattice6):
    state = initialize(lattice6, np.random.default_rng(8))
    operators = list(lattice6.plaquette_operators()) + list(lattice6.logical_strings().values())
    operators += [lattice6.link_operator(k) for k in lattice6.links_by_color["red"]]
    before = [state.tableau.expectation(op) for op in operators]
    gates = lattice6.disentangling_circuit()
    state.tableau.apply_circuit(gates)
    state.tableau.apply_circuit(invert_circuit(gates))
    assert [state.tableau.expectation(op) for op in operators] == before


@pytest.mark.parametrize("name", ["m_x", "m_z", "e_x", "e_z"])
def test_logical_strings_match_superlattice_strings(lattice6, name):
    kind, direction = name.split("_")
    string = lattice6.logical_string(kind, direction)
    reduced = lattice6.to_superlattice(string)
    assert set(reduced.support) <= set(lattice6.superlattice_qubits())
    # carried back, the superlattice string differs from the honeycomb one by red links only
    difference = lattice6.from_superlattice(reduced).multiply(string)
    for index in lattice6.links_by_color["red"]:
        u, v = lattice6.links[index].qubits
        assert (u in difference.support) == (v in difference.support)
    state = initialize(lattice6, np.random.default_rng(9))
    assert state.tableau.expectation(difference) != 0
    for other in ("m_x", "m_z", "e_x", "e_z"):
        partner = lattice6.logical_string(*other.split("_"))
        assert reduced.commutes(lattice6.to_superlattice(partner)) == string.commutes(partner)


def test_to_superlattice_needs_commuting_operators(lattice6):
    link = lattice6.links[lattice6.links_by_color["red"][0]]
    flip = "Z" if link.orientation == "x" else "X"
    with pytest.raises(ValueError, match="does not commute"):
        lattice6.to_superlattice(PauliOperator.from_sparse(lattice6.n_qubits, {link.qubits[0]: flip}))


def test_kagome_instance(lattice):
    graph = lattice.kagome_instance([])
    L = lattice.L
    assert graph.n_nodes == L * L
    assert graph.n_bonds == 2 * L * L
    assert graph.n_present == graph.n_bonds
    # every contracted red link touches four green or blue links
    assert (graph.degrees() == 4).all()
    green = lattice.links_by_color["green"][0]
    assert lattice.kagome_instance([green]).n_present == graph.n_bonds - 1
    with pytest.raises(ValueError, match="is red"):
        lattice.kagome_instance([lattice.links_by_color["red"][0]])


def test_qubit_distances(lattice):
    dist = lattice.qubit_distances([0])
    assert dist[0] == 0
    assert all(dist[q] == 1 for q in lattice.neighbors(0))
    assert (dist >= 0).all()


def test_to_json(lattice):
    data = json.loads(lattice.to_json())
    assert data["L"] == lattice.L
    assert len(data["links"]) == len(lattice.links)
    assert len(data["plaquettes"]) == len(lattice.plaquettes)
    assert set(data["logical_paths"]) == {f"{k}_{d}" for k in "mef" for d in "xz"}
    assert repr(lattice) == f"<HoneycombLattice L={lattice.L} qubits={lattice.n_qubits}>"
