"""Top-level package for floquetlab."""
try:
    from ._version import __version__  # type: ignore
except ImportError:
    __version__ = "unknown"

from .lattice import HoneycombLattice
from .pauli import PauliOperator
from .protocol import ProtocolConfig, run_experiment
from .tableau import StabilizerState
