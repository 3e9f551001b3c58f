"""User-facing planned experiments."""
import itertools
import os
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from floquetlab.errors import FitError
from floquetlab.executors import get_executor
from floquetlab.observables import TimeSeries, decay_rate, fourier_components
from floquetlab.pipeline import execution_options, map_pipeline
from floquetlab.protocol import MISS_MODES, ProtocolConfig, RunRecord, run_realization
from floquetlab.types import PipelineExecutor

COMMANDS = ("gt", "sweep", "tee", "purify", "percolate", "markov", "collapse", "phase-diagram")
_PROTOCOL_COMMANDS = ("gt", "sweep", "tee", "purify", "markov", "phase-diagram")
_TEE_COMMANDS = ("tee", "phase-diagram")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one CLI invocation needs.

    Grid-valued fields (``L``, ``p_M``, ``p_S``, ``p_bond``) are tuples; the
    protocol commands run their full Cartesian product.
    """

    command: str
    output: str
    seed: Optional[int] = None
    L: Tuple[int, ...] = (12,)
    p_M: Tuple[float, ...] = (0.0,)
    p_S: Tuple[float, ...] = (0.0,)
    mode: str = "blue_green"
    cycles: int = 100
    realizations: int = 1
    d: Optional[int] = None
    corrected: bool = False
    ancillas: int = 10
    scramble: bool = True
    kind: str = "kagome"
    p_bond: Tuple[float, ...] = tuple(np.round(np.linspace(0.4, 0.6, 21), 6).tolist())
    samples: int = 1000
    criterion: str = "x"
    bootstrap: int = 100
    columns: bool = False
    input: Optional[str] = None
    ansatz: str = "plain"
    p_column: str = "p_M"
    y_column: str = "Gpi"
    sigma_column: str = "Gpi_stderr"
    size_column: str = "L"
    executor: Optional[str] = None
    workers: Optional[int] = None

    def __post_init__(self):
        for name in ("L", "p_M", "p_S", "p_bond"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}, expected one of {COMMANDS}")
        if self.seed is None:
            raise ValueError("seed is mandatory")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got seed={self.seed}")
        if not self.output:
            raise ValueError("output is mandatory")
        if not _writable(self.output):
            raise ValueError(f"output directory {self.output!r} is not writable")
        if self.mode not in MISS_MODES:
            raise ValueError(f"unknown mode {self.mode!r}, expected one of {MISS_MODES}")
        for name in ("L", "p_M", "p_S", "p_bond"):
            if not getattr(self, name):
                raise ValueError(f"{name} must list at least one value")
        for name in ("p_M", "p_S", "p_bond"):
            bad = [v for v in getattr(self, name) if not 0.0 <= v <= 1.0]
            if bad:
                raise ValueError(f"{name} values must lie in [0, 1], got {bad}")
        for name in ("realizations", "samples", "ancillas"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {name}={getattr(self, name)}")
        if self.bootstrap < 0:
            raise ValueError(f"bootstrap must be non-negative, got bootstrap={self.bootstrap}")
        if self.workers is not None and self.workers < 1:
            raise ValueError(f"workers must be positive, got workers={self.workers}")
        if self.command == "collapse":
            if self.input is None or not os.path.isfile(self.input):
                raise ValueError(f"collapse needs an existing input file, got input={self.input!r}")
        if self.command == "percolate" and len(set(self.L)) < 2:
            raise ValueError(f"percolate needs at least two sizes, got L={list(self.L)}")
        if self.command == "markov":
            if len(set(self.L)) > 1 or len(set(self.p_M)) > 1:
                raise ValueError(f"markov takes a single L and p_M, got L={list(self.L)}, p_M={list(self.p_M)}")
            if self.mode != "blue_green":
                raise ValueError(f"the transfer-matrix model needs mode='blue_green', got {self.mode!r}")
        if self.command in _PROTOCOL_COMMANDS:
            # surface ProtocolConfig errors before any work starts
            self.protocol_configs(record_tee=self.command in _TEE_COMMANDS)

    @classmethod
    def from_mapping(cls, command: str, values: Mapping[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)} - {"command"}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValueError(f"unknown config keys {unknown}")
        return cls(command=command, **values)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        for name in ("L", "p_M", "p_S", "p_bond"):
            out[name] = list(out[name])
        return out

    def points(self) -> List[Tuple[int, float, float]]:
        return list(itertools.product(self.L, self.p_M, self.p_S))

    def protocol_configs(self, **overrides) -> List[ProtocolConfig]:
        """One :class:`ProtocolConfig` per ``(L, p_M, p_S)`` point."""
        base = dict(
            miss_mode=self.mode,
            cycles=self.cycles,
            d=self.d,
            seed=self.seed,
            realizations=self.realizations,
            corrected=self.corrected,
        )
        base.update(overrides)
        return [ProtocolConfig(L=L, p_M=pm, p_S=ps, **base) for L, pm, ps in self.points()]


def _writable(path: str) -> bool:
    existing = os.path.abspath(path)
    while not os.path.exists(existing):
        parent = os.path.dirname(existing)
        if parent == existing:
            return False
        existing = parent
    return os.path.isdir(existing) and os.access(existing, os.W_OK)


class PlannedExperiment:
    """
    A delayed set of protocol runs.

    This holds the executor-specific plan for every parameter point and, when
    executed, returns the :class:`~floquetlab.protocol.RunRecord` list of each
    point in the order the configs were given.

    Examples
    --------
    >>> configs = [ProtocolConfig(L=3, cycles=4, realizations=2)]
    >>> planned = plan_experiment(configs)
    >>> planned
    <PlannedExperiment>
    * L=3 p_M=0.0 p_S=0.0 mode=blue_green T=4 x 2
    >>> [len(records) for records in planned.execute()]
    [2]
    """

    def __init__(self, executor: PipelineExecutor, plan: Any, configs: Sequence[ProtocolConfig], workers=None):
        self._executor = executor
        self._plan = plan
        self._configs = tuple(configs)
        self._workers = workers

    @property
    def plan(self):
        """Returns the executor-specific scheduling plan.

        The type of this object depends on the underlying execution engine.
        """
        return self._plan

    @property
    def configs(self) -> Tuple[ProtocolConfig, ...]:
        return self._configs

    def execute(self, **kwargs) -> List[List[RunRecord]]:
        """
        Run every realization of every point.

        Parameters
        ----------
        **kwargs
            Keyword arguments are forwarded to the executor's ``execute_plan``
            method, on top of the worker options.
        """
        options = execution_options(self._executor, self._workers)
        options.update(kwargs)
        results = self._executor.execute_plan(self._plan, **options)
        return [stages[-1] for stages in results]

    def __repr__(self):
        entries = "".join(
            f"\n* L={c.L} p_M={c.p_M} p_S={c.p_S} mode={c.miss_mode} T={c.cycles} x {c.realizations}"
            for c in self._configs
        )
        return f"<PlannedExperiment>{entries}"


def plan_experiment(
    configs: Sequence[ProtocolConfig], executor: Optional[str] = None, workers: Optional[int] = None
) -> PlannedExperiment:
    """
    Plan all realizations of several parameter points as parallel pipelines.

    Parameters
    ----------
    configs : sequence of ProtocolConfig
        One entry per parameter point.
    executor : str, optional
        ``python`` or ``dask``; defaults to ``$FLOQUETLAB_EXECUTOR``.
    workers : int, optional
        Defaults to ``$FLOQUETLAB_WORKERS``.

    Returns
    -------
    PlannedExperiment
    """
    engine = get_executor(executor)
    pipelines = tuple(map_pipeline(run_realization, "realization", range(c.realizations), c) for c in configs)
    return PlannedExperiment(engine, engine.pipelines_to_plan(pipelines), configs, workers)


# -- tabulation ----------------------------------------------------------------

_SERIES_FIELDS = ("G", "corrected_G", "tee", "defects")


def records_frame(records: Sequence[RunRecord]) -> pd.DataFrame:
    """Long-format frame ``realization, t, G[, corrected_G, tee, defects]``."""
    frames = []
    for record in records:
        data = {"realization": record.realization, "t": np.arange(len(record.G))}
        for name in _SERIES_FIELDS:
            values = getattr(record, name)
            if values is not None:
                data[name] = values
        frames.append(pd.DataFrame(data))
    return pd.concat(frames, ignore_index=True)


def series_from_frame(frame: pd.DataFrame, field: str = "G") -> TimeSeries:
    """Realization average of ``field`` from a :func:`records_frame`."""
    wide = frame.pivot(index="realization", columns="t", values=field).sort_index(axis=1)
    return TimeSeries.from_samples(wide.to_numpy(dtype=float))


def fourier_summary(frame: pd.DataFrame, field: str = "G", prefix: str = "") -> Dict[str, float]:
    """``G_0`` and ``G_pi`` with standard errors over realizations."""
    wide = frame.pivot(index="realization", columns="t", values=field).sort_index(axis=1).to_numpy(dtype=float)
    components = np.array([fourier_components(row) for row in wide])
    count = len(components)
    stderr = components.std(axis=0, ddof=1) / np.sqrt(count) if count > 1 else np.zeros(2)
    return {
        f"{prefix}G0": float(components[:, 0].mean()),
        f"{prefix}G0_stderr": float(stderr[0]),
        f"{prefix}Gpi": float(components[:, 1].mean()),
        f"{prefix}Gpi_stderr": float(stderr[1]),
    }


def decay_summary(frame: pd.DataFrame) -> Dict[str, float]:
    """Decay rate of the paired readout, NaN when no fit is possible."""
    try:
        fit = decay_rate(series_from_frame(frame))
    except (FitError, ValueError):
        return {"beta": float("nan"), "beta_stderr": float("nan")}
    return {"beta": fit.beta, "beta_stderr": fit.stderr}
