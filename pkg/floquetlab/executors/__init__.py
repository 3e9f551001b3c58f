import os
from typing import Optional

from floquetlab.types import PipelineExecutor

from .python import PythonPipelineExecutor

__all__ = ["PythonPipelineExecutor", "get_executor"]

try:
    from .dask import DaskPipelineExecutor

    __all__.append("DaskPipelineExecutor")
except ImportError:
    pass

EXECUTOR_ENV = "FLOQUETLAB_EXECUTOR"


def get_executor(name: Optional[str] = None) -> PipelineExecutor:
    """Convert an executor name into an executor instance.

    ``None`` falls back to ``$FLOQUETLAB_EXECUTOR`` and then to ``"python"``.
    Imports are conditional to avoid hard dependencies.
    """
    if name is None:
        name = os.environ.get(EXECUTOR_ENV, "python")
    if name.lower() == "python":
        return PythonPipelineExecutor()
    elif name.lower() == "dask":
        from floquetlab.executors.dask import DaskPipelineExecutor

        return DaskPipelineExecutor()
    else:
        raise ValueError(f"unrecognized executor {name}")
