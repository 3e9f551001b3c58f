"""Turning realization grids into executor pipelines."""
import logging
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence

from floquetlab.executors import PythonPipelineExecutor, get_executor
from floquetlab.types import ParallelPipelines, Pipeline, PipelineExecutor, Stage, StageFunction

logger = logging.getLogger(__name__)

WORKERS_ENV = "FLOQUETLAB_WORKERS"


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        workers = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if workers < 1:
        raise ValueError(f"{WORKERS_ENV} must be positive, got {workers}")
    return workers


def execution_options(executor: PipelineExecutor, workers: Optional[int] = None) -> Dict[str, Any]:
    """Keyword arguments for ``execute_plan`` giving ``workers`` parallel workers."""
    workers = default_workers() if workers is None else workers
    if workers < 1:
        raise ValueError(f"workers must be positive, got {workers}")
    if isinstance(executor, PythonPipelineExecutor):
        return {}
    if workers == 1:
        return {"scheduler": "single-threaded"}
    return {"scheduler": "processes", "num_workers": workers}


def map_pipeline(function: StageFunction, name: str, items: Iterable, config: Any) -> Pipeline:
    """A single-stage pipeline mapping ``function`` over ``items``."""
    return Pipeline((Stage(function, name, mappable=list(items)),), config=config)


def pipelines_for_points(
    function: StageFunction, name: str, items: Sequence, configs: Sequence[Any]
) -> ParallelPipelines:
    """One pipeline per parameter point, all mapping over the same ``items``."""
    return tuple(map_pipeline(function, name, items, config) for config in configs)


def execute_pipelines(
    pipelines: ParallelPipelines,
    executor: Optional[str] = None,
    workers: Optional[int] = None,
) -> List[List[Any]]:
    """Run pipelines and return, per pipeline, the results of its last stage."""
    engine = get_executor(executor)
    plan = engine.pipelines_to_plan(pipelines)
    logger.info(f"executing {len(pipelines)} pipeline(s) with {type(engine).__name__}")
    results = engine.execute_plan(plan, **execution_options(engine, workers))
    return [stages[-1] for stages in results]


def map_realizations(
    function: StageFunction,
    name: str,
    items: Iterable,
    config: Any,
    executor: Optional[str] = None,
    workers: Optional[int] = None,
) -> List[Any]:
    """``[function(item, config=config) for item in items]`` on the chosen executor."""
    return execute_pipelines((map_pipeline(function, name, items, config),), executor, workers)[0]
