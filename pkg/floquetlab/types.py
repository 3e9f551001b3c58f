"""Types definitions used by executors."""
from dataclasses import dataclass
from typing import Any, Callable, Generic, List, Optional, Sequence, Tuple, TypeVar, Union

from mypy_extensions import NamedArg

Config = Any
SingleArgumentStageFunction = Callable[[Any, NamedArg(type=Any, name="config")], Any]  # noqa: F821
NoArgumentStageFunction = Callable[[NamedArg(type=Any, name="config")], Any]  # noqa: F821
StageFunction = Union[NoArgumentStageFunction, SingleArgumentStageFunction]


@dataclass(frozen=True)
class Stage:
    """One step of a pipeline.

    Attributes
    ----------
    function : callable
        Called as ``function(item, config=config)`` for every item of
        ``mappable``, or as ``function(config=config)`` when there is none.
    name : str
        Used for task keys and log messages.
    mappable : sequence, optional
        Items to map over, typically realization indices or parameter points.
    """

    function: StageFunction
    name: str
    mappable: Optional[Sequence] = None


@dataclass(frozen=True)
class Pipeline:
    stages: Tuple[Stage, ...]
    config: Optional[Config] = None


# ParallelPipelines contains one or more pipelines, to be executed in parallel
ParallelPipelines = Tuple[Pipeline, ...]

# Per pipeline, per stage: a list of results in mappable order, or the single
# return value of an unmapped stage.
PipelineResults = List[List[Any]]

T = TypeVar("T")


class PipelineExecutor(Generic[T]):
    """Base class for pipeline-based execution engines.

    Executors prepare and execute scheduling plans, in whatever form is most
    convenient for users of that executor. Executing a plan returns
    :data:`PipelineResults`, so merges never depend on completion order.
    """

    def pipelines_to_plan(self, pipelines: ParallelPipelines) -> T:
        """Convert pipeline specifications into a plan."""
        raise NotImplementedError

    def execute_plan(self, plan: T, **kwargs) -> PipelineResults:
        """Execute a plan."""
        raise NotImplementedError
