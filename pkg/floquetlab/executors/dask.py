from typing import Any, List

import dask
from dask.delayed import Delayed, delayed

from floquetlab.types import ParallelPipelines, Pipeline, PipelineExecutor, PipelineResults


def wrap_map_task(function):
    # dependencies are dummy args used to create dependence between stages
    def wrapped(map_arg, config, *dependencies):
        return function(map_arg, config=config)

    return wrapped


def wrap_standalone_task(function):
    def wrapped(config, *dependencies):
        return function(config=config)

    return wrapped


def checkpoint(*args):
    return list(args)


def append_token(task_name: str, token: str) -> str:
    return f"{task_name}-{token}"


class DaskPipelineExecutor(PipelineExecutor[List[Delayed]]):
    """An execution engine based on dask.

    Execution plans for DaskExecutors are lists of ``dask.delayed`` objects,
    one per pipeline. ``execute_plan`` forwards its keyword arguments to
    ``dask.compute``, e.g. ``scheduler="processes", num_workers=8``.
    """

    def pipelines_to_plan(self, pipelines: ParallelPipelines) -> List[Delayed]:
        return [_make_pipeline(pipeline) for pipeline in pipelines]

    def execute_plan(self, plan: List[Delayed], **kwargs) -> PipelineResults:
        return [list(results) for results in dask.compute(*plan, **kwargs)]


def _make_pipeline(pipeline: Pipeline) -> Delayed:
    token = dask.base.tokenize(
        pipeline.config,
        [(stage.name, None if stage.mappable is None else list(stage.mappable)) for stage in pipeline.stages],
    )
    config = delayed(pipeline.config, name=append_token("config", token))

    prev: Any = config
    stage_outputs = []
    for stage in pipeline.stages:
        stage_key = append_token(stage.name, token)
        if stage.mappable is None:
            func = wrap_standalone_task(stage.function)
            output = delayed(func)(config, prev, dask_key_name=stage_key)
        else:
            func = wrap_map_task(stage.function)
            tasks = [
                delayed(func)(item, config, prev, dask_key_name=f"{stage_key}-{i}")
                for i, item in enumerate(stage.mappable)
            ]
            output = delayed(checkpoint)(*tasks, dask_key_name=f"{stage.name}-checkpoint-{token}")
        stage_outputs.append(output)
        prev = output

    return delayed(checkpoint)(*stage_outputs, dask_key_name=append_token("pipeline", token))
