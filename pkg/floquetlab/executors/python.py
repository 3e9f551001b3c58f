from typing import Callable

from floquetlab.types import ParallelPipelines, PipelineExecutor, PipelineResults

# PythonExecutor represents delayed execution tasks as functions that require
# no arguments.
Task = Callable[[], PipelineResults]


class PythonPipelineExecutor(PipelineExecutor[Task]):
    """An execution engine based on Python loops.

    Execution plans for PythonExecutor are functions that accept no arguments.
    """

    def pipelines_to_plan(self, pipelines: ParallelPipelines) -> Task:
        def plan():
            results = []
            for pipeline in pipelines:
                stage_results = []
                for stage in pipeline.stages:
                    if stage.mappable is not None:
                        stage_results.append([stage.function(m, config=pipeline.config) for m in stage.mappable])
                    else:
                        stage_results.append(stage.function(config=pipeline.config))
                results.append(stage_results)
            return results

        return plan

    def execute_plan(self, plan: Task, **kwargs) -> PipelineResults:
        # worker options only mean something to parallel executors
        return plan()
