"""
Deterministic ensemble scheduling and the run driver.

Realizations 0..E-1 are cut into fixed-size batches. Batches run on a
thread pool, but results are collected in submission order, so every
reduction sees the same operands in the same order whatever the worker
count.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import polaring
from polaring.errors import ExclusionBudgetExceeded
from polaring.events import (
    EventEmitter,
    batch_finished_event,
    realization_excluded_event,
    run_failed_event,
    run_finished_event,
    run_started_event,
)
from polaring.runner.config import RunConfig, resolve_threads
from polaring.runner.output import (
    EXCLUDED,
    OK,
    OutputWriter,
    RunManifest,
    deviation_statistics,
    utc_now,
)

logger = logging.getLogger(__name__)

# A batch task receives its realization indices and returns
# (payload, {realization: reason}) for the members it had to drop.
BatchTask = Callable[[range], Tuple[Any, Dict[int, str]]]


@dataclass
class EnsembleOutcome:
    n_realizations: int
    payloads: List[Any] = field(default_factory=list)
    excluded: Dict[int, str] = field(default_factory=dict)

    @property
    def status(self) -> List[str]:
        return [EXCLUDED if i in self.excluded else OK for i in range(self.n_realizations)]

    @property
    def n_ok(self) -> int:
        return self.n_realizations - len(self.excluded)

    def over_budget(self, budget: float) -> bool:
        return len(self.excluded) > budget * self.n_realizations


class EnsembleScheduler:
    """
    Bounded worker pool over realization batches with ordered collection.

    Workers only read shared immutable inputs; the collector in the calling
    thread owns every result.
    """

    def __init__(self, threads: int = 1, batch_size: int = 16, emitter: Optional[EventEmitter] = None):
        if threads < 1:
            raise ValueError("threads must be >= 1")
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.threads = threads
        self.batch_size = batch_size
        self.emitter = emitter or EventEmitter()

    def batches(self, n_realizations: int) -> List[range]:
        return [
            range(first, min(first + self.batch_size, n_realizations))
            for first in range(0, n_realizations, self.batch_size)
        ]

    def _guarded(self, task: BatchTask, indices: range) -> Tuple[Any, Dict[int, str], float]:
        started = time.perf_counter()
        try:
            payload, excluded = task(indices)
        except Exception as e:
            logger.exception("batch %d-%d failed", indices.start, indices.stop - 1)
            payload = None
            excluded = {i: f"{type(e).__name__}: {e}" for i in indices}
        return payload, dict(excluded), time.perf_counter() - started

    def run(self, task: BatchTask, n_realizations: int) -> EnsembleOutcome:
        """Run ``task`` over every batch; payloads come back in batch order."""
        ranges = self.batches(n_realizations)
        outcome = EnsembleOutcome(n_realizations)

        if self.threads == 1 or len(ranges) == 1:
            results = (self._guarded(task, r) for r in ranges)
            self._collect(outcome, ranges, results)
        else:
            with ThreadPoolExecutor(max_workers=min(self.threads, len(ranges))) as ex:
                futures = [ex.submit(self._guarded, task, r) for r in ranges]
                self._collect(outcome, ranges, (fut.result() for fut in futures))
        return outcome

    def _collect(self, outcome: EnsembleOutcome, ranges: List[range], results) -> None:
        for number, (indices, (payload, excluded, elapsed)) in enumerate(zip(ranges, results)):
            for realization in sorted(excluded):
                logger.warning("realization %d excluded: %s", realization, excluded[realization])
                self.emitter.emit(realization_excluded_event(realization, excluded[realization]))
            outcome.excluded.update(excluded)
            if payload is not None:
                outcome.payloads.append(payload)
            self.emitter.emit(
                batch_finished_event(number, indices.start, len(indices), sorted(excluded), elapsed)
            )


def run_ensemble(
    config: RunConfig,
    force: bool = False,
    threads: Optional[int] = None,
    emitter: Optional[EventEmitter] = None,
):
    """
    Run the configured experiment and write its outputs and manifest.

    Returns:
        (RunManifest, experiment result)

    Raises:
        OutputExistsError: if the output directory holds files and force is off
        ExclusionBudgetExceeded: after writing outputs, if more than the
            configured share of realizations was excluded
    """
    from polaring.runner.experiments import make_experiment

    experiment = make_experiment(config.run.experiment)
    threads = threads or resolve_threads(config)
    writer = OutputWriter(config.run.output_dir, force=force)
    journal = EventEmitter()
    journal.add_file_handler(writer.journal_path)
    if emitter is not None:
        journal.add_handler(emitter.emit)
    emitter = journal

    started, clock = utc_now(), time.perf_counter()
    config_hash = config.config_hash()
    emitter.emit(run_started_event(experiment.name, config_hash, config.run.ensemble_size, threads))
    logger.info(
        "%s run %s: %d realizations on %d threads",
        experiment.name, config_hash[:12], config.run.ensemble_size, threads,
    )

    scheduler = EnsembleScheduler(threads, config.run.batch_size, emitter)
    try:
        result = experiment.run(config, scheduler)
        experiment.write(result, writer, plots=config.run.plots)
    except Exception as e:
        emitter.emit(run_failed_event(experiment.name, e))
        raise

    wall = time.perf_counter() - clock
    manifest = RunManifest(
        experiment=experiment.name,
        config_hash=config_hash,
        code_version=polaring.__version__,
        started=started,
        finished=utc_now(),
        wall_time_s=round(wall, 3),
        realization_status=result.outcome.status,
        deviation_stats=deviation_statistics(result.deviations),
        files=writer.checksums(),
    )
    writer.write_manifest(manifest)
    emitter.emit(run_finished_event(experiment.name, manifest.exclusion_count, wall, writer.written))

    if result.outcome.over_budget(config.run.exclusion_budget):
        raise ExclusionBudgetExceeded(
            f"{manifest.exclusion_count} of {config.run.ensemble_size} realizations excluded "
            f"(budget {config.run.exclusion_budget:.1%})"
        )
    return manifest, result
