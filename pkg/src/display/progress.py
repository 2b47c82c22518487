#!/usr/bin/env python3
"""
Progress tracking and time estimation for Monte Carlo experiments.
Counts finished replications per stage and estimates the remaining time.
"""

from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Callable, List, Optional


@dataclass
class ExperimentStage:
    """One block of replications at a fixed sample size."""
    label: str
    n: int
    total: int
    done: int = 0
    status: str = "pending"  # pending, running, completed


@dataclass
class ExperimentProgress:
    """Overall progress of one experiment."""
    experiment: str
    stages: List[ExperimentStage] = field(default_factory=list)
    start_time: Optional[datetime] = None

    @property
    def total(self) -> int:
        return sum(s.total for s in self.stages)

    @property
    def done(self) -> int:
        return sum(s.done for s in self.stages)

    @property
    def progress_percent(self) -> float:
        if self.total == 0:
            return 0.0
        return self.done / self.total * 100

    @property
    def elapsed_time(self) -> timedelta:
        if not self.start_time:
            return timedelta(0)
        return datetime.now() - self.start_time

    @property
    def remaining_time(self) -> timedelta:
        """Linear extrapolation from the replications finished so far."""
        if not self.start_time or self.done == 0 or self.done >= self.total:
            return timedelta(0)
        per_replication = self.elapsed_time.total_seconds() / self.done
        return timedelta(seconds=per_replication * (self.total - self.done))


class ProgressTracker:
    """Replication progress with callbacks for the console."""

    def __init__(self):
        self.current_progress: Optional[ExperimentProgress] = None
        self.callbacks: List[Callable[[ExperimentProgress], None]] = []

    def add_callback(self, callback: Callable[[ExperimentProgress], None]):
        self.callbacks.append(callback)

    def _notify_callbacks(self):
        for callback in self.callbacks:
            try:
                callback(self.current_progress)
            except Exception:
                pass  # display problems never stop an experiment

    def start_experiment(self, experiment: str, stages: List[ExperimentStage]):
        self.current_progress = ExperimentProgress(experiment, stages, datetime.now())
        self._notify_callbacks()

    def stage(self, label: str) -> Optional[ExperimentStage]:
        if not self.current_progress:
            return None
        for s in self.current_progress.stages:
            if s.label == label:
                return s
        return None

    def advance(self, label: str, done: int):
        """Record that `done` replications of a stage have finished."""
        s = self.stage(label)
        if s is None:
            return
        s.done = min(done, s.total)
        s.status = "completed" if s.done >= s.total else "running"
        self._notify_callbacks()

    def is_complete(self) -> bool:
        if not self.current_progress:
            return False
        return self.current_progress.done >= self.current_progress.total


def console_callback(stream) -> Callable[[ExperimentProgress], None]:
    """Single-line progress display for a text stream."""
    def show(progress: ExperimentProgress):
        if progress is None:
            return
        line = (f"\r🔄 {progress.experiment}: {progress.done}/{progress.total} "
                f"({progress.progress_percent:5.1f}%), "
                f"remaining {str(progress.remaining_time).split('.')[0]}")
        stream.write(line)
        if progress.done >= progress.total:
            stream.write("\n")
        stream.flush()
    return show
