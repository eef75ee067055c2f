"""
Run journal for polaring.
Structured events appended as JSON lines next to a run's outputs.
"""

import json
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

logger = logging.getLogger(__name__)

JOURNAL_NAME = "events.jsonl"


class EventType(Enum):
    """Types of events a run emits."""
    RUN_STARTED = "run_started"
    BATCH_FINISHED = "batch_finished"
    REALIZATION_EXCLUDED = "realization_excluded"
    RUN_FINISHED = "run_finished"
    RUN_FAILED = "run_failed"


@dataclass
class Event:
    """A journal event."""
    type: EventType
    timestamp: float
    data: Dict[str, Any] = field(default_factory=dict)
    source: str = "polaring"

    def to_dict(self) -> dict:
        return {
            "type": self.type.value,
            "timestamp": self.timestamp,
            "iso_time": datetime.fromtimestamp(self.timestamp, tz=timezone.utc).isoformat(),
            "source": self.source,
            "data": self.data,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class EventEmitter:
    """
    Emits events to registered handlers.

    Handlers can be:
    - file (append JSON lines)
    - callback functions

    Handler failures are logged and never abort a run.
    """

    def __init__(self):
        self._handlers: List[Callable[[Event], None]] = []

    def add_handler(self, handler: Callable[[Event], None]):
        """Add an event handler."""
        self._handlers.append(handler)

    def add_file_handler(self, path: Union[str, Path]):
        """Add handler that appends JSON lines to a file."""
        def handler(event: Event):
            with open(path, "a", encoding="utf-8") as f:
                f.write(event.to_json() + "\n")
        self._handlers.append(handler)

    def emit(self, event: Event):
        """Emit an event to all handlers."""
        for handler in self._handlers:
            try:
                handler(event)
            except Exception as e:
                logger.warning("event handler failed: %s", e)


# Convenience functions for creating events

def run_started_event(experiment: str, config_hash: str, ensemble_size: int, threads: int) -> Event:
    return Event(
        type=EventType.RUN_STARTED,
        timestamp=time.time(),
        data={
            "experiment": experiment,
            "config_hash": config_hash,
            "ensemble_size": ensemble_size,
            "threads": threads,
        },
    )


def batch_finished_event(batch: int, first: int, count: int, excluded: Sequence[int], elapsed: float) -> Event:
    return Event(
        type=EventType.BATCH_FINISHED,
        timestamp=time.time(),
        data={
            "batch": batch,
            "first_realization": first,
            "count": count,
            "excluded": list(excluded),
            "elapsed_s": round(elapsed, 3),
        },
    )


def realization_excluded_event(realization: int, reason: str, step: Optional[int] = None) -> Event:
    data: Dict[str, Any] = {"realization": realization, "reason": reason}
    if step is not None:
        data["step"] = step
    return Event(type=EventType.REALIZATION_EXCLUDED, timestamp=time.time(), data=data)


def run_finished_event(experiment: str, exclusion_count: int, wall_time: float, files: Sequence[str]) -> Event:
    return Event(
        type=EventType.RUN_FINISHED,
        timestamp=time.time(),
        data={
            "experiment": experiment,
            "exclusion_count": exclusion_count,
            "wall_time_s": round(wall_time, 3),
            "files": list(files),
        },
    )


def run_failed_event(experiment: str, error: BaseException) -> Event:
    return Event(
        type=EventType.RUN_FAILED,
        timestamp=time.time(),
        data={"experiment": experiment, "error": type(error).__name__, "message": str(error)},
    )
