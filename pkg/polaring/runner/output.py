"""
Run directory handling: CSV emission, checksums and the run manifest.
"""

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from polaring.errors import OutputExistsError
from polaring.events import JOURNAL_NAME

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
FLOAT_FORMAT = "%.10e"
OK = "ok"
EXCLUDED = "excluded"


def file_checksum(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Summary of one finished run, written last."""
    experiment: str
    config_hash: str
    code_version: str
    started: str
    finished: str
    wall_time_s: float
    realization_status: List[str]
    deviation_stats: Dict[str, Optional[float]] = field(default_factory=dict)
    files: Dict[str, str] = field(default_factory=dict)
    journal: str = JOURNAL_NAME

    @property
    def exclusion_count(self) -> int:
        return sum(1 for s in self.realization_status if s == EXCLUDED)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def utc_now() -> str:
    return datetime.now(tz=timezone.utc).isoformat()


def deviation_statistics(values: Sequence[Optional[float]]) -> Dict[str, Optional[float]]:
    """Mean, max and count of the per-realization relative deviations that are defined."""
    defined = np.array([v for v in values if v is not None], dtype=float)
    if defined.size == 0:
        return {"mean": None, "max": None, "count": 0}
    return {"mean": float(np.mean(defined)), "max": float(np.max(defined)), "count": int(defined.size)}


class OutputWriter:
    """
    Owns one run directory.

    Refuses to write into a directory that already holds files unless
    ``force`` is set; every CSV written through it is checksummed for the
    manifest.
    """

    def __init__(self, root: Union[str, Path], force: bool = False):
        self.root = Path(root)
        if self.root.exists() and any(self.root.iterdir()):
            if not force:
                raise OutputExistsError(f"output directory {self.root} is not empty (use --force to overwrite)")
            logger.warning("overwriting outputs in %s", self.root)
            self._clear_previous_run()
        self.root.mkdir(parents=True, exist_ok=True)
        self._written: List[str] = []

    def _clear_previous_run(self) -> None:
        """Remove the files of the run recorded in the old manifest; other files stay."""
        stale = [MANIFEST_NAME, MANIFEST_NAME + ".tmp", JOURNAL_NAME]
        manifest = self.root / MANIFEST_NAME
        if manifest.exists():
            try:
                stale.extend(json.loads(manifest.read_text(encoding="utf-8")).get("files", {}))
            except (OSError, ValueError, AttributeError) as e:
                logger.warning("cannot read previous manifest %s: %s", manifest, e)
        for name in stale:
            if Path(name).is_absolute() or ".." in Path(name).parts:
                logger.warning("ignoring manifest entry outside the run directory: %s", name)
                continue
            target = self.root / name
            if target.is_file():
                target.unlink()
                logger.debug("removed stale %s", target)

    @property
    def journal_path(self) -> Path:
        return self.root / JOURNAL_NAME

    @property
    def written(self) -> List[str]:
        return list(self._written)

    def path(self, name: str) -> Path:
        target = self.root / name
        target.parent.mkdir(parents=True, exist_ok=True)
        return target

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        target = self.path(name)
        frame.to_csv(target, float_format=FLOAT_FORMAT, index=False, lineterminator="\n", encoding="utf-8")
        self._record(name)
        logger.debug("wrote %s (%d rows)", target, len(frame))
        return target

    def write_columns(self, name: str, columns: Mapping[str, Any]) -> Path:
        """Write equally long columns in the given order."""
        return self.write_frame(name, pd.DataFrame({key: np.asarray(v) for key, v in columns.items()}))

    def write_grid(self, name: str, times: np.ndarray, grid: np.ndarray, index_name: str, value_name: str) -> Path:
        """Long-format CSV of an (index, time) grid: one row per (time, index) pair."""
        n_index, n_times = grid.shape
        frame = pd.DataFrame({
            "time_fs": np.repeat(np.asarray(times, dtype=float), n_index),
            index_name: np.tile(np.arange(n_index), n_times),
            value_name: np.asarray(grid, dtype=float).T.reshape(-1),
        })
        return self.write_frame(name, frame)

    def add_plot(self, name: str, figure) -> Optional[Path]:
        target = self.path(name)
        figure.savefig(target, dpi=120)
        self._record(name)
        return target

    def _record(self, name: str) -> None:
        if name not in self._written:
            self._written.append(name)

    def checksums(self) -> Dict[str, str]:
        return {name: file_checksum(self.root / name) for name in sorted(self._written)}

    def write_manifest(self, manifest: RunManifest) -> Path:
        """Write the manifest atomically (temporary file, then rename)."""
        target = self.root / MANIFEST_NAME
        tmp = target.with_suffix(".json.tmp")
        with open(tmp, "w", encoding="utf-8") as f:
            f.write(manifest.to_json() + "\n")
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, target)
        return target


def load_pyplot():
    """matplotlib.pyplot on the Agg backend, or None when matplotlib is missing."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        logger.warning("matplotlib not installed; skipping plots (pip install polaring[plots])")
        return None
    return plt
