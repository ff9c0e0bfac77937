"""Session persistence: a streamed JSON-lines log plus map and graph artifacts.

A session directory holds:

* ``session.json``: format version, run configuration, final metrics
* ``log.jsonl``: one record per simulation step, flushed as written so a
  crashed run keeps everything logged up to the failure
* ``map.pgm`` / ``map.yaml``: the exported occupancy grid
* ``graph.txt``: the pose graph, when the run produced one

Records are serialized canonically (sorted keys, shortest float repr), so
identical runs produce byte-identical logs and a load/save cycle
reproduces every file exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .gridmap import OccupancyGrid
from .mapio import load_map, save_map
from .motion import OdometryDelta
from .posegraph import PoseGraph, load_graph, save_graph
from .simworld import LaserScan

__all__ = [
    "SESSION_FORMAT_VERSION",
    "Metrics",
    "SessionWriter",
    "Session",
    "load_session",
    "save_session",
    "scan_to_json",
    "scan_from_json",
    "record_to_line",
]

SESSION_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Metrics:
    """Summary numbers for one run."""

    ate_rmse: float
    loop_closure_count: int
    cell_agreement: float
    dead_reckoning_rmse: float
    wall_time: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "ate_rmse": self.ate_rmse,
            "loop_closure_count": self.loop_closure_count,
            "cell_agreement": self.cell_agreement,
            "dead_reckoning_rmse": self.dead_reckoning_rmse,
            "wall_time": self.wall_time,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Metrics":
        return cls(
            ate_rmse=float(d["ate_rmse"]),
            loop_closure_count=int(d["loop_closure_count"]),
            cell_agreement=float(d["cell_agreement"]),
            dead_reckoning_rmse=float(d["dead_reckoning_rmse"]),
            wall_time=float(d["wall_time"]),
        )

    def deterministic_part(self) -> dict[str, Any]:
        """Fields that must reproduce exactly for a fixed config and seed
        (wall_time is measured, not derived)."""
        d = self.to_dict()
        d.pop("wall_time")
        return d


def scan_to_json(scan: LaserScan) -> dict[str, Any]:
    """Compact scan encoding; misses are listed by index since a returned
    beam can also read exactly range_max."""
    return {
        "angle_min": scan.angle_min,
        "angle_increment": scan.angle_increment,
        "n_beams": scan.n_beams,
        "range_max": scan.range_max,
        "ranges": [float(r) for r in scan.ranges],
        "miss": [int(i) for i in np.flatnonzero(~scan.returned)],
    }


def scan_from_json(d: dict[str, Any]) -> LaserScan:
    n = int(d["n_beams"])
    returned = np.ones(n, dtype=bool)
    returned[np.asarray(d["miss"], dtype=int)] = False
    return LaserScan(
        angle_min=float(d["angle_min"]),
        angle_increment=float(d["angle_increment"]),
        n_beams=n,
        range_max=float(d["range_max"]),
        ranges=np.asarray(d["ranges"], dtype=np.float64),
        returned=returned,
    )


def delta_to_json(delta: OdometryDelta) -> list[float]:
    return [delta.rot1, delta.trans, delta.rot2]


def record_to_line(record: dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


class SessionWriter:
    """Streams log records to disk, then finalizes the session directory."""

    def __init__(self, dir_path: str | Path) -> None:
        self.path = Path(dir_path)
        self.path.mkdir(parents=True, exist_ok=True)
        self._log = open(self.path / "log.jsonl", "w", encoding="ascii")
        self._last_t: float | None = None
        self._finished = False

    def append(self, record: dict[str, Any]) -> None:
        if self._log.closed:
            raise RuntimeError("session log already closed")
        t = float(record["t"])
        if self._last_t is not None and t <= self._last_t:
            raise ValueError(f"record t {t} not after previous {self._last_t}")
        self._last_t = t
        self._log.write(record_to_line(record))
        self._log.write("\n")
        self._log.flush()

    def finish(
        self,
        config: dict[str, Any],
        metrics: Metrics,
        grid: OccupancyGrid,
        graph: PoseGraph | None = None,
    ) -> None:
        """Close the log and write session.json, the map, and the graph."""
        if self._finished:
            raise RuntimeError("session already finished")
        self._log.close()
        save_map(self.path, grid)
        if graph is not None:
            save_graph(graph, self.path / "graph.txt")
        head = {
            "format_version": SESSION_FORMAT_VERSION,
            "config": config,
            "metrics": metrics.to_dict(),
        }
        (self.path / "session.json").write_text(
            json.dumps(head, sort_keys=True, indent=2) + "\n", encoding="ascii"
        )
        self._finished = True

    def abort(self) -> None:
        if not self._log.closed:
            self._log.close()


@dataclass
class Session:
    """Everything loaded back from a session directory."""

    path: Path
    config: dict[str, Any]
    metrics: Metrics
    records: list[dict[str, Any]]
    grid: OccupancyGrid
    graph: PoseGraph | None


def load_session(dir_path: str | Path) -> Session:
    src = Path(dir_path)
    head_path = src / "session.json"
    if not head_path.exists():
        raise FileNotFoundError(f"not a session directory: missing {head_path}")
    head = json.loads(head_path.read_text(encoding="ascii"))
    version = head.get("format_version")
    if version != SESSION_FORMAT_VERSION:
        raise ValueError(
            f"{head_path}: format version {version!r}, expected {SESSION_FORMAT_VERSION}"
        )

    log_path = src / "log.jsonl"
    if not log_path.exists():
        raise FileNotFoundError(f"missing session log {log_path}")
    records: list[dict[str, Any]] = []
    last_t: float | None = None
    with open(log_path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                record = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{log_path}:{lineno}: truncated or corrupt record: {exc}") from exc
            t = float(record["t"])
            if last_t is not None and t <= last_t:
                raise ValueError(f"{log_path}:{lineno}: t {t} not after previous {last_t}")
            last_t = t
            records.append(record)

    grid = load_map(src)
    graph_path = src / "graph.txt"
    graph = load_graph(graph_path) if graph_path.exists() else None
    return Session(
        path=src,
        config=head["config"],
        metrics=Metrics.from_dict(head["metrics"]),
        records=records,
        grid=grid,
        graph=graph,
    )


def save_session(session: Session, dir_path: str | Path) -> Path:
    """Write a loaded session out again (used to verify round trips)."""
    writer = SessionWriter(dir_path)
    for record in session.records:
        writer.append(record)
    writer.finish(session.config, session.metrics, session.grid, session.graph)
    return writer.path
