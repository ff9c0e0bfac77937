"""Occupancy grid streaming: base64 keyframes plus per-tick cell deltas.

The live grid is downsampled to at most 256 cells per side (each output
cell keeps the most decided input cell, the one with the largest absolute
log-odds) and serialized as one probability byte per cell.  A keyframe
carries the whole raster; between keyframes each message lists only the
cells that changed since the previous message, applied sequentially on
the client.  Decoding the keyframe and every delta in order reproduces
the server raster byte-for-byte at every tick.
"""

from __future__ import annotations

import base64
import math
from typing import Any

import numpy as np

from .gridmap import OccupancyGrid

__all__ = [
    "DEFAULT_KEYFRAME_INTERVAL",
    "MAX_STREAM_DIM",
    "grid_prob_bytes",
    "GridStreamEncoder",
    "GridStreamDecoder",
]

DEFAULT_KEYFRAME_INTERVAL = 50
MAX_STREAM_DIM = 256


def grid_prob_bytes(
    grid: OccupancyGrid, max_dim: int = MAX_STREAM_DIM
) -> tuple[np.ndarray, float]:
    """Downsampled probability-byte raster and its cell resolution.

    Each output cell takes the input cell with the largest |log-odds| in
    its block, so thin walls survive downsampling.  Bytes are
    round(p * 255); unknown cells come out as 128.
    """
    h, w = grid.cells.shape
    factor = max(1, math.ceil(h / max_dim), math.ceil(w / max_dim))
    ph = (-h) % factor
    pw = (-w) % factor
    cells = np.pad(grid.cells, ((0, ph), (0, pw)))
    bh, bw = cells.shape[0] // factor, cells.shape[1] // factor
    blocks = cells.reshape(bh, factor, bw, factor).transpose(0, 2, 1, 3).reshape(bh, bw, -1)
    pick = np.abs(blocks).argmax(axis=2)
    chosen = np.take_along_axis(blocks, pick[:, :, None], axis=2)[:, :, 0]
    p = 1.0 / (1.0 + np.exp(-chosen))
    return (p * 255.0 + 0.5).astype(np.uint8), grid.resolution * factor


class GridStreamEncoder:
    """Stateful server-side encoder: keyframe every N messages or on reset."""

    def __init__(
        self,
        keyframe_interval: int = DEFAULT_KEYFRAME_INTERVAL,
        max_dim: int = MAX_STREAM_DIM,
    ) -> None:
        if keyframe_interval < 1:
            raise ValueError("keyframe_interval must be >= 1")
        self.keyframe_interval = keyframe_interval
        self.max_dim = max_dim
        self._last: np.ndarray | None = None
        self._since_keyframe = 0

    def reset(self) -> None:
        """Force the next message to be a full keyframe (client join or
        explicit request)."""
        self._last = None

    def encode(self, grid: OccupancyGrid) -> dict[str, Any]:
        raster, resolution = grid_prob_bytes(grid, self.max_dim)
        keyframe_due = (
            self._last is None
            or self._since_keyframe >= self.keyframe_interval
            or raster.shape != self._last.shape
        )
        if keyframe_due:
            self._last = raster
            self._since_keyframe = 1
            return {
                "full": {
                    "width": int(raster.shape[1]),
                    "height": int(raster.shape[0]),
                    "resolution": resolution,
                    "origin": [grid.origin.x, grid.origin.y, grid.origin.theta],
                    "data": base64.b64encode(raster.tobytes()).decode("ascii"),
                }
            }
        changed = np.flatnonzero(raster != self._last)
        flat = raster.ravel()
        delta = [[int(i), int(flat[i])] for i in changed]
        self._last = raster
        self._since_keyframe += 1
        return {"delta": delta}


class GridStreamDecoder:
    """Client-side mirror: applies keyframes and deltas in arrival order."""

    def __init__(self) -> None:
        self.raster: np.ndarray | None = None
        self.resolution: float | None = None
        self.origin: list[float] | None = None

    def apply(self, message: dict[str, Any]) -> np.ndarray:
        if "full" in message:
            full = message["full"]
            w, h = int(full["width"]), int(full["height"])
            data = base64.b64decode(full["data"])
            if len(data) != w * h:
                raise ValueError(f"keyframe data length {len(data)} != {w}*{h}")
            self.raster = np.frombuffer(data, dtype=np.uint8).reshape(h, w).copy()
            self.resolution = float(full["resolution"])
            self.origin = [float(v) for v in full["origin"]]
        elif "delta" in message:
            if self.raster is None:
                raise ValueError("delta received before any keyframe")
            flat = self.raster.ravel()
            for index, value in message["delta"]:
                if not 0 <= index < flat.size:
                    raise ValueError(f"delta index {index} outside raster")
                flat[index] = value
        else:
            raise ValueError("grid message needs 'full' or 'delta'")
        return self.raster
