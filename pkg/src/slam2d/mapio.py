"""Portable map files: binary PGM images with a YAML sidecar.

The image stores one byte per cell with row 0 at the TOP of the map
(highest y), matching the convention of common map servers: occupied
cells are 0 (black), free cells 254 (near white), unknown 205 (gray).
The sidecar records resolution, world origin of the bottom-left corner,
and the probability thresholds the byte values encode.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .geometry import Pose2
from .gridmap import (
    CLASS_FREE,
    CLASS_OCCUPIED,
    CLASS_UNKNOWN,
    FREE_P,
    OCCUPIED_P,
    OccupancyGrid,
)

__all__ = ["encode_pgm", "decode_pgm", "save_map", "load_map"]

OCCUPIED_BYTE = 0
FREE_BYTE = 254
UNKNOWN_BYTE = 205

# representative log-odds for cells reconstructed from a class image
_LOADED_LOGODDS = {CLASS_OCCUPIED: 2.0, CLASS_FREE: -2.0, CLASS_UNKNOWN: 0.0}


def encode_pgm(classes: np.ndarray) -> bytes:
    """Serialize a class image (row 0 = bottom) as a binary PGM."""
    if classes.ndim != 2 or classes.size == 0:
        raise ValueError("class image must be a non-empty 2d array")
    h, w = classes.shape
    img = np.full((h, w), UNKNOWN_BYTE, dtype=np.uint8)
    img[classes == CLASS_OCCUPIED] = OCCUPIED_BYTE
    img[classes == CLASS_FREE] = FREE_BYTE
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    return header + np.flipud(img).tobytes()


def _parse_header_tokens(data: bytes) -> tuple[list[int], int]:
    """Read magic + three header integers, skipping comments; return values
    and the offset where pixel data starts."""
    if not data.startswith(b"P5"):
        raise ValueError("not a binary PGM (missing P5 magic)")
    pos = 2
    values: list[int] = []
    while len(values) < 3:
        if pos >= len(data):
            raise ValueError("truncated PGM header")
        c = data[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise ValueError("truncated PGM header")
            pos = nl + 1
        elif c.isdigit():
            end = pos
            while end < len(data) and data[end : end + 1].isdigit():
                end += 1
            values.append(int(data[pos:end]))
            pos = end
        else:
            raise ValueError(f"unexpected byte {c!r} in PGM header")
    # exactly one whitespace byte separates maxval from pixel data
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise ValueError("missing separator before PGM pixel data")
    return values, pos + 1


def decode_pgm(
    data: bytes,
    occupied_thresh: float = OCCUPIED_P,
    free_thresh: float = FREE_P,
) -> np.ndarray:
    """Parse a binary PGM back into a class image (row 0 = bottom).

    Bytes are interpreted as darkness = occupancy probability
    (p = (maxval - v) / maxval), classified with the given thresholds.
    """
    (w, h, maxval), start = _parse_header_tokens(data)
    if maxval != 255:
        raise ValueError(f"unsupported PGM maxval {maxval}")
    if w <= 0 or h <= 0:
        raise ValueError("PGM dimensions must be positive")
    pixels = data[start:]
    if len(pixels) != w * h:
        raise ValueError(f"PGM pixel count {len(pixels)} != {w}*{h}")
    img = np.frombuffer(pixels, dtype=np.uint8).reshape(h, w)
    p = (maxval - img.astype(np.float64)) / maxval
    classes = np.full((h, w), CLASS_UNKNOWN, dtype=np.int8)
    classes[p > occupied_thresh] = CLASS_OCCUPIED
    classes[p < free_thresh] = CLASS_FREE
    return np.flipud(classes).copy()


def save_map(dir_path: str | Path, grid: OccupancyGrid, basename: str = "map") -> tuple[Path, Path]:
    """Write ``<basename>.pgm`` and ``<basename>.yaml`` into ``dir_path``."""
    out = Path(dir_path)
    out.mkdir(parents=True, exist_ok=True)
    pgm_path = out / f"{basename}.pgm"
    yaml_path = out / f"{basename}.yaml"
    pgm_path.write_bytes(encode_pgm(grid.classes()))
    meta = (
        f"image: {basename}.pgm\n"
        f"resolution: {grid.resolution}\n"
        f"origin: [{grid.origin.x}, {grid.origin.y}, {grid.origin.theta}]\n"
        f"negate: 0\n"
        f"occupied_thresh: {OCCUPIED_P}\n"
        f"free_thresh: {FREE_P}\n"
    )
    yaml_path.write_text(meta, encoding="ascii")
    return pgm_path, yaml_path


def load_map(dir_path: str | Path, basename: str = "map") -> OccupancyGrid:
    """Read a map saved by save_map back into an occupancy grid.

    Cell log-odds are representative values for each class, so the class
    image (and thus a re-exported PGM) round-trips exactly.
    """
    src = Path(dir_path)
    yaml_path = src / f"{basename}.yaml"
    if not yaml_path.exists():
        raise FileNotFoundError(f"missing map sidecar {yaml_path}")
    meta = yaml.safe_load(yaml_path.read_text(encoding="ascii"))
    for key in ("image", "resolution", "origin"):
        if key not in meta:
            raise ValueError(f"{yaml_path}: missing required key {key!r}")
    if int(meta.get("negate", 0)) != 0:
        raise ValueError(f"{yaml_path}: negate != 0 is not supported")
    pgm_path = src / str(meta["image"])
    if not pgm_path.exists():
        raise FileNotFoundError(f"missing map image {pgm_path}")
    classes = decode_pgm(
        pgm_path.read_bytes(),
        occupied_thresh=float(meta.get("occupied_thresh", OCCUPIED_P)),
        free_thresh=float(meta.get("free_thresh", FREE_P)),
    )
    ox, oy, oth = (float(v) for v in meta["origin"])
    if oth != 0.0:
        raise ValueError(f"{yaml_path}: rotated map origins are not supported")
    cells = np.zeros(classes.shape, dtype=np.float64)
    for cls, value in _LOADED_LOGODDS.items():
        cells[classes == cls] = value
    return OccupancyGrid(float(meta["resolution"]), Pose2(ox, oy, 0.0), cells)
