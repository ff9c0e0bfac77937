"""Record grid-stream test vectors shared by the Python and UI test suites.

Drives a scripted kitchen mapping session for 500 ticks, encodes the live
grid each tick, and stores every message with the sha256 of the fully
reconstructed raster. The UI test replays the messages through its own
decoder and must reproduce each hash byte-for-byte.

Regenerate with: python tools/make_grid_stream_vectors.py
The output is deterministic, so a regeneration should be a no-op diff.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from slam2d.gridstream import GridStreamDecoder, GridStreamEncoder
from slam2d.pipeline import MappingSession, SessionConfig
from slam2d.trajectories import PurePursuit, scripted_route

OUT = Path(__file__).resolve().parents[1] / "frontend" / "tests" / "fixtures" / "grid_stream.json"

WORLD = "kitchen_dining"
ROUTE = "double_loop_kitchen"
SEED = 9
TICKS = 500


def main() -> None:
    config = SessionConfig(mode="graphslam", seed=SEED, world=WORLD, route=ROUTE)
    session = MappingSession(config)
    controller = PurePursuit(scripted_route(ROUTE))
    encoder = GridStreamEncoder()
    decoder = GridStreamDecoder()

    ticks = []
    for _ in range(TICKS):
        cmd = controller.command(session.sim.state.true_pose)
        if cmd is None:
            break
        session.step(cmd)
        msg = encoder.encode(session.live_grid)
        raster = decoder.apply(msg)
        ticks.append(
            {"msg": msg, "sha256": hashlib.sha256(raster.tobytes()).hexdigest()}
        )

    height, width = decoder.raster.shape
    payload = {
        "world": WORLD,
        "route": ROUTE,
        "seed": SEED,
        "width": width,
        "height": height,
        "ticks": ticks,
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(payload, separators=(",", ":")) + "\n")
    print(f"wrote {len(ticks)} ticks ({width}x{height} raster) to {OUT}")


if __name__ == "__main__":
    main()
