"""Teleop bridge: WebSocket service exposing a live SLAM session.

One client at a time holds drive control (first come, first served);
everyone else observes.  The session loop ticks at 10 Hz, applies the
controller's most recent command (commands older than 0.5 s decay to
exactly zero), and broadcasts a snapshot after every tick.  The
protocol logic lives in TeleopBridge, which is synchronous and
deterministic; the FastAPI layer only moves messages.
"""

from __future__ import annotations

import asyncio
import contextlib
import logging
import math
import time
from pathlib import Path
from typing import Any

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, PlainTextResponse

from .geometry import Twist
from .gridstream import GridStreamEncoder
from .pipeline import DT, MappingSession, SessionConfig

logger = logging.getLogger(__name__)

__all__ = ["CMD_TIMEOUT", "ProtocolViolation", "TeleopBridge", "create_app"]

CMD_TIMEOUT = 0.5
SNAPSHOT_SCAN_FIELDS = ("angle_min", "angle_increment", "ranges")
MAX_PARTICLES = 100


class ProtocolViolation(Exception):
    """Client sent something malformed; it gets disconnected with this reason."""


def _require_finite(value: Any, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProtocolViolation(f"{what} must be a number")
    f = float(value)
    if not math.isfinite(f):
        raise ProtocolViolation(f"{what} must be finite")
    return f


class TeleopBridge:
    """Session state, control policy, and snapshot assembly (no IO)."""

    def __init__(self, config: SessionConfig, save_dir: str | None = None) -> None:
        self.config = config
        self.session = MappingSession(config)
        self.encoder = GridStreamEncoder()
        self.clients: list[int] = []
        self.controller: int | None = None
        self._next_client = 0
        self._cmd = Twist(0.0, 0.0)
        self._cmd_time: float | None = None
        self._save_base = Path(save_dir or config.out or "slam_sessions")
        self._save_count = 0

    def join(self) -> tuple[int, list[tuple[int, dict[str, Any]]]]:
        """New client: returns its id and the notices to deliver."""
        cid = self._next_client
        self._next_client += 1
        self.clients.append(cid)
        out: list[tuple[int, dict[str, Any]]] = []
        if self.controller is None:
            self.controller = cid
            out.append((cid, {"type": "notice", "text": "role: controller"}))
        else:
            out.append((cid, {"type": "notice", "text": "role: observer"}))
        # everyone resyncs from a fresh keyframe on the next snapshot
        self.encoder.reset()
        return cid, out

    def leave(self, cid: int) -> list[tuple[int, dict[str, Any]]]:
        if cid in self.clients:
            self.clients.remove(cid)
        out: list[tuple[int, dict[str, Any]]] = []
        if cid == self.controller:
            self.controller = self.clients[0] if self.clients else None
            self._cmd = Twist(0.0, 0.0)
            self._cmd_time = None
            if self.controller is not None:
                out.append(
                    (self.controller, {"type": "notice", "text": "role: controller"})
                )
        return out

    def handle(
        self, cid: int, message: Any, now: float
    ) -> list[tuple[int, dict[str, Any]]]:
        """Process one inbound client message; returns messages to send."""
        if not isinstance(message, dict) or "type" not in message:
            raise ProtocolViolation("messages must be objects with a 'type'")
        kind = message["type"]
        if kind == "cmd_vel":
            if cid != self.controller:
                return [(cid, {"type": "notice", "text": "observer commands ignored"})]
            v = _require_finite(message.get("v"), "cmd_vel.v")
            w = _require_finite(message.get("w"), "cmd_vel.w")
            self._cmd = Twist(v, w)
            self._cmd_time = now
            return []
        if kind == "save":
            self._save_count += 1
            target = self._save_base / f"save_{self._save_count:03d}"
            path = self.session.save(target)
            return [(cid, {"type": "saved", "dir": str(path)})]
        if kind == "request_keyframe":
            self.encoder.reset()
            return []
        logger.warning("ignoring unknown message type %r from client %d", kind, cid)
        return []

    def applied_command(self, now: float) -> Twist:
        """Dead-man: silence for CMD_TIMEOUT zeroes the command exactly."""
        if self._cmd_time is None or now - self._cmd_time > CMD_TIMEOUT:
            return Twist(0.0, 0.0)
        return self._cmd

    def tick(self, now: float) -> dict[str, Any]:
        """Advance one simulation step and build the broadcast snapshot."""
        record = self.session.step(self.applied_command(now))
        return self._snapshot(record)

    def _particles(self) -> list[list[float]]:
        session = self.session
        if session.mode == "fastslam":
            pairs = [(p.weight, p.pose) for p in session.filter.pset.particles]
        elif session.mode == "localization":
            pairs = list(zip(session.mcl.weights, session.mcl.poses))
        else:
            return []
        pairs.sort(key=lambda it: -float(it[0]))
        return [
            [pose.x, pose.y, pose.theta, float(weight)]
            for weight, pose in pairs[:MAX_PARTICLES]
        ]

    def _graph(self) -> dict[str, list]:
        if self.session.mode != "graphslam":
            return {"nodes": [], "edges": []}
        gs = self.session.graph_state
        nodes = [[i, p.x, p.y, p.theta] for i, p in enumerate(gs.estimates)]
        edges = [[i, i + 1, "odometry"] for i in range(len(gs.deltas))]
        edges += [[c.from_id, c.to_id, "loop"] for c in gs.loops]
        return {"nodes": nodes, "edges": edges}

    def _snapshot(self, record: dict[str, Any]) -> dict[str, Any]:
        scan = {k: record["scan"][k] for k in SNAPSHOT_SCAN_FIELDS}
        return {
            "type": "snapshot",
            "t": record["t"],
            "est_pose": record["est_pose"],
            "gt_pose": record["gt_pose"],
            "scan": scan,
            "particles": self._particles(),
            "grid": self.encoder.encode(self.session.live_grid),
            "graph": self._graph(),
            "loop_closures": self.session.loop_count,
            "mode": self.session.mode,
        }


def _ui_bundle_dir() -> Path:
    return Path(__file__).resolve().parents[2] / "frontend" / "dist"


def create_app(config: SessionConfig, autostart: bool = True) -> FastAPI:
    """FastAPI app wrapping a TeleopBridge; autostart runs the 10 Hz loop."""
    bridge = TeleopBridge(config)
    sockets: dict[int, WebSocket] = {}

    async def _send_all(payload: dict[str, Any]) -> None:
        for cid, ws in list(sockets.items()):
            try:
                await ws.send_json(payload)
            except Exception:
                sockets.pop(cid, None)
                bridge.leave(cid)

    async def _send_each(outbox: list[tuple[int, dict[str, Any]]]) -> None:
        for cid, payload in outbox:
            ws = sockets.get(cid)
            if ws is not None:
                try:
                    await ws.send_json(payload)
                except Exception:
                    sockets.pop(cid, None)
                    bridge.leave(cid)

    async def _loop() -> None:
        while True:
            started = time.monotonic()
            snapshot = bridge.tick(started)
            await _send_all(snapshot)
            elapsed = time.monotonic() - started
            await asyncio.sleep(max(0.0, DT - elapsed))

    @contextlib.asynccontextmanager
    async def _lifespan(app: FastAPI):
        task = asyncio.create_task(_loop()) if autostart else None
        yield
        if task is not None:
            task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await task

    app = FastAPI(title="slam teleop bridge", lifespan=_lifespan)
    app.state.bridge = bridge

    @app.get("/health")
    async def health() -> PlainTextResponse:
        return PlainTextResponse("ok")

    @app.get("/")
    async def index():
        bundle = _ui_bundle_dir() / "index.html"
        if bundle.exists():
            return FileResponse(bundle)
        return PlainTextResponse("UI bundle not built", status_code=404)

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket) -> None:
        await websocket.accept()
        cid, outbox = bridge.join()
        sockets[cid] = websocket
        await _send_each(outbox)
        try:
            while True:
                try:
                    message = await websocket.receive_json()
                except WebSocketDisconnect:
                    raise
                except Exception as exc:
                    raise ProtocolViolation(f"invalid JSON: {exc}") from exc
                await _send_each(bridge.handle(cid, message, time.monotonic()))
        except WebSocketDisconnect:
            pass
        except ProtocolViolation as exc:
            await websocket.close(code=1003, reason=str(exc))
        finally:
            sockets.pop(cid, None)
            await _send_each(bridge.leave(cid))

    return app
