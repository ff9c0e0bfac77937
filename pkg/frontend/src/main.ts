/**
 * Browser entry point: connects to the bridge WebSocket, feeds snapshots
 * into the ViewState, forwards keyboard teleop, and redraws on animation
 * frames.  All protocol and drawing logic lives in the imported modules;
 * this file only wires DOM events to them.
 */

import { CommandScheduler } from "./input";
import {
  makeCmdVel,
  makeRequestKeyframe,
  makeSave,
  ServerMessage,
} from "./protocol";
import { Canvas2D, render } from "./render";
import { Toggles, ViewState } from "./view";

const SEND_PERIOD_MS = 100;
const RECONNECT_MS = 2000;

const view = new ViewState();
const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d") as unknown as Canvas2D;

let socket: WebSocket | null = null;
let keyframeRequested = false;
let fitted = false;

const scheduler = new CommandScheduler((cmd) => {
  if (socket !== null && socket.readyState === WebSocket.OPEN) {
    socket.send(makeCmdVel(cmd.v, cmd.w));
  }
});
scheduler.enabled = false;

function handleMessage(msg: ServerMessage): void {
  if (msg.type === "snapshot") {
    if (view.applySnapshot(msg) === "need_keyframe") {
      if (!keyframeRequested && socket !== null) {
        socket.send(makeRequestKeyframe());
        keyframeRequested = true;
      }
      return;
    }
    keyframeRequested = false;
    if (!fitted && view.decoder.raster !== null) {
      view.fitCamera(canvas.width, canvas.height);
      fitted = true;
    }
  } else if (msg.type === "notice") {
    if (msg.text === "role: controller") {
      view.role = "controller";
      scheduler.enabled = true;
    } else if (msg.text === "role: observer") {
      view.role = "observer";
      scheduler.enabled = false;
    } else {
      view.status = msg.text;
    }
  } else if (msg.type === "saved") {
    view.status = `saved to ${msg.dir}`;
  }
}

function connect(): void {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  const ws = new WebSocket(`${proto}://${location.host}/ws`);
  socket = ws;
  view.connection = "connecting";
  ws.onopen = () => {
    view.connection = "connected";
  };
  ws.onmessage = (event) => {
    handleMessage(JSON.parse(event.data) as ServerMessage);
  };
  ws.onclose = () => {
    view.connection = "closed";
    view.role = null;
    scheduler.enabled = false;
    socket = null;
    // A rejoin gets a fresh keyframe from the server, so drop local state.
    view.decoder.raster = null;
    setTimeout(connect, RECONNECT_MS);
  };
}

window.addEventListener("keydown", (e) => {
  if (e.repeat) return;
  scheduler.onKey(e.key.toLowerCase(), true);
});
window.addEventListener("keyup", (e) => {
  scheduler.onKey(e.key.toLowerCase(), false);
});
window.setInterval(() => scheduler.onTick(), SEND_PERIOD_MS);

canvas.addEventListener("wheel", (e) => {
  e.preventDefault();
  const factor = e.deltaY < 0 ? 1.15 : 1 / 1.15;
  view.camera.zoomAt(e.offsetX, e.offsetY, factor, canvas.width, canvas.height);
});

let dragging = false;
let lastX = 0;
let lastY = 0;
canvas.addEventListener("mousedown", (e) => {
  dragging = true;
  lastX = e.offsetX;
  lastY = e.offsetY;
});
window.addEventListener("mouseup", () => {
  dragging = false;
});
canvas.addEventListener("mousemove", (e) => {
  if (!dragging) return;
  view.camera.panPixels(e.offsetX - lastX, e.offsetY - lastY);
  lastX = e.offsetX;
  lastY = e.offsetY;
});

for (const name of Object.keys(view.toggles) as (keyof Toggles)[]) {
  const box = document.getElementById(`toggle-${name}`) as HTMLInputElement;
  box.checked = view.toggles[name];
  box.addEventListener("change", () => {
    view.toggles[name] = box.checked;
  });
}

(document.getElementById("save") as HTMLButtonElement).addEventListener(
  "click",
  () => {
    if (socket !== null && socket.readyState === WebSocket.OPEN) {
      socket.send(makeSave());
    }
  }
);

(document.getElementById("fit") as HTMLButtonElement).addEventListener(
  "click",
  () => view.fitCamera(canvas.width, canvas.height)
);

function frame(): void {
  const box = canvas.getBoundingClientRect();
  const w = Math.max(1, Math.floor(box.width));
  const h = Math.max(1, Math.floor(box.height));
  if (canvas.width !== w) canvas.width = w;
  if (canvas.height !== h) canvas.height = h;
  render(view, ctx, w, h);
  requestAnimationFrame(frame);
}

connect();
requestAnimationFrame(frame);
