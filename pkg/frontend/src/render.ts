/**
 * Canvas renderer.  Pure with respect to the ViewState: the same state and
 * canvas size always produce the same draw-command sequence, which the
 * tests pin with a recording context.  Particles are the only layer drawn
 * with arc(), so dot counts are directly observable.
 */

import { classifyByte, Snapshot } from "./protocol";
import { ViewState } from "./view";

/** The slice of CanvasRenderingContext2D the renderer needs. */
export interface Canvas2D {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  font: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  closePath(): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
  setLineDash(segments: number[]): void;
}

export const COLOR_BACKGROUND = "#14161a";
export const COLOR_UNKNOWN = "#808080";
export const COLOR_FREE = "#ffffff";
export const COLOR_OCCUPIED = "#000000";
export const COLOR_PARTICLE = "rgba(235, 140, 40, 0.85)";
export const COLOR_SCAN = "rgba(90, 200, 130, 0.18)";
export const COLOR_NODE = "#2b6cb0";
export const COLOR_ODOM_EDGE = "#7aa6d8";
export const COLOR_LOOP_EDGE = "#d62f2f";
export const COLOR_EST = "#3a86ff";
export const COLOR_GT = "#2e9e4f";
export const COLOR_TEXT = "#e8e8e8";
export const LOOP_EDGE_DASH = [6, 4];

const CELL_COLORS = {
  unknown: COLOR_UNKNOWN,
  free: COLOR_FREE,
  occupied: COLOR_OCCUPIED,
} as const;

function drawGrid(
  view: ViewState,
  ctx: Canvas2D,
  width: number,
  height: number
): void {
  const d = view.decoder;
  if (d.raster === null) return;
  const res = d.resolution;
  const cam = view.camera;
  const cellPx = res * cam.pixelsPerMeter;
  for (let row = 0; row < d.height; row++) {
    const base = row * d.width;
    const [, top] = cam.toScreen(
      0,
      d.origin[1] + (row + 1) * res,
      width,
      height
    );
    if (top > height || top + cellPx < 0) continue;
    let col = 0;
    while (col < d.width) {
      const cls = classifyByte(d.raster[base + col]);
      let end = col + 1;
      while (end < d.width && classifyByte(d.raster[base + end]) === cls) {
        end++;
      }
      const [left] = cam.toScreen(d.origin[0] + col * res, 0, width, height);
      ctx.fillStyle = CELL_COLORS[cls];
      ctx.fillRect(left, top, (end - col) * cellPx, cellPx);
      col = end;
    }
  }
}

function drawGraph(
  snap: Snapshot,
  ctx: Canvas2D,
  view: ViewState,
  width: number,
  height: number
): void {
  const cam = view.camera;
  const at = new Map<number, [number, number]>();
  for (const [id, x, y] of snap.graph.nodes) {
    at.set(id, cam.toScreen(x, y, width, height));
  }
  for (const [from, to, kind] of snap.graph.edges) {
    const a = at.get(from);
    const b = at.get(to);
    if (a === undefined || b === undefined) continue;
    if (kind === "loop") {
      ctx.strokeStyle = COLOR_LOOP_EDGE;
      ctx.lineWidth = 2.5;
      ctx.setLineDash(LOOP_EDGE_DASH);
    } else {
      ctx.strokeStyle = COLOR_ODOM_EDGE;
      ctx.lineWidth = 1.5;
      ctx.setLineDash([]);
    }
    ctx.beginPath();
    ctx.moveTo(a[0], a[1]);
    ctx.lineTo(b[0], b[1]);
    ctx.stroke();
  }
  ctx.setLineDash([]);
  ctx.fillStyle = COLOR_NODE;
  for (const [sx, sy] of at.values()) {
    ctx.fillRect(sx - 2.5, sy - 2.5, 5, 5);
  }
}

function drawScan(
  snap: Snapshot,
  ctx: Canvas2D,
  view: ViewState,
  width: number,
  height: number
): void {
  const [px, py, ptheta] = snap.est_pose;
  const scan = snap.scan;
  if (scan.ranges.length === 0) return;
  const [sx, sy] = view.camera.toScreen(px, py, width, height);
  ctx.fillStyle = COLOR_SCAN;
  ctx.beginPath();
  ctx.moveTo(sx, sy);
  for (let i = 0; i < scan.ranges.length; i++) {
    const angle = ptheta + scan.angle_min + i * scan.angle_increment;
    const [ex, ey] = view.camera.toScreen(
      px + scan.ranges[i] * Math.cos(angle),
      py + scan.ranges[i] * Math.sin(angle),
      width,
      height
    );
    ctx.lineTo(ex, ey);
  }
  ctx.closePath();
  ctx.fill();
}

function drawParticles(
  snap: Snapshot,
  ctx: Canvas2D,
  view: ViewState,
  width: number,
  height: number
): void {
  let wmax = 0;
  for (const p of snap.particles) wmax = Math.max(wmax, p[3]);
  ctx.fillStyle = COLOR_PARTICLE;
  for (const [x, y, , wt] of snap.particles) {
    const [sx, sy] = view.camera.toScreen(x, y, width, height);
    const radius = wmax > 0 ? 1.5 + 4.5 * (wt / wmax) : 1.5;
    ctx.beginPath();
    ctx.arc(sx, sy, radius, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function drawPose(
  pose: [number, number, number],
  style: "fill" | "stroke",
  color: string,
  ctx: Canvas2D,
  view: ViewState,
  width: number,
  height: number
): void {
  const [x, y, theta] = pose;
  const c = Math.cos(theta);
  const s = Math.sin(theta);
  const local: [number, number][] = [
    [0.3, 0.0],
    [-0.12, 0.15],
    [-0.12, -0.15],
  ];
  ctx.beginPath();
  local.forEach(([lx, ly], i) => {
    const [sx, sy] = view.camera.toScreen(
      x + c * lx - s * ly,
      y + s * lx + c * ly,
      width,
      height
    );
    if (i === 0) ctx.moveTo(sx, sy);
    else ctx.lineTo(sx, sy);
  });
  ctx.closePath();
  if (style === "fill") {
    ctx.fillStyle = color;
    ctx.fill();
  } else {
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.setLineDash([]);
    ctx.stroke();
  }
}

function drawHud(
  view: ViewState,
  ctx: Canvas2D,
  width: number
): void {
  const snap = view.snapshot;
  const parts = [
    `t=${snap === null ? "-" : snap.t.toFixed(1) + "s"}`,
    `mode=${snap === null ? "-" : snap.mode}`,
    `loops=${snap === null ? "-" : snap.loop_closures}`,
    `conn=${view.connection}`,
  ];
  if (view.role !== null) parts.push(`role=${view.role}`);
  ctx.fillStyle = "rgba(10, 12, 15, 0.65)";
  ctx.fillRect(0, 0, width, 24);
  ctx.font = "12px monospace";
  ctx.fillStyle = COLOR_TEXT;
  ctx.fillText(parts.join("  "), 8, 16);
  let line = 36;
  if (view.role === "observer") {
    ctx.fillText("observer mode: drive keys disabled", 8, line);
    line += 16;
  }
  if (view.status !== "") {
    ctx.fillText(view.status, 8, line);
  }
}

export function render(
  view: ViewState,
  ctx: Canvas2D,
  width: number,
  height: number
): void {
  ctx.setLineDash([]);
  ctx.fillStyle = COLOR_BACKGROUND;
  ctx.fillRect(0, 0, width, height);

  const snap = view.snapshot;
  if (view.toggles.grid) drawGrid(view, ctx, width, height);
  if (view.decoder.raster === null) {
    ctx.font = "16px monospace";
    ctx.fillStyle = COLOR_TEXT;
    ctx.fillText("awaiting map", width / 2 - 48, height / 2);
  }
  if (snap !== null) {
    if (view.toggles.graph) drawGraph(snap, ctx, view, width, height);
    if (view.toggles.scan) drawScan(snap, ctx, view, width, height);
    if (view.toggles.particles) drawParticles(snap, ctx, view, width, height);
    if (view.toggles.ground_truth) {
      drawPose(snap.gt_pose, "stroke", COLOR_GT, ctx, view, width, height);
    }
    drawPose(snap.est_pose, "fill", COLOR_EST, ctx, view, width, height);
  }
  drawHud(view, ctx, width);
}
