/**
 * Wire types for the teleop bridge and the client half of the grid stream.
 *
 * The decoder mirrors the server encoder byte for byte: a keyframe carries
 * the whole probability raster (base64, one byte per cell, row-major), and
 * every following message lists only the cells that changed, applied in
 * arrival order.  Replaying the keyframe and all deltas reproduces the
 * server raster exactly at every tick.
 */

export interface ScanMsg {
  angle_min: number;
  angle_increment: number;
  ranges: number[];
}

export interface GridFull {
  width: number;
  height: number;
  resolution: number;
  origin: number[];
  data: string;
}

export type GridMsg = { full: GridFull } | { delta: [number, number][] };

export interface GraphMsg {
  nodes: [number, number, number, number][];
  edges: [number, number, string][];
}

export interface Snapshot {
  type: "snapshot";
  t: number;
  est_pose: [number, number, number];
  gt_pose: [number, number, number];
  scan: ScanMsg;
  particles: [number, number, number, number][];
  grid: GridMsg;
  graph: GraphMsg;
  loop_closures: number;
  mode: string;
}

export interface Notice {
  type: "notice";
  text: string;
}

export interface Saved {
  type: "saved";
  dir: string;
}

export type ServerMessage = Snapshot | Notice | Saved;

export function makeCmdVel(v: number, w: number): string {
  return JSON.stringify({ type: "cmd_vel", v, w });
}

export function makeSave(): string {
  return JSON.stringify({ type: "save" });
}

export function makeRequestKeyframe(): string {
  return JSON.stringify({ type: "request_keyframe" });
}

// Probability bytes are round(p * 255); the thresholds below match the
// map export convention (occupied above 0.65, free below 0.196).
export const OCCUPIED_BYTE = 166;
export const FREE_BYTE = 49;
export const UNKNOWN_BYTE = 128;

export type CellClass = "unknown" | "free" | "occupied";

export function classifyByte(b: number): CellClass {
  if (b >= OCCUPIED_BYTE) return "occupied";
  if (b <= FREE_BYTE) return "free";
  return "unknown";
}

export function decodeBase64(data: string): Uint8Array {
  const raw = atob(data);
  const out = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) out[i] = raw.charCodeAt(i);
  return out;
}

/** Client-side grid state: applies keyframes and deltas in arrival order. */
export class GridStreamDecoder {
  raster: Uint8Array | null = null;
  width = 0;
  height = 0;
  resolution = 0;
  origin: [number, number, number] = [0, 0, 0];

  apply(message: GridMsg): Uint8Array {
    if ("full" in message) {
      const full = message.full;
      const data = decodeBase64(full.data);
      if (data.length !== full.width * full.height) {
        throw new Error(
          `keyframe data length ${data.length} != ${full.width}*${full.height}`
        );
      }
      this.raster = data;
      this.width = full.width;
      this.height = full.height;
      this.resolution = full.resolution;
      this.origin = [full.origin[0], full.origin[1], full.origin[2]];
    } else if ("delta" in message) {
      if (this.raster === null) {
        throw new Error("delta received before any keyframe");
      }
      for (const [index, value] of message.delta) {
        if (!(index >= 0 && index < this.raster.length)) {
          throw new Error(`delta index ${index} outside raster`);
        }
        this.raster[index] = value;
      }
    } else {
      throw new Error("grid message needs 'full' or 'delta'");
    }
    return this.raster;
  }
}
