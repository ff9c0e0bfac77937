/**
 * Client view model: the latest snapshot, the reconstructed grid, the
 * camera transform, layer toggles, and connection state.  Rendering reads
 * this and nothing else, so a given ViewState always draws the same frame.
 */

import { GridStreamDecoder, Snapshot } from "./protocol";

export type Connection = "connecting" | "connected" | "closed";
export type Role = "controller" | "observer";

export interface Toggles {
  grid: boolean;
  particles: boolean;
  graph: boolean;
  scan: boolean;
  ground_truth: boolean;
}

/**
 * World-to-screen transform: metres to pixels with y up in the world and
 * down on the canvas.  The world point (centerX, centerY) sits at the
 * canvas centre; zoomAt keeps the point under the cursor fixed.
 */
export class Camera {
  centerX = 0;
  centerY = 0;
  pixelsPerMeter = 60;

  toScreen(
    wx: number,
    wy: number,
    canvasW: number,
    canvasH: number
  ): [number, number] {
    return [
      canvasW / 2 + (wx - this.centerX) * this.pixelsPerMeter,
      canvasH / 2 - (wy - this.centerY) * this.pixelsPerMeter,
    ];
  }

  toWorld(
    sx: number,
    sy: number,
    canvasW: number,
    canvasH: number
  ): [number, number] {
    return [
      this.centerX + (sx - canvasW / 2) / this.pixelsPerMeter,
      this.centerY - (sy - canvasH / 2) / this.pixelsPerMeter,
    ];
  }

  zoomAt(
    sx: number,
    sy: number,
    factor: number,
    canvasW: number,
    canvasH: number
  ): void {
    const [wx, wy] = this.toWorld(sx, sy, canvasW, canvasH);
    this.pixelsPerMeter *= factor;
    this.centerX = wx - (sx - canvasW / 2) / this.pixelsPerMeter;
    this.centerY = wy + (sy - canvasH / 2) / this.pixelsPerMeter;
  }

  /** Pan by a screen-space drag: the map follows the cursor. */
  panPixels(dx: number, dy: number): void {
    this.centerX -= dx / this.pixelsPerMeter;
    this.centerY += dy / this.pixelsPerMeter;
  }
}

export class ViewState {
  snapshot: Snapshot | null = null;
  decoder = new GridStreamDecoder();
  camera = new Camera();
  toggles: Toggles = {
    grid: true,
    particles: true,
    graph: true,
    scan: true,
    ground_truth: true,
  };
  connection: Connection = "connecting";
  role: Role | null = null;
  status = "";

  /**
   * Folds a snapshot into the view.  Returns "need_keyframe" when a delta
   * arrives before any keyframe (the caller should request one); the
   * snapshot is still stored so the HUD stays live.
   */
  applySnapshot(snap: Snapshot): "ok" | "need_keyframe" {
    this.snapshot = snap;
    if ("delta" in snap.grid && this.decoder.raster === null) {
      return "need_keyframe";
    }
    const hadRaster = this.decoder.raster !== null;
    this.decoder.apply(snap.grid);
    if (!hadRaster) this.centerOnGrid();
    return "ok";
  }

  /** Put the middle of the mapped area at the canvas centre. */
  centerOnGrid(): void {
    const d = this.decoder;
    if (d.raster === null) return;
    this.camera.centerX = d.origin[0] + 0.5 * d.width * d.resolution;
    this.camera.centerY = d.origin[1] + 0.5 * d.height * d.resolution;
  }

  /** Centre and pick a zoom so the whole grid fits with a small margin. */
  fitCamera(canvasW: number, canvasH: number): void {
    const d = this.decoder;
    if (d.raster === null) return;
    this.centerOnGrid();
    const spanX = d.width * d.resolution;
    const spanY = d.height * d.resolution;
    this.camera.pixelsPerMeter =
      0.9 * Math.min(canvasW / spanX, canvasH / spanY);
  }
}
