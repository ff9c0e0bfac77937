import { GridFull, Snapshot } from "../src/protocol";

export function b64(bytes: number[]): string {
  return btoa(String.fromCharCode(...bytes));
}

export function makeFull(
  width: number,
  height: number,
  bytes: number[],
  resolution = 0.5,
  origin: number[] = [0, 0, 0]
): { full: GridFull } {
  return {
    full: { width, height, resolution, origin, data: b64(bytes) },
  };
}

/** Snapshot with bland defaults; override the fields a test cares about. */
export function makeSnapshot(overrides: Partial<Snapshot> = {}): Snapshot {
  return {
    type: "snapshot",
    t: 1.2,
    est_pose: [0.5, 0.5, 0.3],
    gt_pose: [0.55, 0.5, 0.25],
    scan: {
      angle_min: -Math.PI / 2,
      angle_increment: Math.PI / 8,
      ranges: [1, 1, 1, 1, 1, 1, 1, 1],
    },
    particles: [],
    grid: makeFull(2, 2, [128, 128, 128, 128]),
    graph: { nodes: [], edges: [] },
    loop_closures: 0,
    mode: "graphslam",
    ...overrides,
  };
}

/** Deterministic PRNG for randomized tests (mulberry32). */
export function rng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}
