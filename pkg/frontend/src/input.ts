/**
 * Keyboard teleop: WASD chords map to body velocities at half the
 * simulator limits, and a scheduler turns key edges plus a 10 Hz repeat
 * tick into cmd_vel sends.  Releasing the last key always produces a
 * trailing (0, 0) so the robot never coasts on a stale command.
 */

export const V_MAX = 1.0;
export const W_MAX = 2.0;

export interface TwistCmd {
  v: number;
  w: number;
}

const DRIVE_KEYS = ["w", "a", "s", "d"] as const;
type DriveKey = (typeof DRIVE_KEYS)[number];

function isDriveKey(key: string): key is DriveKey {
  return (DRIVE_KEYS as readonly string[]).includes(key);
}

/** Tracks which drive keys are held and sums their contributions. */
export class KeyTracker {
  private held = new Set<DriveKey>();

  /** Returns true when the held set actually changed. */
  handleKey(key: string, pressed: boolean): boolean {
    if (!isDriveKey(key)) return false;
    const had = this.held.has(key);
    if (pressed === had) return false;
    if (pressed) this.held.add(key);
    else this.held.delete(key);
    return true;
  }

  command(): TwistCmd {
    let v = 0;
    let w = 0;
    if (this.held.has("w")) v += 0.5 * V_MAX;
    if (this.held.has("s")) v -= 0.5 * V_MAX;
    if (this.held.has("a")) w += 0.5 * W_MAX;
    if (this.held.has("d")) w -= 0.5 * W_MAX;
    return { v, w };
  }

  anyHeld(): boolean {
    return this.held.size > 0;
  }

  clear(): void {
    this.held.clear();
  }
}

/**
 * Sends on every key edge (press or release) and repeats the current
 * command on each tick while any key is held.  Observers keep tracking
 * key state but never send; a promotion mid-hold then resumes cleanly.
 */
export class CommandScheduler {
  readonly tracker = new KeyTracker();
  enabled = true;

  constructor(private readonly send: (cmd: TwistCmd) => void) {}

  onKey(key: string, pressed: boolean): void {
    if (!this.tracker.handleKey(key, pressed)) return;
    if (this.enabled) this.send(this.tracker.command());
  }

  onTick(): void {
    if (this.enabled && this.tracker.anyHeld()) this.send(this.tracker.command());
  }
}
