/** Debounced, latest-wins frame loading for the magnitude slider.
 *
 * Requests are rate-limited to one per interval (trailing edge picks up the
 * newest position), and responses are applied in monotone request order: a
 * frame older than the one on screen is discarded, so rapid scrubbing never
 * flickers back to a stale magnitude.
 */

export interface ScrubberHooks {
  fetchFrame: (url: string) => Promise<Blob>;
  onFrame: (url: string, blob: Blob) => void;
  onError?: (err: Error) => void;
  now?: () => number;
  schedule?: (fn: () => void, ms: number) => void;
}

export class FrameScrubber {
  private nextSeq = 1;
  private shownSeq = 0;
  private lastDispatch = -Infinity;
  private pendingUrl: string | null = null;
  private timerArmed = false;

  private readonly now: () => number;
  private readonly schedule: (fn: () => void, ms: number) => void;

  constructor(
    private readonly hooks: ScrubberHooks,
    private readonly minIntervalMs: number = 100,
  ) {
    this.now = hooks.now ?? (() => Date.now());
    this.schedule = hooks.schedule ?? ((fn, ms) => setTimeout(fn, ms));
  }

  /** Ask for the frame at `url`; superseded by any later call. */
  request(url: string): void {
    this.pendingUrl = url;
    const wait = this.lastDispatch + this.minIntervalMs - this.now();
    if (wait <= 0) {
      this.dispatch();
    } else if (!this.timerArmed) {
      this.timerArmed = true;
      this.schedule(() => {
        this.timerArmed = false;
        if (this.pendingUrl !== null) this.dispatch();
      }, wait);
    }
  }

  private dispatch(): void {
    const url = this.pendingUrl;
    if (url === null) return;
    this.pendingUrl = null;
    this.lastDispatch = this.now();
    const seq = this.nextSeq++;
    this.hooks
      .fetchFrame(url)
      .then((blob) => {
        if (seq > this.shownSeq) {
          this.shownSeq = seq;
          this.hooks.onFrame(url, blob);
        }
      })
      .catch((err: Error) => {
        if (seq > this.shownSeq) this.hooks.onError?.(err);
      });
  }
}
