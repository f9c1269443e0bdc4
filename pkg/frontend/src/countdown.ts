// Answer-window countdown. Ticks a display callback ten times a second and
// fires exactly one expiry callback when the window runs out.

export class Countdown {
  private timer: ReturnType<typeof setInterval> | null = null;
  private endAt = 0;

  constructor(
    private readonly onTick: (remainingMs: number) => void,
    private readonly onExpire: () => void,
    private readonly tickMs = 100,
  ) {}

  get running(): boolean {
    return this.timer !== null;
  }

  start(windowMs: number): void {
    this.stop();
    this.endAt = Date.now() + windowMs;
    this.onTick(windowMs);
    this.timer = setInterval(() => {
      const remaining = this.endAt - Date.now();
      if (remaining <= 0) {
        this.stop();
        this.onTick(0);
        this.onExpire();
      } else {
        this.onTick(remaining);
      }
    }, this.tickMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
