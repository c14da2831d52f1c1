/**
 * Trailing-edge debouncer: `fn` runs once, `delayMs` after the last
 * trigger. Used to coalesce a drag gesture into a single recompute.
 */
export class Debouncer {
  private handle: ReturnType<typeof setTimeout> | null = null;

  constructor(
    readonly delayMs: number,
    private readonly fn: () => void,
  ) {}

  get pending(): boolean {
    return this.handle !== null;
  }

  trigger(): void {
    if (this.handle !== null) clearTimeout(this.handle);
    this.handle = setTimeout(() => {
      this.handle = null;
      this.fn();
    }, this.delayMs);
  }

  cancel(): void {
    if (this.handle !== null) {
      clearTimeout(this.handle);
      this.handle = null;
    }
  }
}
