/** Recomputed-value highlighting: dirty nodes glow for three seconds. */

export const HIGHLIGHT_MS = 3000;

export class HighlightSet {
  private expiry = new Map<string, number>();

  constructor(private now: () => number = Date.now) {}

  flash(ids: Iterable<string>): void {
    const until = this.now() + HIGHLIGHT_MS;
    for (const id of ids) this.expiry.set(id, until);
  }

  isHighlighted(id: string): boolean {
    const until = this.expiry.get(id);
    if (until === undefined) return false;
    if (this.now() >= until) {
      this.expiry.delete(id);
      return false;
    }
    return true;
  }

  active(): string[] {
    return [...this.expiry.keys()].filter((id) => this.isHighlighted(id));
  }
}
