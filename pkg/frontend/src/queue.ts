/** FIFO with a hard cap; overflow drops the oldest entries and counts them. */
export class BoundedQueue<T> {
  private items: T[] = [];
  dropped = 0;

  constructor(private readonly cap: number) {}

  get length(): number {
    return this.items.length;
  }

  push(item: T): void {
    this.items.push(item);
    this.trim();
  }

  /** Remove and return everything queued, oldest first. */
  drain(): T[] {
    const all = this.items;
    this.items = [];
    return all;
  }

  /** Put undelivered items back ahead of anything queued meanwhile. */
  requeueFront(items: T[]): void {
    this.items = items.concat(this.items);
    this.trim();
  }

  private trim(): void {
    while (this.items.length > this.cap) {
      this.items.shift();
      this.dropped += 1;
    }
  }
}
