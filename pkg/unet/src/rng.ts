/** Small deterministic PRNG so frame selection and shuffles replay exactly.
 *
 * splitmix32: one 32-bit state word, good enough diffusion for sampling
 * and shuffling; not for cryptography. Math.random is unseedable, which
 * rules it out for anything that has to be reproducible.
 */

export class Rng {
  private state: number;

  constructor(seed: number) {
    if (!Number.isInteger(seed)) {
      throw new Error(`seed must be an integer, got ${seed}`);
    }
    this.state = seed >>> 0;
  }

  /** Uniform float in [0, 1). */
  next(): number {
    // splitmix32 step
    this.state = (this.state + 0x9e3779b9) >>> 0;
    let z = this.state;
    z ^= z >>> 16;
    z = Math.imul(z, 0x21f0aaad);
    z ^= z >>> 15;
    z = Math.imul(z, 0x735a2d97);
    z ^= z >>> 15;
    return (z >>> 0) / 0x100000000;
  }

  /** Uniform integer in [0, n). */
  nextInt(n: number): number {
    if (n <= 0) {
      throw new Error(`nextInt needs a positive bound, got ${n}`);
    }
    return Math.floor(this.next() * n);
  }

  /** In-place Fisher-Yates shuffle. */
  shuffle<T>(items: T[]): T[] {
    for (let i = items.length - 1; i > 0; i--) {
      const j = this.nextInt(i + 1);
      [items[i], items[j]] = [items[j], items[i]];
    }
    return items;
  }

  /** k distinct items drawn without replacement, in draw order. */
  sample<T>(items: readonly T[], k: number): T[] {
    if (k > items.length) {
      throw new Error(`cannot sample ${k} of ${items.length} items`);
    }
    const pool = items.slice();
    const out: T[] = [];
    for (let i = 0; i < k; i++) {
      const j = this.nextInt(pool.length);
      out.push(pool[j]);
      pool[j] = pool[pool.length - 1];
      pool.pop();
    }
    return out;
  }
}
