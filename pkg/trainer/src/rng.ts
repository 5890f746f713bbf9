/** Deterministic PRNG (mulberry32) with serializable state, used for
 * action sampling and seed derivation so checkpoints can resume exactly. */
export class Rng {
  private state: number;

  constructor(seed: number) {
    this.state = seed >>> 0;
  }

  /** Uniform float in [0, 1). */
  next(): number {
    this.state = (this.state + 0x6d2b79f5) >>> 0;
    let t = this.state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  }

  /** Integer in [0, n). */
  int(n: number): number {
    return Math.floor(this.next() * n);
  }

  /** Sample an index from a probability vector (assumed to sum to ~1). */
  categorical(probs: number[]): number {
    const u = this.next();
    let acc = 0;
    for (let i = 0; i < probs.length; i += 1) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return probs.length - 1;
  }

  getState(): number {
    return this.state;
  }

  setState(state: number): void {
    this.state = state >>> 0;
  }
}
