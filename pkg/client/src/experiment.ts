/**
 * Simulated remote experiment: integrates the received pulse on a local
 * two-level model and turns the exact fidelity into a measurement, optionally
 * degraded by projective shot sampling and additive Gaussian noise.
 */

import { transferFidelity } from "./physics.js";

export interface ExperimentOptions {
  detuning: number;
  /** Projective measurements per evaluation; null means the exact fidelity. */
  shots: number | null;
  /** Additive Gaussian noise scale on the reported J. */
  noise: number;
  seed: number;
}

export interface Measurement {
  J: number;
  err: number | null;
}

/** Deterministic 32-bit PRNG (mulberry32), uniform on [0, 1). */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export class MockExperiment {
  readonly opts: ExperimentOptions;
  private uniform: () => number;
  private spareNormal: number | null = null;

  constructor(opts: ExperimentOptions) {
    if (opts.shots !== null && (!Number.isInteger(opts.shots) || opts.shots < 1)) {
      throw new Error("shots must be a positive integer");
    }
    if (opts.noise < 0) {
      throw new Error("noise scale must be nonnegative");
    }
    this.opts = opts;
    this.uniform = mulberry32(opts.seed);
  }

  private normal(): number {
    if (this.spareNormal !== null) {
      const v = this.spareNormal;
      this.spareNormal = null;
      return v;
    }
    const u1 = Math.max(this.uniform(), 1e-12);
    const u2 = this.uniform();
    const r = Math.sqrt(-2 * Math.log(u1));
    this.spareNormal = r * Math.sin(2 * Math.PI * u2);
    return r * Math.cos(2 * Math.PI * u2);
  }

  private binomial(n: number, p: number): number {
    let hits = 0;
    for (let i = 0; i < n; i++) {
      if (this.uniform() < p) hits++;
    }
    return hits;
  }

  measure(times: number[], values: number[]): Measurement {
    const fidelity = transferFidelity(this.opts.detuning, times, values);
    let J = fidelity;
    let err: number | null = null;
    if (this.opts.shots !== null) {
      const p = Math.min(Math.max(fidelity, 0), 1);
      J = this.binomial(this.opts.shots, p) / this.opts.shots;
      err = Math.sqrt(Math.max(J * (1 - J), 1e-12) / this.opts.shots);
    }
    if (this.opts.noise > 0) {
      J += this.opts.noise * this.normal();
      err = err === null ? this.opts.noise : Math.hypot(err, this.opts.noise);
    }
    return { J, err };
  }
}
