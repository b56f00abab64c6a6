/**
 * Turns an incoming stream of audio buffers (any device rate, any buffer
 * size) into exact 0.1 s chunks at the service's declared sample rate.
 * One chunk per 0.1 s of captured audio: the 10-per-second cadence is a
 * property of the bookkeeping, not of wall-clock timers.
 */

export const CHUNK_SECONDS = 0.1;

export class Chunker {
  readonly targetRate: number;
  readonly chunkSamples: number;
  private pending: Float32Array;
  private pendingLen = 0;
  private emitted = 0;
  private readonly onChunk: (chunk: Float32Array, index: number) => void;

  constructor(targetRate: number, onChunk: (chunk: Float32Array, index: number) => void) {
    this.targetRate = targetRate;
    this.chunkSamples = Math.round(CHUNK_SECONDS * targetRate);
    this.pending = new Float32Array(this.chunkSamples * 4);
    this.onChunk = onChunk;
  }

  /** Total chunks emitted so far (monotonic across device switches). */
  get chunkCount(): number {
    return this.emitted;
  }

  /** Feed captured samples; `sourceRate` may differ from the target rate. */
  push(samples: Float32Array, sourceRate: number): void {
    const converted = sourceRate === this.targetRate
      ? samples
      : resampleLinear(samples, sourceRate, this.targetRate);
    this.append(converted);
    while (this.pendingLen >= this.chunkSamples) {
      const chunk = this.pending.slice(0, this.chunkSamples);
      this.pending.copyWithin(0, this.chunkSamples, this.pendingLen);
      this.pendingLen -= this.chunkSamples;
      this.onChunk(chunk, this.emitted);
      this.emitted += 1;
    }
  }

  /** Drop buffered samples shorter than one chunk (e.g. at capture stop). */
  flush(): void {
    this.pendingLen = 0;
  }

  private append(samples: Float32Array): void {
    if (this.pendingLen + samples.length > this.pending.length) {
      const grown = new Float32Array(
        Math.max(this.pending.length * 2, this.pendingLen + samples.length));
      grown.set(this.pending.subarray(0, this.pendingLen));
      this.pending = grown;
    }
    this.pending.set(samples, this.pendingLen);
    this.pendingLen += samples.length;
  }
}

/** Plain linear-interpolation resampler; adequate for speech capture. */
export function resampleLinear(
  samples: Float32Array, fromRate: number, toRate: number,
): Float32Array {
  if (fromRate === toRate || samples.length === 0) return samples;
  const outLen = Math.floor((samples.length * toRate) / fromRate);
  const out = new Float32Array(outLen);
  const step = fromRate / toRate;
  for (let i = 0; i < outLen; i++) {
    const pos = i * step;
    const i0 = Math.floor(pos);
    const i1 = Math.min(i0 + 1, samples.length - 1);
    const frac = pos - i0;
    out[i] = samples[i0] * (1 - frac) + samples[i1] * frac;
  }
  return out;
}
