/**
 * Local spectrum display math: a small radix-2 FFT plus log-log sampling.
 * Display only; all classification happens server-side.
 */

export interface SpectrumPoint {
  logF: number;
  logI: number;
}

/** In-place iterative radix-2 FFT over interleaved re/im arrays. */
export function fft(re: Float64Array, im: Float64Array): void {
  const n = re.length;
  if (n === 0 || (n & (n - 1)) !== 0) {
    throw new Error("fft length must be a power of two");
  }
  for (let i = 1, j = 0; i < n; i++) {
    let bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      [re[i], re[j]] = [re[j], re[i]];
      [im[i], im[j]] = [im[j], im[i]];
    }
  }
  for (let len = 2; len <= n; len <<= 1) {
    const ang = (-2 * Math.PI) / len;
    const wRe = Math.cos(ang);
    const wIm = Math.sin(ang);
    for (let i = 0; i < n; i += len) {
      let curRe = 1;
      let curIm = 0;
      for (let k = 0; k < len / 2; k++) {
        const uRe = re[i + k];
        const uIm = im[i + k];
        const vRe = re[i + k + len / 2] * curRe - im[i + k + len / 2] * curIm;
        const vIm = re[i + k + len / 2] * curIm + im[i + k + len / 2] * curRe;
        re[i + k] = uRe + vRe;
        im[i + k] = uIm + vIm;
        re[i + k + len / 2] = uRe - vRe;
        im[i + k + len / 2] = uIm - vIm;
        const nextRe = curRe * wRe - curIm * wIm;
        curIm = curRe * wIm + curIm * wRe;
        curRe = nextRe;
      }
    }
  }
}

/** Hann-windowed power spectrum of one chunk, padded to a power of two. */
export function powerSpectrum(samples: Float32Array, sampleRate: number): {
  freqs: Float64Array;
  power: Float64Array;
} {
  let n = 1;
  while (n < samples.length) n <<= 1;
  const re = new Float64Array(n);
  const im = new Float64Array(n);
  for (let i = 0; i < samples.length; i++) {
    const w = 0.5 - 0.5 * Math.cos((2 * Math.PI * i) / samples.length);
    re[i] = samples[i] * w;
  }
  fft(re, im);
  const half = n / 2 + 1;
  const freqs = new Float64Array(half);
  const power = new Float64Array(half);
  for (let k = 0; k < half; k++) {
    freqs[k] = (k * sampleRate) / n;
    power[k] = re[k] * re[k] + im[k] * im[k];
  }
  return { freqs, power };
}

/** Log-log display points between fLo and fHi (defaults 50 Hz - 20 kHz). */
export function logLogPoints(
  samples: Float32Array,
  sampleRate: number,
  nPoints = 256,
  fLo = 50,
  fHi = 20_000,
): SpectrumPoint[] {
  const { freqs, power } = powerSpectrum(samples, sampleRate);
  const total = power.reduce((a, b) => a + b, 0);
  const floor = total > 0 ? Math.max(...power) * 1e-12 : 1e-30;
  const out: SpectrumPoint[] = [];
  const logLo = Math.log10(fLo);
  const logHi = Math.log10(Math.min(fHi, sampleRate / 2));
  for (let i = 0; i < nPoints; i++) {
    const logF = logLo + ((logHi - logLo) * i) / (nPoints - 1);
    const f = 10 ** logF;
    let k = freqs.findIndex((v) => v >= f);
    if (k < 0) k = freqs.length - 1;
    const p = Math.max(power[k], floor);
    out.push({ logF, logI: Math.log10(total > 0 ? p / total : floor) });
  }
  return out;
}
