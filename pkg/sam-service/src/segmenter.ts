import { encodeMask, GrayImage } from './png';
import { Prompt } from './protocol';

export interface SegmentJob {
  /** the request's PNG, untouched (model-backed segmenters consume this) */
  imagePngBase64: string;
  /** the same image decoded to luma (intensity segmenter consumes this) */
  image: GrayImage;
  prompt: Prompt;
}

/** Maps (image, prompt) to a base64 mask PNG of the image's dimensions. */
export interface Segmenter {
  readonly name: string;
  segment(job: SegmentJob): Promise<string>;
}

const NEIGHBORS = [
  [-1, -1], [-1, 0], [-1, 1],
  [0, -1], [0, 1],
  [1, -1], [1, 0], [1, 1],
] as const;

/**
 * Deterministic intensity-based segmenter for running without SAM weights.
 *
 * Point prompts: 8-connected flood fill from the seed, keeping pixels whose
 * luma is within `tolerance` of the seed's. Box prompts: Otsu threshold over
 * the box, keep the class whose mean luma is closer to the box-center pixel,
 * return its largest 8-connected component (whole box when the histogram
 * occupies a single bin). Matches the engine's reference backend bit for bit.
 */
export class IntensitySegmenter implements Segmenter {
  readonly name = 'intensity';

  constructor(private readonly tolerance = 12) {}

  async segment(job: SegmentJob): Promise<string> {
    const { image, prompt } = job;
    const bits =
      prompt.type === 'point'
        ? this.floodPoint(image, prompt.x, prompt.y)
        : this.otsuBox(image, prompt.x_min, prompt.y_min, prompt.x_max, prompt.y_max);
    return encodeMask(bits, image.width, image.height).toString('base64');
  }

  private floodPoint(image: GrayImage, x: number, y: number): Uint8Array {
    const { width, height, luma } = image;
    const out = new Uint8Array(width * height);
    const seed = luma[y * width + x];
    const queue = new Int32Array(width * height);
    out[y * width + x] = 1;
    queue[0] = y * width + x;
    let head = 0;
    let tail = 1;
    while (head < tail) {
      const p = queue[head++];
      const py = Math.floor(p / width);
      const px = p - py * width;
      for (const [dy, dx] of NEIGHBORS) {
        const ny = py + dy;
        const nx = px + dx;
        if (ny < 0 || ny >= height || nx < 0 || nx >= width) continue;
        const q = ny * width + nx;
        if (out[q]) continue;
        const d = luma[q] - seed;
        if (d >= -this.tolerance && d <= this.tolerance) {
          out[q] = 1;
          queue[tail++] = q;
        }
      }
    }
    return out;
  }

  private otsuBox(image: GrayImage, x0: number, y0: number, x1: number, y1: number): Uint8Array {
    const { width, luma } = image;
    const out = new Uint8Array(width * image.height);
    const bw = x1 - x0 + 1;
    const bh = y1 - y0 + 1;
    const hist = new Array<number>(256).fill(0);
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        hist[luma[y * width + x]]++;
      }
    }
    const k = otsuThreshold(hist);
    if (k === null) {
      for (let y = y0; y <= y1; y++) {
        for (let x = x0; x <= x1; x++) out[y * width + x] = 1;
      }
      return out;
    }
    // class means from integer histogram sums (exact arithmetic)
    let nLow = 0;
    let sumLow = 0;
    let nHigh = 0;
    let sumHigh = 0;
    for (let v = 0; v < 256; v++) {
      if (v <= k) {
        nLow += hist[v];
        sumLow += v * hist[v];
      } else {
        nHigh += hist[v];
        sumHigh += v * hist[v];
      }
    }
    const meanLow = sumLow / nLow;
    const meanHigh = sumHigh / nHigh;
    const cx = Math.floor((x0 + x1) / 2);
    const cy = Math.floor((y0 + y1) / 2);
    const center = luma[cy * width + cx];
    const pickLow = Math.abs(meanLow - center) <= Math.abs(meanHigh - center);

    // membership of the chosen class, box-local
    const chosen = new Uint8Array(bw * bh);
    for (let y = 0; y < bh; y++) {
      for (let x = 0; x < bw; x++) {
        const v = luma[(y0 + y) * width + (x0 + x)];
        chosen[y * bw + x] = (v <= k) === pickLow ? 1 : 0;
      }
    }
    const best = largestComponent(chosen, bw, bh);
    for (let y = 0; y < bh; y++) {
      for (let x = 0; x < bw; x++) {
        if (best[y * bw + x]) out[(y0 + y) * width + (x0 + x)] = 1;
      }
    }
    return out;
  }
}

/**
 * Between-class-variance-maximizing split of a 256-bin histogram; classes
 * are (v <= k) and (v > k), both nonempty. Null for a single occupied bin;
 * ties take the smallest k.
 */
export function otsuThreshold(hist: number[]): number | null {
  let lo = -1;
  let hi = -1;
  let total = 0;
  for (let i = 0; i < 256; i++) {
    if (hist[i] > 0) {
      if (lo < 0) lo = i;
      hi = i;
      total += hist[i];
    }
  }
  if (lo < 0 || lo === hi) return null;
  const p = new Float64Array(256);
  for (let i = 0; i < 256; i++) p[i] = hist[i] / total;
  const omega = new Float64Array(256);
  const mu = new Float64Array(256);
  let accOmega = 0;
  let accMu = 0;
  for (let i = 0; i < 256; i++) {
    accOmega += p[i];
    omega[i] = accOmega;
    accMu += p[i] * i;
    mu[i] = accMu;
  }
  const muT = mu[255];
  let bestK = lo;
  let bestV = -Infinity;
  for (let k = lo; k < hi; k++) {
    const num = (muT * omega[k] - mu[k]) ** 2;
    const den = omega[k] * (1 - omega[k]);
    const v = num / den;
    if (v > bestV) {
      bestV = v;
      bestK = k;
    }
  }
  return bestK;
}

/** Largest 8-connected component; ties go to the earliest first pixel in
 *  row-major order. */
function largestComponent(bits: Uint8Array, w: number, h: number): Uint8Array {
  const labels = new Int32Array(w * h); // 0 = unvisited/background
  const queue = new Int32Array(w * h);
  let next = 0;
  let bestLabel = 0;
  let bestSize = 0;
  for (let start = 0; start < w * h; start++) {
    if (!bits[start] || labels[start]) continue;
    next++;
    labels[start] = next;
    queue[0] = start;
    let head = 0;
    let tail = 1;
    while (head < tail) {
      const p = queue[head++];
      const py = Math.floor(p / w);
      const px = p - py * w;
      for (const [dy, dx] of NEIGHBORS) {
        const ny = py + dy;
        const nx = px + dx;
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        const q = ny * w + nx;
        if (bits[q] && !labels[q]) {
          labels[q] = next;
          queue[tail++] = q;
        }
      }
    }
    if (tail > bestSize) {
      bestSize = tail;
      bestLabel = next;
    }
  }
  const out = new Uint8Array(w * h);
  for (let i = 0; i < w * h; i++) {
    out[i] = labels[i] === bestLabel ? 1 : 0;
  }
  return out;
}
