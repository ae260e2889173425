import { PNG } from 'pngjs';

/** A decoded image reduced to per-pixel luma, row-major. */
export interface GrayImage {
  width: number;
  height: number;
  /** luma in [0, 255]: round(0.299 R + 0.587 G + 0.114 B) */
  luma: Uint8Array;
}

export function decodeImage(pngBytes: Buffer): GrayImage {
  const png = PNG.sync.read(pngBytes);
  const { width, height, data } = png;
  const luma = new Uint8Array(width * height);
  for (let i = 0; i < width * height; i++) {
    const r = data[4 * i];
    const g = data[4 * i + 1];
    const b = data[4 * i + 2];
    luma[i] = Math.floor(0.299 * r + 0.587 * g + 0.114 * b + 0.5);
  }
  return { width, height, luma };
}

/** Encode a 0/1 mask as a single-channel 8-bit PNG with values 0/255. */
export function encodeMask(mask: Uint8Array, width: number, height: number): Buffer {
  const png = new PNG({ width, height });
  const gray = Buffer.alloc(width * height);
  for (let i = 0; i < width * height; i++) {
    gray[i] = mask[i] ? 255 : 0;
  }
  png.data = gray as unknown as Buffer;
  return PNG.sync.write(png, {
    colorType: 0,
    inputColorType: 0,
    inputHasAlpha: false,
    bitDepth: 8,
  });
}

/** Decode a mask PNG back to 0/1 values (used by the tests). */
export function decodeMask(pngBytes: Buffer): { width: number; height: number; bits: Uint8Array } {
  const png = PNG.sync.read(pngBytes);
  const bits = new Uint8Array(png.width * png.height);
  for (let i = 0; i < bits.length; i++) {
    bits[i] = png.data[4 * i] >= 128 ? 1 : 0;
  }
  return { width: png.width, height: png.height, bits };
}
