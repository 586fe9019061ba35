/** Decoding of the service's base64 16-bit binary PGM image payloads. */

export interface GrayImage {
  width: number;
  height: number;
  /** Row-major pixel values in [0, 1]. */
  pixels: Float64Array;
}

function decodeBase64(data: string): Uint8Array {
  const binary = atob(data);
  const bytes = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) {
    bytes[i] = binary.charCodeAt(i);
  }
  return bytes;
}

/** Parse a base64-encoded binary PGM (P5, maxval 65535, big-endian). */
export function decodePgm(base64: string): GrayImage {
  const bytes = decodeBase64(base64);
  const headerText = new TextDecoder("ascii").decode(bytes.slice(0, 64));
  const match = headerText.match(/^P5\s+(\d+)\s+(\d+)\s+(\d+)\s/);
  if (!match) {
    throw new Error("not a binary PGM payload");
  }
  const width = parseInt(match[1], 10);
  const height = parseInt(match[2], 10);
  const maxval = parseInt(match[3], 10);
  if (maxval !== 65535) {
    throw new Error(`expected 16-bit PGM, got maxval ${maxval}`);
  }
  const offset = match[0].length;
  const expected = width * height;
  if (bytes.length < offset + expected * 2) {
    throw new Error("truncated PGM pixel data");
  }
  const pixels = new Float64Array(expected);
  for (let i = 0; i < expected; i++) {
    const hi = bytes[offset + 2 * i];
    const lo = bytes[offset + 2 * i + 1];
    pixels[i] = (hi * 256 + lo) / 65535;
  }
  return { width, height, pixels };
}

/**
 * Expand a grayscale image into RGBA bytes at an integer scale factor using
 * nearest-neighbor replication (factor 1 means pixel-exact).
 */
export function toRgbaScaled(image: GrayImage, factor: number) {
  const w = image.width * factor;
  const h = image.height * factor;
  const out = new Uint8ClampedArray(new ArrayBuffer(w * h * 4));
  for (let y = 0; y < h; y++) {
    const srcY = Math.floor(y / factor);
    for (let x = 0; x < w; x++) {
      const srcX = Math.floor(x / factor);
      const v = Math.round(image.pixels[srcY * image.width + srcX] * 255);
      const o = (y * w + x) * 4;
      out[o] = v;
      out[o + 1] = v;
      out[o + 2] = v;
      out[o + 3] = 255;
    }
  }
  return out;
}
