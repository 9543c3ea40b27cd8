/**
 * Toy latent decoder for the "decode" op: per-channel affine map from
 * [min, max] to [0, 255] and a binary PPM. Single-channel latents are
 * replicated to gray RGB; a channel with no spread maps to mid-gray 128.
 * Rounding is to nearest, ties to even, so output bytes match other
 * implementations of the same mapping exactly.
 */

function rintByte(v: number): number {
  // v lies in [0, 255]
  const floor = Math.floor(v);
  const frac = v - floor;
  if (frac > 0.5) {
    return floor + 1;
  }
  if (frac < 0.5) {
    return floor;
  }
  return floor % 2 === 0 ? floor : floor + 1;
}

/** Render an (h, w, c) row-major tensor, c in {1, 3}, as PPM bytes. */
export function ppmFromLatent(values: Float64Array, h: number, w: number, c: number): Buffer {
  if (c !== 1 && c !== 3) {
    throw new RangeError(`PPM needs 1 or 3 channels, got ${c}`);
  }
  if (values.length !== h * w * c) {
    throw new RangeError(`tensor holds ${values.length} values, shape needs ${h * w * c}`);
  }
  const lo = [Infinity, Infinity, Infinity];
  const hi = [-Infinity, -Infinity, -Infinity];
  const channel = (row: number, col: number, ch: number): number => {
    const src = c === 1 ? 0 : ch;
    return values[(row * w + col) * c + src];
  };
  for (let row = 0; row < h; row++) {
    for (let col = 0; col < w; col++) {
      for (let ch = 0; ch < 3; ch++) {
        const v = channel(row, col, ch);
        if (v < lo[ch]) lo[ch] = v;
        if (v > hi[ch]) hi[ch] = v;
      }
    }
  }
  const header = Buffer.from(`P6\n${w} ${h}\n255\n`, "ascii");
  const body = Buffer.alloc(h * w * 3);
  let at = 0;
  for (let row = 0; row < h; row++) {
    for (let col = 0; col < w; col++) {
      for (let ch = 0; ch < 3; ch++) {
        const span = hi[ch] - lo[ch];
        if (span === 0.0) {
          body[at++] = 128;
        } else {
          body[at++] = rintByte(((channel(row, col, ch) - lo[ch]) / span) * 255.0);
        }
      }
    }
  }
  return Buffer.concat([header, body]);
}
