/** Heatmap colour mapping and pixel-coordinate helpers.
 *
 * The palette is fixed; intensity scaling comes from the min/max
 * metadata on each frame event so consecutive frames stay comparable.
 */

/** Viridis-like control points (position in [0,1], rgb). */
const STOPS: ReadonlyArray<[number, number, number, number]> = [
  [0.0, 68, 1, 84],
  [0.25, 59, 82, 139],
  [0.5, 33, 145, 140],
  [0.75, 94, 201, 98],
  [1.0, 253, 231, 37],
];

/** Map a normalized intensity in [0,1] to an [r, g, b] triple. */
export function colormap(v: number): [number, number, number] {
  const x = Math.min(1, Math.max(0, v));
  for (let i = 1; i < STOPS.length; i++) {
    const [p1, r1, g1, b1] = STOPS[i]!;
    if (x <= p1) {
      const [p0, r0, g0, b0] = STOPS[i - 1]!;
      const f = p1 === p0 ? 0 : (x - p0) / (p1 - p0);
      return [
        Math.round(r0 + f * (r1 - r0)),
        Math.round(g0 + f * (g1 - g0)),
        Math.round(b0 + f * (b1 - b0)),
      ];
    }
  }
  const [, r, g, b] = STOPS[STOPS.length - 1]!;
  return [r, g, b];
}

/** Decode base64 to bytes in either browser or node. */
export function decodeBase64(s: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(s);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  return Uint8Array.from(Buffer.from(s, "base64"));
}

/** Expand w*h uint8 intensities into an RGBA buffer for a canvas. */
export function heatmapToRgba(bytes: Uint8Array): Uint8ClampedArray<ArrayBuffer> {
  const rgba = new Uint8ClampedArray(bytes.length * 4);
  for (let i = 0; i < bytes.length; i++) {
    const [r, g, b] = colormap(bytes[i]! / 255);
    rgba[i * 4] = r;
    rgba[i * 4 + 1] = g;
    rgba[i * 4 + 2] = b;
    rgba[i * 4 + 3] = 255;
  }
  return rgba;
}

/** Map full-resolution anomaly pixel indices onto the downsampled
 * heatmap grid. The service samples every ceil(W/w)-th column and
 * ceil(H/h)-th row. Returns deduplicated heatmap cell indices. */
export function overlayCells(
  pixels: number[],
  fullWidth: number,
  fullHeight: number,
  heatWidth: number,
  heatHeight: number,
): number[] {
  const sx = Math.max(1, Math.ceil(fullWidth / heatWidth));
  const sy = Math.max(1, Math.ceil(fullHeight / heatHeight));
  const cells = new Set<number>();
  for (const p of pixels) {
    const x = p % fullWidth;
    const y = Math.floor(p / fullWidth);
    const hx = Math.min(heatWidth - 1, Math.floor(x / sx));
    const hy = Math.min(heatHeight - 1, Math.floor(y / sy));
    cells.add(hy * heatWidth + hx);
  }
  return [...cells].sort((a, b) => a - b);
}
