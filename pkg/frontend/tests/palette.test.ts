import { describe, expect, it } from "vitest";

import {
  colormap,
  decodeBase64,
  heatmapToRgba,
  overlayCells,
} from "../src/palette.js";
import { horizonLabel, verbatim } from "../src/format.js";

describe("colormap", () => {
  it("hits the fixed endpoints", () => {
    expect(colormap(0)).toEqual([68, 1, 84]);
    expect(colormap(1)).toEqual([253, 231, 37]);
  });

  it("clamps out-of-range intensities", () => {
    expect(colormap(-0.5)).toEqual(colormap(0));
    expect(colormap(1.5)).toEqual(colormap(1));
  });

  it("is monotonically brighter (green channel) along the ramp", () => {
    let prev = -1;
    for (let i = 0; i <= 10; i++) {
      const [, g] = colormap(i / 10);
      expect(g).toBeGreaterThanOrEqual(prev);
      prev = g;
    }
  });
});

describe("heatmapToRgba", () => {
  it("produces opaque RGBA per byte", () => {
    const rgba = heatmapToRgba(new Uint8Array([0, 128, 255]));
    expect(rgba).toHaveLength(12);
    expect([rgba[0], rgba[1], rgba[2]]).toEqual([68, 1, 84]);
    expect([rgba[8], rgba[9], rgba[10]]).toEqual([253, 231, 37]);
    expect(rgba[3]).toBe(255);
    expect(rgba[11]).toBe(255);
  });
});

describe("decodeBase64", () => {
  it("round-trips bytes", () => {
    const bytes = Uint8Array.from([0, 7, 200, 255]);
    const b64 = Buffer.from(bytes).toString("base64");
    expect([...decodeBase64(b64)]).toEqual([...bytes]);
  });
});

describe("overlayCells", () => {
  it("maps full-resolution indices onto the downsampled grid", () => {
    // 260x300 full grid downsampled to 130x150: stride 2 in each axis.
    const px = (x: number, y: number) => y * 260 + x;
    const cells = overlayCells([px(10, 20), px(11, 21)], 260, 300, 130, 150);
    expect(cells).toEqual([10 * 130 + 5]); // both collapse to one cell
  });

  it("is identity-like when no downsampling happens", () => {
    const cells = overlayCells([3, 17], 10, 10, 10, 10);
    expect(cells).toEqual([3, 17]);
  });

  it("clamps to the heatmap bounds", () => {
    const cells = overlayCells([259 + 299 * 260], 260, 300, 130, 150);
    expect(cells[0]).toBe(149 * 130 + 129);
  });
});

describe("format", () => {
  it("renders statistics verbatim with no rounding", () => {
    expect(verbatim(0.30000000000000004)).toBe("0.30000000000000004");
    expect(verbatim(1e-7)).toBe("1e-7");
    expect(verbatim(true)).toBe("true");
  });

  it("labels horizons in seconds", () => {
    expect(horizonLabel(350)).toBe("350 s");
    expect(horizonLabel(17.5)).toBe("17.5 s");
  });
});
