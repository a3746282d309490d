/** Pure geometry for the two monitoring timelines (error statistic and
 * its moving-average gradient) with their threshold lines. The values
 * plotted are payload values; only coordinates are computed here. */

import type { VerdictEvent } from "./types.js";

export interface TimelineSeries {
  /** [x, y] pairs in plot space, x in [0, 1], y in [0, 1] (1 = top). */
  points: Array<[number, number]>;
  /** Threshold height in the same [0, 1] space, or null if off-scale. */
  threshold: number | null;
  /** Data maximum used for scaling (>= threshold so the line shows). */
  scaleMax: number;
}

function build(
  values: number[],
  threshold: number,
  capacity: number,
): TimelineSeries {
  const scaleMax = Math.max(threshold * 1.25, ...values, 1e-12);
  const points: Array<[number, number]> = values.map((v, i) => [
    capacity <= 1 ? 0 : i / (capacity - 1),
    Math.min(1, v / scaleMax),
  ]);
  const th = threshold / scaleMax;
  return { points, threshold: th <= 1 ? th : null, scaleMax };
}

export function errorTimeline(
  verdicts: VerdictEvent[],
  gamma1: number,
  capacity = 1000,
): TimelineSeries {
  return build(
    verdicts.map((v) => v.e_max_m),
    gamma1,
    capacity,
  );
}

export function gradientTimeline(
  verdicts: VerdictEvent[],
  gamma2: number,
  capacity = 1000,
): TimelineSeries {
  return build(
    verdicts.map((v) => v.grad_wma),
    gamma2,
    capacity,
  );
}
