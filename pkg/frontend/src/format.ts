/** Display formatting. Statistics are rendered verbatim — the shortest
 * round-trip decimal of the payload value — never recomputed or
 * rounded client-side. */

export function verbatim(value: number | boolean | null): string {
  return String(value);
}

/** Horizon label in seconds, e.g. 350 -> "350 s". */
export function horizonLabel(horizonSeconds: number): string {
  return `${horizonSeconds} s`;
}

export function voltageLabel(volts: number): string {
  return `${volts} V`;
}
