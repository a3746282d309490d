/** Payload shapes of the service REST/SSE contract. */

export interface FrameEvent {
  /** Frame index; shared with the matching verdict event. */
  id: number;
  /** Simulation timestamp, seconds. */
  t: number;
  /** Source frame interval, seconds. */
  dt: number;
  /** Downsampled heatmap width/height. */
  w: number;
  h: number;
  /** Temperature range the uint8 data spans, degC. */
  min: number;
  max: number;
  /** Base64 of w*h uint8 intensities. */
  data: string;
}

export interface VerdictEvent {
  id: number;
  t: number;
  y_raw: number[];
  y_clean: number[];
  imputed: number[];
  fault: string | null;
  e_max_m: number;
  wma: number;
  grad_wma: number;
  triggered_level: boolean;
  triggered_gradient: boolean;
  anomaly_pixels: number[];
}

export interface PredictionResult {
  horizon_steps: number;
  horizon_s: number;
  w: number;
  anomaly_set: number[];
  x_merged: number[];
}

export interface StatusInfo {
  run_id: string;
  mode: string;
  voltage: number;
  frames_processed: number;
  uptime_s: number;
  last_verdict: VerdictEvent | null;
  model: ModelInfo;
}

export interface ModelInfo {
  r: number;
  s: number;
  width: number;
  height: number;
  sensor_indices: number[];
  fit_timestamp: number;
  detector: {
    m: number;
    gamma1: number;
    gamma2: number;
    N: number;
    dt: number;
    warmup: number;
  };
}
