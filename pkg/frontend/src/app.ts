/** Browser wiring: one UI thread, the event stream consumed
 * asynchronously, control requests serialized per widget. Everything
 * rendered is a verbatim service payload value. */

import { TwinClient, RequestError } from "./client.js";
import { decodeBase64, heatmapToRgba, overlayCells } from "./palette.js";
import { UiStore } from "./state.js";
import { errorTimeline, gradientTimeline, TimelineSeries } from "./timeline.js";
import { horizonLabel, verbatim, voltageLabel } from "./format.js";
import type { FrameEvent, ModelInfo } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function drawHeatmap(
  canvas: HTMLCanvasElement,
  frame: FrameEvent,
  anomalyPixels: number[],
  model: ModelInfo,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  canvas.width = frame.w;
  canvas.height = frame.h;
  const rgba = heatmapToRgba(decodeBase64(frame.data));
  ctx.putImageData(new ImageData(rgba, frame.w, frame.h), 0, 0);
  if (anomalyPixels.length > 0) {
    ctx.fillStyle = "rgba(255, 0, 0, 0.85)";
    for (const cell of overlayCells(
      anomalyPixels,
      model.width,
      model.height,
      frame.w,
      frame.h,
    )) {
      ctx.fillRect(cell % frame.w, Math.floor(cell / frame.w), 1, 1);
    }
  }
}

function drawTimeline(
  canvas: HTMLCanvasElement,
  series: TimelineSeries,
  color: string,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width: W, height: H } = canvas;
  ctx.clearRect(0, 0, W, H);
  if (series.threshold !== null) {
    ctx.strokeStyle = "red";
    ctx.setLineDash([5, 4]);
    ctx.beginPath();
    const y = H * (1 - series.threshold);
    ctx.moveTo(0, y);
    ctx.lineTo(W, y);
    ctx.stroke();
    ctx.setLineDash([]);
  }
  ctx.strokeStyle = color;
  ctx.beginPath();
  series.points.forEach(([x, y], i) => {
    const px = x * W;
    const py = H * (1 - y);
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.stroke();
}

export function startApp(): void {
  const base =
    new URLSearchParams(location.search).get("service") ??
    "http://127.0.0.1:8080";
  const client = new TwinClient(base);
  const store = new UiStore();

  const heatmap = el<HTMLCanvasElement>("heatmap");
  const predicted = el<HTMLCanvasElement>("predicted");
  const errorCanvas = el<HTMLCanvasElement>("timeline-error");
  const gradCanvas = el<HTMLCanvasElement>("timeline-grad");
  const statsNode = el<HTMLElement>("stats");
  const connNode = el<HTMLElement>("connection");
  const voltSlider = el<HTMLInputElement>("voltage");
  const voltLabel = el<HTMLElement>("voltage-label");
  const injectBtn = el<HTMLButtonElement>("inject-splash");
  const predictBtn = el<HTMLButtonElement>("predict");
  const predLabel = el<HTMLElement>("prediction-label");
  const errNode = el<HTMLElement>("inline-error");
  const gammaInput = el<HTMLInputElement>("gamma1");

  let model: ModelInfo | null = null;
  void client.model().then((m) => {
    model = m;
    gammaInput.value = String(m.detector.gamma1);
  });

  const render = () => {
    if (store.latestFrame && model) {
      drawHeatmap(
        heatmap,
        store.latestFrame,
        store.latestVerdict?.anomaly_pixels ?? [],
        model,
      );
    }
    if (model) {
      drawTimeline(
        errorCanvas,
        errorTimeline(store.verdicts, model.detector.gamma1),
        "#2060c0",
      );
      drawTimeline(
        gradCanvas,
        gradientTimeline(store.verdicts, model.detector.gamma2),
        "#20a060",
      );
    }
    const v = store.latestVerdict;
    if (v) {
      statsNode.textContent =
        `t=${verbatim(v.t)}  e_max_m=${verbatim(v.e_max_m)}  ` +
        `wma=${verbatim(v.wma)}  grad=${verbatim(v.grad_wma)}  ` +
        `level=${verbatim(v.triggered_level)}  ` +
        `gradient=${verbatim(v.triggered_gradient)}  ` +
        `anomaly px=${v.anomaly_pixels.length}`;
    }
    connNode.textContent = store.connection;
    connNode.className = store.connection;
  };

  client.subscribe({
    onFrame: (f) => {
      if (store.applyFrame(f)) render();
    },
    onVerdict: (v) => {
      if (store.applyVerdict(v)) render();
    },
    onConnectionChange: (live) => {
      store.setConnection(live ? "live" : "stale");
      render();
    },
  });

  voltSlider.addEventListener("change", () => {
    const volts = Number(voltSlider.value);
    voltLabel.textContent = voltageLabel(volts); // optimistic
    client.setVoltage(volts).then(
      () => client.status().then((s) => {
        voltLabel.textContent = voltageLabel(s.voltage);
      }),
      (err) => {
        void client.status().then((s) => {
          voltLabel.textContent = voltageLabel(s.voltage); // revert
        });
        errNode.textContent = String(err);
      },
    );
  });

  gammaInput.addEventListener("change", () => {
    // Threshold tuning is display-side: validate before any use.
    const g = Number(gammaInput.value);
    if (!(g > 0)) {
      errNode.textContent = "gamma1 must be positive";
      if (model) gammaInput.value = String(model.detector.gamma1);
      return;
    }
    errNode.textContent = "";
    if (model) model = { ...model, detector: { ...model.detector, gamma1: g } };
    render();
  });

  injectBtn.addEventListener("click", () => {
    if (!model) return;
    client
      .injectAnomaly({
        kind: "splash",
        cx: Math.floor(model.width / 2),
        cy: Math.floor(model.height / 2),
        radius: 4,
        magnitude: 4.0,
      })
      .catch((err) => {
        errNode.textContent = String(err);
      });
  });

  predictBtn.addEventListener("click", () => {
    const token = store.nextPredictionToken();
    predLabel.textContent = "computing…";
    client.requestPrediction({ profile: "w100l100" }).then(
      (result) => {
        if (!store.applyPrediction(token, result) || !model) return;
        predLabel.textContent = horizonLabel(result.horizon_s);
        // Render the merged forecast next to the live view.
        const W = model.width;
        const H = model.height;
        const values = result.x_merged;
        let lo = Infinity;
        let hi = -Infinity;
        for (const x of values) {
          if (x < lo) lo = x;
          if (x > hi) hi = x;
        }
        const span = hi > lo ? hi - lo : 1;
        const bytes = new Uint8Array(values.length);
        for (let i = 0; i < values.length; i++) {
          bytes[i] = Math.max(
            0,
            Math.min(255, Math.round(((values[i]! - lo) / span) * 255)),
          );
        }
        predicted.width = W;
        predicted.height = H;
        const ctx = predicted.getContext("2d");
        ctx?.putImageData(new ImageData(heatmapToRgba(bytes), W, H), 0, 0);
      },
      (err) => {
        if (err instanceof RequestError && err.status === 409) {
          predLabel.textContent = `unavailable — ${err.detail}`;
        } else {
          predLabel.textContent = String(err);
        }
      },
    );
  });
}

if (typeof document !== "undefined" && document.getElementById("heatmap")) {
  startApp();
}
