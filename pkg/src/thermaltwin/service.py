"""HTTP + server-sent-events facade binding simulator, pipeline, and
dashboard: telemetry out, control in, run persistence.

One background thread owns the simulator/pipeline loop (single writer);
SSE fan-out goes through bounded per-client queues so a slow client can
never block the hot path. Control commands are queued and applied
atomically between simulator steps.
"""

from __future__ import annotations

import base64
import json
import os
import queue
import re
import socket
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Response
from pydantic import BaseModel, Field

from .config import TwinConfig
from .datamodel import load_dataset, unstack
from .errors import InsufficientHistory, PortInUse
from .pipeline import (
    RuntimeState,
    TwinModel,
    persist_run,
    process_frame,
    request_prediction,
)
from .simulator import SimState, disc_mask, inject_anomaly, remove_anomaly, render_frame, step


class VoltageCommand(BaseModel):
    volts: float = Field(ge=0.0, le=1000.0)


class AnomalyCommand(BaseModel):
    kind: str = Field(pattern="^(splash|object)$")
    cx: int = Field(ge=0)
    cy: int = Field(ge=0)
    radius: int = Field(ge=1)
    magnitude: float


@dataclass
class _Client:
    q: queue.Queue
    overflowed: bool = False


@dataclass
class _PredictionSlot:
    status: str = "idle"      # idle | pending | ready | error
    bundle_json: str | None = None
    error: str | None = None


class TwinService:
    """Owns the live loop and the broadcast state the HTTP layer reads."""

    def __init__(self, cfg: TwinConfig, model: TwinModel,
                 replay_frames=None, seed: int = 0):
        self.cfg = cfg
        self.model = model
        self.mode = "replay" if replay_frames is not None else "live"
        self.run_id = uuid.uuid4().hex[:12]
        self.seed = seed
        self.started = time.time()

        self.sim = SimState.ambient(cfg.simulator)
        self.state = RuntimeState(model)
        self.replay_frames = list(replay_frames) if replay_frames else None

        self._commands: queue.Queue = queue.Queue()
        self._clients: list[_Client] = []
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._pred_thread: threading.Thread | None = None
        self._pred_slots: dict[tuple[int, int], _PredictionSlot] = {}
        self._pred_queue: queue.Queue = queue.Queue()

        self.frame_index = 0
        self.last_frame = None
        self.last_verdict = None
        self.frames_log = []
        self.verdicts_log = []
        self.anomaly_ids: list[int] = []

    # -- control ---------------------------------------------------------

    def submit(self, command: dict) -> None:
        self._commands.put(command)

    def _apply_commands(self) -> None:
        while True:
            try:
                cmd = self._commands.get_nowait()
            except queue.Empty:
                return
            if cmd["op"] == "voltage":
                self.sim.voltage = float(cmd["volts"])
            elif cmd["op"] == "anomaly":
                mask = disc_mask(self.cfg.simulator, cmd["cx"], cmd["cy"],
                                 cmd["radius"])
                aid = inject_anomaly(self.sim, cmd["kind"], mask,
                                     cmd["magnitude"])
                self.anomaly_ids.append(aid)
                cmd["reply"].put(aid)
            elif cmd["op"] == "remove_anomaly":
                cmd["reply"].put(remove_anomaly(self.sim, cmd["id"]))

    # -- event fan-out -----------------------------------------------------

    def subscribe(self) -> _Client:
        client = _Client(q=queue.Queue(maxsize=self.cfg.service.client_buffer))
        with self._lock:
            self._clients.append(client)
        return client

    def unsubscribe(self, client: _Client) -> None:
        with self._lock:
            if client in self._clients:
                self._clients.remove(client)

    def _broadcast(self, event: str, data: str) -> None:
        with self._lock:
            clients = list(self._clients)
        for c in clients:
            try:
                c.q.put_nowait((event, data))
            except queue.Full:
                c.overflowed = True
                try:
                    c.q.get_nowait()          # make room for the final event
                    c.q.put_nowait(("overflow", "{}"))
                except (queue.Empty, queue.Full):
                    pass
                self.unsubscribe(c)

    def _heatmap_event(self, frame) -> str:
        scfg = self.cfg.service
        img = frame.image()
        sy = max(1, int(np.ceil(img.shape[0] / scfg.heatmap_max_h)))
        sx = max(1, int(np.ceil(img.shape[1] / scfg.heatmap_max_w)))
        small = img[::sy, ::sx]
        lo, hi = float(small.min()), float(small.max())
        span = hi - lo if hi > lo else 1.0
        u8 = np.clip((small - lo) / span * 255.0, 0, 255).astype(np.uint8)
        return json.dumps({
            "id": self.frame_index,
            "t": frame.t,
            "dt": self.model.detector_cfg.dt,
            "w": u8.shape[1], "h": u8.shape[0],
            "min": lo, "max": hi,
            "data": base64.b64encode(u8.tobytes()).decode(),
        })

    # -- main loop ---------------------------------------------------------

    def _next_frame(self):
        if self.replay_frames is not None:
            if self.frame_index >= len(self.replay_frames):
                return None
            return self.replay_frames[self.frame_index]
        self._apply_commands()
        self.sim = step(self.sim, self.cfg.simulator.dt)
        return render_frame(self.sim, noise_seed=self.seed + self.frame_index)

    def _loop(self) -> None:
        period = self.cfg.service.frame_period_s / max(self.cfg.service.speedup,
                                                       1e-9)
        while not self._stop.is_set():
            t0 = time.perf_counter()
            frame = self._next_frame()
            if frame is None:
                break
            verdict = process_frame(self.model, frame, self.state)
            with self._lock:
                self.last_frame = frame
                self.last_verdict = verdict
                self.frames_log.append(frame)
                self.verdicts_log.append(verdict)
            self._broadcast("frame", self._heatmap_event(frame))
            vjson = json.loads(verdict.to_json())
            vjson["id"] = self.frame_index
            self._broadcast("verdict", json.dumps(vjson))
            self.frame_index += 1
            remaining = period - (time.perf_counter() - t0)
            if remaining > 0:
                self._stop.wait(remaining)

    def _prediction_worker(self) -> None:
        while not self._stop.is_set():
            try:
                key = self._pred_queue.get(timeout=0.1)
            except queue.Empty:
                continue
            w, l = key
            slot = self._pred_slots[key]
            try:
                with self._lock:
                    pass  # history is single-writer; reads below copy
                bundle = request_prediction(self.model, self.state, w=w, l=l)
                payload = json.dumps({
                    "horizon_steps": bundle.horizon_steps,
                    "horizon_s": bundle.horizon_steps
                    * self.model.detector_cfg.dt,
                    "w": w,
                    "anomaly_set": bundle.anomaly_set.tolist(),
                    "x_merged": [round(float(v), 4)
                                 for v in bundle.x_merged],
                })
                slot.bundle_json = payload
                slot.status = "ready"
                self._broadcast("prediction", json.dumps({
                    "w": w, "l": l,
                    "horizon_s": bundle.horizon_steps
                    * self.model.detector_cfg.dt}))
            except InsufficientHistory as exc:
                slot.status = "error"
                slot.error = str(exc)

    def start(self) -> None:
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._pred_thread = threading.Thread(target=self._prediction_worker,
                                             daemon=True)
        self._thread.start()
        self._pred_thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread:
            self._thread.join(timeout=5)
        if self._pred_thread:
            self._pred_thread.join(timeout=5)

    def persist(self, runs_dir=None) -> str:
        runs_dir = runs_dir or self.cfg.service.runs_dir
        run_dir = os.path.join(runs_dir, self.run_id)
        with self._lock:
            frames = list(self.frames_log)
            verdicts = list(self.verdicts_log)
        persist_run(run_dir, frames, verdicts, self.cfg)
        return run_dir

    def status(self) -> dict:
        with self._lock:
            v = self.last_verdict
            return {
                "run_id": self.run_id,
                "mode": self.mode,
                "voltage": self.sim.voltage,
                "frames_processed": self.frame_index,
                "uptime_s": time.time() - self.started,
                "last_verdict": json.loads(v.to_json()) if v else None,
                "model": self.model_info(),
            }

    def model_info(self) -> dict:
        m = self.model
        return {
            "r": m.basis.r, "s": m.plan.s,
            "width": m.width, "height": m.height,
            "sensor_indices": m.plan.indices.tolist(),
            "fit_timestamp": m.fit_timestamp,
            "detector": vars(m.detector_cfg).copy(),
        }


def build_app(svc: TwinService) -> FastAPI:
    app = FastAPI(title="thermaltwin")

    @app.get("/api/status")
    def status():
        return svc.status()

    @app.get("/api/model")
    def model():
        return svc.model_info()

    @app.get("/api/frame/latest")
    def frame_latest():
        with svc._lock:
            frame = svc.last_frame
        if frame is None:
            raise HTTPException(404, "no frame processed yet")
        return Response(
            content=frame.values.astype("<f4").tobytes(),
            media_type="application/octet-stream",
            headers={"X-Width": str(frame.width),
                     "X-Height": str(frame.height),
                     "X-Timestamp": repr(frame.t)})

    @app.post("/api/control/voltage")
    def control_voltage(cmd: VoltageCommand):
        svc.submit({"op": "voltage", "volts": cmd.volts})
        return {"ok": True, "volts": cmd.volts}

    @app.post("/api/control/anomaly")
    def control_anomaly(cmd: AnomalyCommand):
        scfg = svc.cfg.simulator
        if not (cmd.cx < scfg.width and cmd.cy < scfg.height):
            raise HTTPException(422, "anomaly center outside the grid")
        reply: queue.Queue = queue.Queue()
        svc.submit({"op": "anomaly", "reply": reply, **cmd.model_dump()})
        try:
            aid = reply.get(timeout=10)
        except queue.Empty:
            raise HTTPException(503, "simulator loop not running")
        return {"ok": True, "id": aid}

    @app.delete("/api/control/anomaly/{anomaly_id}")
    def control_anomaly_delete(anomaly_id: int):
        reply: queue.Queue = queue.Queue()
        svc.submit({"op": "remove_anomaly", "id": anomaly_id, "reply": reply})
        try:
            removed = reply.get(timeout=10)
        except queue.Empty:
            raise HTTPException(503, "simulator loop not running")
        if not removed:
            raise HTTPException(404, "no such anomaly")
        return {"ok": True}

    @app.get("/api/prediction")
    def prediction(w: int = Query(default=0, ge=0),
                   l: int = Query(default=0, ge=0),
                   profile: str = Query(default="")):
        if profile:
            # Profile names look like "w100l100".
            m = re.fullmatch(r"w(\d+)l(\d+)", profile)
            if not m:
                raise HTTPException(422, f"bad profile {profile!r}")
            w, l = int(m.group(1)), int(m.group(2))
        pcfg = svc.model.prediction_cfg
        key = (w or pcfg.state_w, l or pcfg.state_l)
        need = key[0] + 1 + key[1]
        slot = svc._pred_slots.setdefault(key, _PredictionSlot())
        if slot.status == "ready":
            payload = slot.bundle_json
            slot.status = "idle"     # next request recomputes
            return Response(content=payload, media_type="application/json")
        if slot.status == "error":
            err = slot.error
            slot.status = "idle"
            raise HTTPException(409, err)
        if slot.status == "idle":
            if len(svc.state.coeff_history) < need:
                raise HTTPException(
                    409, f"insufficient history: need {need} frames, "
                         f"have {len(svc.state.coeff_history)}")
            slot.status = "pending"
            svc._pred_queue.put(key)
        return Response(status_code=202,
                        content=json.dumps({"status": "pending",
                                            "required": need}),
                        media_type="application/json")

    @app.get("/api/runs")
    def runs():
        root = svc.cfg.service.runs_dir
        if not os.path.isdir(root):
            return []
        return sorted(d for d in os.listdir(root)
                      if os.path.isdir(os.path.join(root, d)))

    @app.get("/api/runs/{run_id}")
    def run_detail(run_id: str):
        run_dir = os.path.join(svc.cfg.service.runs_dir, run_id)
        if not os.path.isdir(run_dir):
            raise HTTPException(404, "unknown run")
        ds = load_dataset(os.path.join(run_dir, "frames.therm"))
        return {"run_id": run_id, "frames": ds.snapshots.k,
                "width": ds.width, "height": ds.height}

    @app.post("/api/persist")
    def persist():
        return {"run_dir": svc.persist()}

    @app.get("/events")
    def events():
        from starlette.responses import StreamingResponse

        client = svc.subscribe()

        def gen():
            try:
                while True:
                    try:
                        event, data = client.q.get(timeout=30)
                    except queue.Empty:
                        yield ": keepalive\n\n"
                        continue
                    yield f"event: {event}\ndata: {data}\n\n"
                    if event == "overflow":
                        return
            finally:
                svc.unsubscribe(client)

        return StreamingResponse(gen(), media_type="text/event-stream")

    return app


def serve(cfg: TwinConfig, model: TwinModel, replay_frames=None,
          addr: str | None = None, seed: int = 0, voltage: float = 0.0):
    """Run the service until interrupted; flushes the run log on shutdown."""
    import uvicorn

    addr = addr or os.environ.get("TWIN_ADDR") or cfg.service.addr
    host, _, port_s = addr.partition(":")
    port = int(port_s or 8080)

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        raise PortInUse(f"{addr}: {exc}") from exc
    finally:
        probe.close()

    svc = TwinService(cfg, model, replay_frames=replay_frames, seed=seed)
    svc.sim.voltage = voltage
    app = build_app(svc)
    svc.start()
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        svc.stop()
        try:
            svc.persist()
        except Exception:
            pass
    return svc


def load_replay_frames(run_dir):
    ds = load_dataset(os.path.join(run_dir, "frames.therm"))
    return unstack(ds.snapshots, ds.width, ds.height)
