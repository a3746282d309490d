import base64
import json
import queue
import socket
import threading
import time

import httpx
import numpy as np
import pytest
import uvicorn

from thermaltwin.errors import PortInUse
from thermaltwin.service import TwinService, build_app, load_replay_frames, serve


@pytest.fixture(scope="module")
def live(small_cfg, small_model):
    """One live service on a real socket, shared by the module's tests."""
    svc = TwinService(small_cfg, small_model, seed=42)
    svc.sim.voltage = 60.0
    app = build_app(svc)
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port,
                                           log_level="error"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        assert time.time() < deadline, "server failed to start"
        time.sleep(0.02)
    svc.start()
    client = httpx.Client(base_url=f"http://127.0.0.1:{port}", timeout=15)
    while svc.frame_index < 3:
        time.sleep(0.02)
    yield svc, client
    client.close()
    svc.stop()
    server.should_exit = True
    thread.join(timeout=5)


def sse_events(client, count, filter_event=None):
    """Collect `count` parsed events from the stream."""
    out = []
    with client.stream("GET", "/events") as resp:
        event = None
        for line in resp.iter_lines():
            if line.startswith("event:"):
                event = line.split(":", 1)[1].strip()
            elif line.startswith("data:") and event:
                if filter_event is None or event == filter_event:
                    out.append((event, json.loads(line.split(":", 1)[1])))
                    if len(out) >= count:
                        break
                event = None
    return out


class TestRestEndpoints:
    def test_status(self, live):
        svc, client = live
        r = client.get("/api/status")
        assert r.status_code == 200
        body = r.json()
        assert body["run_id"] == svc.run_id
        assert body["mode"] == "live"
        assert body["frames_processed"] > 0
        assert body["model"]["r"] == 3

    def test_model_metadata(self, live):
        _, client = live
        body = client.get("/api/model").json()
        assert body["s"] == 3
        assert len(body["sensor_indices"]) == 3
        assert body["detector"]["gamma1"] == 1.0

    def test_latest_frame_binary(self, live):
        svc, client = live
        r = client.get("/api/frame/latest")
        assert r.status_code == 200
        assert r.headers["content-type"] == "application/octet-stream"
        w = int(r.headers["x-width"])
        h = int(r.headers["x-height"])
        values = np.frombuffer(r.content, dtype="<f4")
        assert values.size == w * h
        assert np.all(np.isfinite(values))

    def test_voltage_control(self, live):
        svc, client = live
        r = client.post("/api/control/voltage", json={"volts": 85})
        assert r.status_code == 200
        deadline = time.time() + 5
        while svc.sim.voltage != 85.0:
            assert time.time() < deadline
            time.sleep(0.02)

    def test_voltage_validation(self, live):
        _, client = live
        assert client.post("/api/control/voltage",
                           json={"volts": -5}).status_code == 422
        assert client.post("/api/control/voltage",
                           json={}).status_code == 422

    def test_anomaly_lifecycle(self, live):
        _, client = live
        r = client.post("/api/control/anomaly",
                        json={"kind": "splash", "cx": 20, "cy": 22,
                              "radius": 3, "magnitude": 2.0})
        assert r.status_code == 200
        aid = r.json()["id"]
        assert client.delete(f"/api/control/anomaly/{aid}").status_code == 200
        assert client.delete(f"/api/control/anomaly/{aid}").status_code == 404

    def test_anomaly_validation(self, live):
        _, client = live
        assert client.post("/api/control/anomaly",
                           json={"kind": "melt", "cx": 1, "cy": 1,
                                 "radius": 2, "magnitude": 1.0}
                           ).status_code == 422
        assert client.post("/api/control/anomaly",
                           json={"kind": "splash", "cx": 9999, "cy": 1,
                                 "radius": 2, "magnitude": 1.0}
                           ).status_code == 422


class TestPrediction:
    def test_insufficient_history_is_conflict(self, live):
        _, client = live
        r = client.get("/api/prediction", params={"w": 100000, "l": 10})
        assert r.status_code == 409
        assert "insufficient history" in r.json()["detail"]

    def test_ticket_poll_lifecycle(self, live):
        svc, client = live
        while svc.frame_index < 20:
            time.sleep(0.02)
        r = client.get("/api/prediction", params={"w": 10, "l": 5})
        assert r.status_code in (200, 202)
        deadline = time.time() + 15
        while r.status_code == 202:
            assert time.time() < deadline
            time.sleep(0.05)
            r = client.get("/api/prediction", params={"w": 10, "l": 5})
        body = r.json()
        assert body["horizon_s"] == pytest.approx(5 * 3.5)
        assert len(body["x_merged"]) == svc.model.n

    def test_profile_parameter(self, live):
        _, client = live
        r = client.get("/api/prediction", params={"profile": "w10l5"})
        assert r.status_code in (200, 202)
        assert client.get("/api/prediction",
                          params={"profile": "later"}).status_code == 422


class TestEventStream:
    def test_verdict_per_frame_with_heatmap(self, live):
        svc, client = live
        events = sse_events(client, 8)
        kinds = [e for e, _ in events]
        assert "frame" in kinds and "verdict" in kinds
        frames = [d for e, d in events if e == "frame"]
        verdicts = [d for e, d in events if e == "verdict"]
        # Event ids pair frames with verdicts and never repeat per client.
        frame_ids = [f["id"] for f in frames]
        assert frame_ids == sorted(set(frame_ids))
        f = frames[0]
        assert f["w"] <= 130 and f["h"] <= 150
        data = base64.b64decode(f["data"])
        assert len(data) == f["w"] * f["h"]
        assert f["dt"] == 3.5  # source frame interval rides along
        v = verdicts[0]
        assert {"e_max_m", "wma", "grad_wma", "anomaly_pixels"} <= set(v)

    def test_slow_client_dropped_others_unaffected(self, live):
        svc, client = live
        slow = svc.subscribe()
        n_before = svc.frame_index
        fast = sse_events(client, 40, filter_event="verdict")
        assert len(fast) == 40
        # The slow client never drained its queue: it must have been
        # disconnected with a final overflow event, without disturbing
        # the fast client above.
        assert slow.overflowed
        assert slow not in svc._clients
        drained = []
        while True:
            try:
                drained.append(slow.q.get_nowait())
            except queue.Empty:
                break
        assert drained[-1][0] == "overflow"
        assert len(drained) <= svc.cfg.service.client_buffer
        assert svc.frame_index > n_before  # pipeline never stalled


class TestReplayMode:
    def test_replay_serves_recorded_frames(self, small_cfg, small_model,
                                           small_run_dir):
        frames = load_replay_frames(small_run_dir)
        svc = TwinService(small_cfg, small_model, replay_frames=frames[:10])
        assert svc.mode == "replay"
        svc.start()
        deadline = time.time() + 20
        while svc.frame_index < 10:
            assert time.time() < deadline
            time.sleep(0.02)
        svc.stop()
        assert svc.frame_index == 10
        np.testing.assert_array_equal(svc.frames_log[0].values,
                                      frames[0].values)


class TestServe:
    def test_port_in_use(self, small_cfg, small_model):
        blocker = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        blocker.bind(("127.0.0.1", 0))
        port = blocker.getsockname()[1]
        blocker.listen(1)
        try:
            with pytest.raises(PortInUse):
                serve(small_cfg, small_model, addr=f"127.0.0.1:{port}")
        finally:
            blocker.close()

    def test_distinct_run_ids(self, small_cfg, small_model):
        a = TwinService(small_cfg, small_model)
        b = TwinService(small_cfg, small_model)
        assert a.run_id != b.run_id
