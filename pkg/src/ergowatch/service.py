"""Live HTTP service: one pipeline worker thread plus read-only JSON views.

The worker owns all mutable pipeline state, replays a frame stream (paced
or as fast as possible), publishes an immutable status snapshot after every
frame, and drains queued feedback between frames. Handlers never touch the
pipeline directly, so reads can't block or tear the frame loop.
"""

from __future__ import annotations

import json
import queue
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .pipeline import SNAPSHOT_SCHEMA_VERSION, Pipeline
from .session import report_dict

SERVICE_SCHEMA_VERSION = 1


class PipelineWorker(threading.Thread):
    """Replays frames through the pipeline and publishes snapshots."""

    def __init__(self, pipeline: Pipeline, frames, speed: float = 0.0, feedback_log=None):
        super().__init__(daemon=True)
        self.pipeline = pipeline
        self.frames = frames
        self.speed = speed
        self.feedback_log = feedback_log
        self.feedback_queue: "queue.Queue[tuple[str, int | None, queue.Queue]]" = queue.Queue()
        self._lock = threading.Lock()
        self._snapshot = {"schema_version": SNAPSHOT_SCHEMA_VERSION, "t": None}
        self._events: list[dict] = []
        self._report: dict = {}
        self._stop = threading.Event()
        self.finished = threading.Event()

    # -- published views (thread-safe) --------------------------------------

    @property
    def snapshot(self) -> dict:
        with self._lock:
            return self._snapshot

    def events_since(self, cursor: int) -> tuple[list[dict], int]:
        with self._lock:
            return self._events[cursor:], len(self._events)

    @property
    def report(self) -> dict:
        with self._lock:
            return self._report

    def submit_feedback(self, action: str, rec_id: int | None, timeout: float = 5.0) -> dict:
        """Queue a feedback event and wait for the worker to apply it."""
        reply: "queue.Queue[dict]" = queue.Queue()
        self.feedback_queue.put((action, rec_id, reply))
        try:
            return reply.get(timeout=timeout)
        except queue.Empty:
            return {"accepted": False, "reason": "pipeline worker unresponsive"}

    def stop(self) -> None:
        self._stop.set()

    # -- worker loop -----------------------------------------------------------

    def _publish(self) -> None:
        snap = self.pipeline.snapshot()
        with self._lock:
            self._snapshot = snap
            self._events = list(self.pipeline.events)
            self._report = report_dict(
                self.pipeline.session,
                extra={"weights_b": self.pipeline.engine.ruleset.b.tolist()},
            )

    def _drain_feedback(self) -> None:
        while True:
            try:
                action, rec_id, reply = self.feedback_queue.get_nowait()
            except queue.Empty:
                return
            n_before = len(self.pipeline.feedback_log)
            result = self.pipeline.feedback(action, rec_id)
            if self.feedback_log and len(self.pipeline.feedback_log) > n_before:
                with open(self.feedback_log, "a") as f:
                    f.write(json.dumps(self.pipeline.feedback_log[-1], sort_keys=True))
                    f.write("\n")
            self._publish()
            reply.put(result)

    def run(self) -> None:
        start_wall = time.monotonic()
        start_t = None
        for frame in self.frames:
            if self._stop.is_set():
                break
            if self.speed > 0:
                if start_t is None:
                    start_t = frame.t
                due = start_wall + (frame.t - start_t) / self.speed
                delay = due - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
            self.pipeline.process(frame)
            self._drain_feedback()
            self._publish()
        self.pipeline.finish()
        self._publish()
        self.finished.set()
        while not self._stop.is_set():
            self._drain_feedback()
            time.sleep(0.02)


class _Handler(BaseHTTPRequestHandler):
    worker: PipelineWorker  # set by make_server

    def _send(self, code: int, payload: dict) -> None:
        payload = {"schema_version": SERVICE_SCHEMA_VERSION, **payload}
        body = json.dumps(payload).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def do_OPTIONS(self):
        self._send(200, {})

    def do_GET(self):
        url = urlparse(self.path)
        if url.path == "/status":
            self._send(200, {"status": self.worker.snapshot})
        elif url.path == "/report":
            self._send(200, {"report": self.worker.report})
        elif url.path == "/events":
            q = parse_qs(url.query)
            try:
                cursor = int(q.get("cursor", ["0"])[0])
            except ValueError:
                self._send(400, {"error": "cursor must be an integer"})
                return
            events, next_cursor = self.worker.events_since(max(0, cursor))
            self._send(200, {"events": events, "next_cursor": next_cursor})
        else:
            self._send(404, {"error": f"unknown path {url.path}"})

    def do_POST(self):
        url = urlparse(self.path)
        if url.path != "/feedback":
            self._send(404, {"error": f"unknown path {url.path}"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length) or b"{}")
            action = body["action"]
        except (ValueError, KeyError):
            self._send(400, {"error": "body must be JSON with an 'action' field"})
            return
        rec_id = body.get("recommendation_id")
        result = self.worker.submit_feedback(action, rec_id)
        # semantic rejection: request was well-formed but no recommendation is active
        self._send(200 if result.get("accepted") else 409, {"feedback": result})


def make_server(worker: PipelineWorker, port: int) -> ThreadingHTTPServer:
    handler = type("Handler", (_Handler,), {"worker": worker})
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve(pipeline: Pipeline, frames, port: int, speed: float = 0.0, feedback_log=None) -> None:
    """Run the worker and block serving HTTP until interrupted."""
    worker = PipelineWorker(pipeline, frames, speed=speed, feedback_log=feedback_log)
    server = make_server(worker, port)
    worker.start()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        worker.stop()
        server.server_close()
