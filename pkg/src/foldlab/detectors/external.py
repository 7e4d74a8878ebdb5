"""Bridge to an external detector worker over newline-delimited JSON.

The worker is spawned as a child process; every train/detect call is one
request line on its stdin answered by one response line on its stdout:

    -> {"cmd":"init"}                                  <- {"ok":true,"name":...}
    -> {"cmd":"train","manifest":...,"init_model":...,
        "budget":...,"out_model":...}                  <- {"ok":true,"model":...}
    -> {"cmd":"detect","manifest":...,"model":...,
        "conf":...}                                    <- {"ok":true,"detections":[...]}
    -> {"cmd":"shutdown"}                              <- {"ok":true}

Any error is reported as {"ok":false,"error":...}.
"""

from __future__ import annotations

import json
import select
import shlex
import subprocess
from pathlib import Path

from ..errors import AdapterProtocolError, DetectorUnavailable, InvalidArgument
from ..metrics import Box, Detection
from .base import Detector, ModelHandle, TrainRequest


class ExternalDetector(Detector):
    def __init__(self, spawn_command: str, timeout: float = 120.0):
        self.command = spawn_command
        self.timeout = timeout
        self.proc: subprocess.Popen | None = None
        self.name = None

    def _ensure_started(self):
        if self.proc is not None and self.proc.poll() is None:
            return
        try:
            self.proc = subprocess.Popen(
                shlex.split(self.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise DetectorUnavailable(f"cannot spawn worker: {exc}")
        reply = self._exchange({"cmd": "init"})
        self.name = reply.get("name")

    def _exchange(self, request: dict) -> dict:
        if self.proc is None or self.proc.poll() is not None:
            raise DetectorUnavailable("worker process is not running")
        try:
            self.proc.stdin.write(json.dumps(request) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise DetectorUnavailable(f"worker pipe broken: {exc}")
        ready, _, _ = select.select([self.proc.stdout], [], [], self.timeout)
        if not ready:
            raise DetectorUnavailable(f"worker timed out after {self.timeout}s")
        line = self.proc.stdout.readline()
        if not line:
            raise DetectorUnavailable("worker closed its stdout")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise AdapterProtocolError(f"malformed response line: {exc}")
        if not isinstance(reply, dict) or "ok" not in reply:
            raise AdapterProtocolError(f"response missing 'ok' field: {reply!r}")
        if not reply["ok"]:
            raise AdapterProtocolError(f"worker error: {reply.get('error')}")
        return reply

    def fresh_model(self, model_id: str = "init") -> ModelHandle:
        self._ensure_started()
        return ModelHandle(model_id, "external", ())

    def train(self, req: TrainRequest) -> ModelHandle:
        self._ensure_started()
        reply = self._exchange(
            {
                "cmd": "train",
                "manifest": str(Path(req.manifest_path).resolve()),
                "init_model": None if req.init_model.lineage == () and
                req.init_model.model_id == "init" else req.init_model.model_id,
                "budget": req.budget,
                "out_model": req.out_model_id,
            }
        )
        if reply.get("model") != req.out_model_id:
            raise AdapterProtocolError(
                f"worker stored model {reply.get('model')!r}, expected {req.out_model_id!r}"
            )
        return req.init_model.child(req.out_model_id, req.step)

    def detect(self, model: ModelHandle, manifest_path, confidence_threshold: float):
        self._ensure_started()
        reply = self._exchange(
            {
                "cmd": "detect",
                "manifest": str(Path(manifest_path).resolve()),
                "model": model.model_id,
                "conf": confidence_threshold,
            }
        )
        raw = reply.get("detections")
        if not isinstance(raw, list):
            raise AdapterProtocolError("detect response missing detections array")
        try:
            return [
                Detection(r["image_id"], int(r["class_id"]),
                          Box.from_list(r["box"]), float(r["score"]))
                for r in raw
            ]
        except (KeyError, TypeError, ValueError, InvalidArgument) as exc:
            raise AdapterProtocolError(f"bad detection record: {exc}")

    def close(self):
        if self.proc is not None and self.proc.poll() is None:
            try:
                self._exchange({"cmd": "shutdown"})
            except (DetectorUnavailable, AdapterProtocolError):
                pass
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
        self.proc = None
