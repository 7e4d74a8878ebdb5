"""Conformance against the orchestration side of the wire protocol.

Two layers:
  * a scripted subprocess session (init/train/detect/error/shutdown) that
    checks response structure line by line, and
  * if the orchestration package is installed, a round-trip through its
    actual external-detector adapter.
"""

import json
import subprocess
import sys

import pytest


def spawn(tmp_path):
    return subprocess.Popen(
        [sys.executable, "-m", "refdetect", "--models", str(tmp_path / "models")],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        text=True,
        bufsize=1,
    )


def exchange(proc, request):
    proc.stdin.write(json.dumps(request) + "\n")
    proc.stdin.flush()
    line = proc.stdout.readline()
    assert line, "worker closed stdout unexpectedly"
    return json.loads(line)


class TestScriptedSession:
    def test_protocol_session(self, dataset, tmp_path):
        manifest, records = dataset
        proc = spawn(tmp_path)
        try:
            reply = exchange(proc, {"cmd": "init"})
            assert reply["ok"] is True and isinstance(reply["name"], str)

            reply = exchange(proc, {
                "cmd": "train", "manifest": str(manifest),
                "init_model": None, "budget": 50, "out_model": "s1",
            })
            assert reply == {"ok": True, "model": "s1"}

            reply = exchange(proc, {
                "cmd": "detect", "manifest": str(manifest),
                "model": "s1", "conf": 0.5,
            })
            assert reply["ok"] is True
            for d in reply["detections"]:
                assert set(d) == {"image_id", "class_id", "box", "score"}
                x0, y0, x1, y1 = d["box"]
                assert x1 > x0 and y1 > y0
                assert 0.0 <= d["score"] <= 1.0

            # error path: unknown model must not kill the worker
            reply = exchange(proc, {
                "cmd": "detect", "manifest": str(manifest),
                "model": "ghost", "conf": 0.5,
            })
            assert reply["ok"] is False and reply["error"]

            reply = exchange(proc, {"cmd": "shutdown"})
            assert reply == {"ok": True}
            assert proc.wait(timeout=10) == 0
        finally:
            if proc.poll() is None:
                proc.kill()


class TestHarnessRoundTrip:
    def test_adapter_train_detect(self, dataset, tmp_path):
        foldlab = pytest.importorskip("foldlab")
        from foldlab.detectors import ExternalDetector
        from foldlab.detectors.base import TrainRequest, TrainStep

        cmd = f"{sys.executable} -m refdetect --models {tmp_path / 'models'}"
        det = ExternalDetector(cmd, timeout=60)
        try:
            model = det.fresh_model()
            assert det.name == "refdetect-mean-template"
            manifest, records = dataset
            model = det.train(TrainRequest(
                manifest, model, "h1", 50, TrainStep("fb", "easy", 1)))
            assert model.model_id == "h1"
            dets = det.detect(model, manifest, 0.5)
            assert {d.image_id for d in dets} == {r["image_id"] for r in records}
            assert all(d.class_id == 0 for d in dets)
        finally:
            det.close()
