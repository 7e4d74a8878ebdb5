"""Newline-delimited JSON request/response loop.

One request object per stdin line, one response object per stdout line:

    -> {"cmd":"init"}                                  <- {"ok":true,"name":...}
    -> {"cmd":"train","manifest":...,"init_model":...,
        "budget":...,"out_model":...}                  <- {"ok":true,"model":...}
    -> {"cmd":"detect","manifest":...,"model":...,
        "conf":...}                                    <- {"ok":true,"detections":[...]}
    -> {"cmd":"shutdown"}                              <- {"ok":true}

Every failure is answered with {"ok":false,"error":...} and the loop keeps
serving; only shutdown (or EOF) ends it.
"""

from __future__ import annotations

import json
from pathlib import Path

from .matcher import MeanTemplateMatcher, WorkerError

WORKER_NAME = "refdetect-mean-template"


def _model_path(models_dir: Path, model_id: str) -> Path:
    if not model_id or "/" in model_id or model_id.startswith("."):
        raise WorkerError(f"invalid model id: {model_id!r}")
    return models_dir / f"{model_id}.npz"


def _handle_train(req: dict, models_dir: Path) -> dict:
    try:
        manifest = req["manifest"]
        out_model = req["out_model"]
    except KeyError as exc:
        raise WorkerError(f"train request missing field {exc}")
    init_model = req.get("init_model")
    if init_model is None:
        matcher = MeanTemplateMatcher()
    else:
        matcher = MeanTemplateMatcher.load(_model_path(models_dir, init_model))
    matcher.train(manifest)
    matcher.save(_model_path(models_dir, out_model))
    return {"ok": True, "model": out_model}


def _handle_detect(req: dict, models_dir: Path) -> dict:
    try:
        manifest = req["manifest"]
        model_id = req["model"]
        conf = float(req["conf"])
    except (KeyError, TypeError, ValueError) as exc:
        raise WorkerError(f"detect request missing/invalid field: {exc}")
    matcher = MeanTemplateMatcher.load(_model_path(models_dir, model_id))
    return {"ok": True, "detections": matcher.detect(manifest, conf)}


def serve_protocol(stdin, stdout, models_dir) -> None:
    """Serve requests from `stdin` until shutdown or EOF."""
    models_dir = Path(models_dir)
    models_dir.mkdir(parents=True, exist_ok=True)
    for line in stdin:
        if not line.strip():
            continue
        try:
            req = json.loads(line)
            if not isinstance(req, dict):
                raise WorkerError("request must be a JSON object")
            cmd = req.get("cmd")
            if cmd == "init":
                reply = {"ok": True, "name": WORKER_NAME}
            elif cmd == "train":
                reply = _handle_train(req, models_dir)
            elif cmd == "detect":
                reply = _handle_detect(req, models_dir)
            elif cmd == "shutdown":
                stdout.write(json.dumps({"ok": True}) + "\n")
                stdout.flush()
                return
            else:
                raise WorkerError(f"unknown command: {cmd!r}")
        except json.JSONDecodeError as exc:
            reply = {"ok": False, "error": f"malformed request: {exc}"}
        except WorkerError as exc:
            reply = {"ok": False, "error": str(exc)}
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()
