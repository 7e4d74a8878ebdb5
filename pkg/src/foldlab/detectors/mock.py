"""Scripted detector double for exercising the orchestration control flow.

A script either replays literal detections or names a target mAP level per
(condition, difficulty, k); the mock then emits perfect detections for
exactly that fraction of each class's ground truth, which makes the measured
AP track the script.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..datastore import read_manifest
from ..errors import InvalidArgument
from ..metrics import Detection
from .base import (
    Detector,
    ModelHandle,
    TrainRequest,
    read_model_metadata,
    write_model_metadata,
)


class MockScript:
    def __init__(self, default: float = 1.0, blocks: dict | None = None,
                 detections: list | None = None):
        self.default = default
        self.blocks = blocks or {}  # "cond/difficulty" -> [mAP at k=1, k=2, ...]
        self.detections = detections

    @classmethod
    def from_file(cls, path) -> "MockScript":
        rec = json.loads(Path(path).read_text())
        return cls(rec.get("default", 1.0), rec.get("blocks"), rec.get("detections"))

    def level(self, condition: str, difficulty: str, k: int) -> float:
        seq = self.blocks.get(f"{condition}/{difficulty}")
        if not seq:
            return self.default
        return float(seq[min(k - 1, len(seq) - 1)])


class MockDetector(Detector):
    def __init__(self, script: MockScript, models_root):
        self.script = script
        self.models_root = Path(models_root)

    def fresh_model(self, model_id: str = "init") -> ModelHandle:
        handle = ModelHandle(model_id, "mock", (), self.models_root / model_id)
        write_model_metadata(handle.storage_path, handle)
        return handle

    def train(self, req: TrainRequest) -> ModelHandle:
        if not read_manifest(req.manifest_path).records:
            raise InvalidArgument("empty training set")
        handle = req.init_model.child(
            req.out_model_id, req.step, self.models_root / req.out_model_id
        )
        write_model_metadata(handle.storage_path, handle)
        return handle

    def detect(self, model: ModelHandle, manifest_path, confidence_threshold: float):
        read_model_metadata(model.storage_path)
        manifest = read_manifest(manifest_path)
        if self.script.detections is not None:
            dets = [
                Detection(r["image_id"], int(r["class_id"]),
                          _box(r["box"]), float(r["score"]))
                for r in self.script.detections
            ]
            return dets
        if model.lineage:
            step = model.lineage[-1]
            target = self.script.level(step.condition, step.difficulty, step.k)
        else:
            target = 0.0
        dets = []
        by_class: dict[int, list] = {}
        for rec in manifest.records:
            by_class.setdefault(rec.object_id, []).append(rec)
        for class_id, recs in sorted(by_class.items()):
            n_hit = int(round(target * len(recs)))
            for rec in recs[:n_hit]:
                dets.append(Detection(rec.image_id, class_id, rec.box, 0.99))
        return [d for d in dets if d.score >= confidence_threshold]


def _box(xyxy):
    from ..metrics import Box

    return Box.from_list(xyxy)
