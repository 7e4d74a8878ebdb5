"""Trainable-detector abstraction: handles, requests, persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import InvalidArgument, ModelCorrupt


@dataclass(frozen=True)
class TrainStep:
    condition: str
    difficulty: str
    k: int

    def to_json(self):
        return {"condition": self.condition, "difficulty": self.difficulty, "k": self.k}

    @classmethod
    def from_json(cls, rec):
        return cls(rec["condition"], rec["difficulty"], int(rec["k"]))


@dataclass(frozen=True)
class ModelHandle:
    model_id: str
    kind: str  # builtin-template | mock | external
    lineage: tuple[TrainStep, ...] = ()
    storage_path: Path | None = None

    def child(self, model_id: str, step: TrainStep | None, storage_path=None) -> "ModelHandle":
        lineage = self.lineage + ((step,) if step else ())
        return ModelHandle(model_id, self.kind, lineage, storage_path)

    def to_json(self):
        return {
            "model_id": self.model_id,
            "kind": self.kind,
            "lineage": [s.to_json() for s in self.lineage],
            "storage_path": str(self.storage_path) if self.storage_path else None,
        }

    @classmethod
    def from_json(cls, rec):
        return cls(
            rec["model_id"],
            rec["kind"],
            tuple(TrainStep.from_json(s) for s in rec["lineage"]),
            Path(rec["storage_path"]) if rec.get("storage_path") else None,
        )


@dataclass(frozen=True)
class TrainRequest:
    manifest_path: Path
    init_model: ModelHandle
    out_model_id: str
    budget: int = 1000  # iteration hint; builtin training is single-pass
    step: TrainStep | None = None

    def __post_init__(self):
        if self.budget < 1:
            raise InvalidArgument("training budget must be >= 1")


class Detector:
    """Interface every detector backend implements."""

    def fresh_model(self, model_id: str = "init") -> ModelHandle:
        raise NotImplementedError

    def train(self, req: TrainRequest) -> ModelHandle:
        raise NotImplementedError

    def detect(self, model: ModelHandle, manifest_path, confidence_threshold: float):
        raise NotImplementedError

    def close(self):
        pass


def write_model_metadata(model_dir: Path, handle: ModelHandle) -> None:
    model_dir.mkdir(parents=True, exist_ok=True)
    (model_dir / "metadata.json").write_text(json.dumps(handle.to_json(), indent=2))


def read_model_metadata(model_dir: Path) -> ModelHandle:
    meta = Path(model_dir) / "metadata.json"
    if not meta.exists():
        raise ModelCorrupt(f"missing model metadata at {meta}")
    try:
        return ModelHandle.from_json(json.loads(meta.read_text()))
    except (json.JSONDecodeError, KeyError) as exc:
        raise ModelCorrupt(f"unreadable model metadata: {exc}")
