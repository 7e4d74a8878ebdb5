"""Per-class mean-template matcher.

Training averages the normalized grayscale crops of each class's ground-truth
boxes into one 32x32 template and records the median box size.  Detection
runs one normalized cross-correlation sweep per class at that median size and
reports the best location when it clears the confidence threshold.  Accuracy
is intentionally modest; the matcher exists so the protocol worker has
something real to train and persist.
"""

from __future__ import annotations

import json
from pathlib import Path

import cv2
import numpy as np

TEMPLATE_SIZE = 32


class WorkerError(Exception):
    """Raised for anything the worker should report as {"ok": false}."""


def _load_gray(path: Path) -> np.ndarray:
    image = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if image is None:
        raise WorkerError(f"cannot read image {path}")
    return image.astype(np.float32) / 255.0


def read_manifest(path) -> list[dict]:
    """Minimal JSONL manifest reader: image_path, image_id, object_id, box."""
    path = Path(path)
    if not path.is_file():
        raise WorkerError(f"manifest not found: {path}")
    records = []
    for i, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            records.append(
                {
                    "image_path": str(path.parent / rec["image_path"]),
                    "image_id": rec["image_id"],
                    "object_id": int(rec["object_id"]),
                    "box": [float(v) for v in rec["box"]],
                }
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise WorkerError(f"bad manifest line {i}: {exc}")
    if not records:
        raise WorkerError(f"manifest {path} has no records")
    return records


class MeanTemplateMatcher:
    """One mean template and median box size per class."""

    def __init__(self):
        # class_id -> (template sum, count, list of (w, h))
        self.sums: dict[int, np.ndarray] = {}
        self.counts: dict[int, int] = {}
        self.sizes: dict[int, list[tuple[float, float]]] = {}

    # ------------------------------------------------------------ training
    def train(self, manifest_path) -> None:
        for rec in read_manifest(manifest_path):
            gray = _load_gray(Path(rec["image_path"]))
            x0, y0, x1, y1 = rec["box"]
            h, w = gray.shape
            ix0, iy0 = max(0, int(x0)), max(0, int(y0))
            ix1, iy1 = min(w, int(np.ceil(x1))), min(h, int(np.ceil(y1)))
            if ix1 - ix0 < 2 or iy1 - iy0 < 2:
                continue
            crop = cv2.resize(
                gray[iy0:iy1, ix0:ix1],
                (TEMPLATE_SIZE, TEMPLATE_SIZE),
                interpolation=cv2.INTER_AREA,
            )
            c = rec["object_id"]
            if c in self.sums:
                self.sums[c] += crop
                self.counts[c] += 1
            else:
                self.sums[c] = crop.copy()
                self.counts[c] = 1
            self.sizes.setdefault(c, []).append((ix1 - ix0, iy1 - iy0))

    # ----------------------------------------------------------- detection
    def detect(self, manifest_path, conf: float) -> list[dict]:
        detections = []
        seen: set[str] = set()
        records = read_manifest(manifest_path)
        for rec in records:
            if rec["image_id"] in seen:
                continue
            seen.add(rec["image_id"])
            gray = _load_gray(Path(rec["image_path"]))
            for c in sorted(self.sums):
                found = self._match_class(gray, c, conf)
                if found is not None:
                    box, score = found
                    detections.append(
                        {
                            "image_id": rec["image_id"],
                            "class_id": c,
                            "box": box,
                            "score": score,
                        }
                    )
        return detections

    def _match_class(self, gray: np.ndarray, c: int, conf: float):
        template = self.sums[c] / self.counts[c]
        sizes = np.asarray(self.sizes[c])
        tw = int(round(float(np.median(sizes[:, 0]))))
        th = int(round(float(np.median(sizes[:, 1]))))
        h, w = gray.shape
        tw, th = min(tw, w), min(th, h)
        if tw < 4 or th < 4:
            return None
        sized = cv2.resize(template, (tw, th), interpolation=cv2.INTER_LINEAR)
        res = np.nan_to_num(cv2.matchTemplate(gray, sized, cv2.TM_CCOEFF_NORMED))
        y, x = np.unravel_index(int(np.argmax(res)), res.shape)
        score = float(np.clip(res[y, x], 0.0, 1.0))
        if score < conf:
            return None
        return [float(x), float(y), float(x + tw), float(y + th)], score

    # --------------------------------------------------------- persistence
    def save(self, path: Path) -> None:
        arrays = {}
        for c in self.sums:
            arrays[f"sum_{c}"] = self.sums[c]
            arrays[f"count_{c}"] = np.array(self.counts[c])
            arrays[f"sizes_{c}"] = np.asarray(self.sizes[c], dtype=np.float32)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez_compressed(path, **arrays)

    @classmethod
    def load(cls, path: Path) -> "MeanTemplateMatcher":
        if not Path(path).is_file():
            raise WorkerError(f"unknown model: {path}")
        matcher = cls()
        with np.load(path) as data:
            for key in data.files:
                if key.startswith("sum_"):
                    c = int(key[4:])
                    matcher.sums[c] = data[key]
                    matcher.counts[c] = int(data[f"count_{c}"])
                    matcher.sizes[c] = [tuple(s) for s in data[f"sizes_{c}"]]
        return matcher
