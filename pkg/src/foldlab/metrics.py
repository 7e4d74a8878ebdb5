"""Detection evaluation: IoU, greedy matching, per-class AP and mAP.

VOC-style: detections ranked by score, greedily matched to the best
still-unmatched ground truth of the same class in the same image; duplicates
count as false positives.  AP is the all-point interpolated area under the
precision envelope.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyEvaluation, InvalidArgument, UndefinedClass


@dataclass(frozen=True)
class Box:
    """Half-open continuous box [x0, x1) x [y0, y1)."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise InvalidArgument(f"degenerate box {self}")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def to_list(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]

    @classmethod
    def from_list(cls, xyxy) -> "Box":
        return cls(*map(float, xyxy))


@dataclass(frozen=True)
class Detection:
    image_id: str
    class_id: int
    box: Box
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise InvalidArgument("score must be in [0, 1]")


@dataclass(frozen=True)
class GroundTruth:
    image_id: str
    class_id: int
    box: Box


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.5
    confidence_threshold: float = 0.8

    def __post_init__(self):
        for v in (self.iou_threshold, self.confidence_threshold):
            if not 0.0 < v < 1.0:
                raise InvalidArgument("thresholds must lie in (0, 1)")


@dataclass
class MapScore:
    per_class_ap: dict[int, float]
    map: float

    def to_json(self) -> dict:
        return {
            "map": self.map,
            "per_class_ap": {str(k): v for k, v in self.per_class_ap.items()},
        }


def iou(a: Box, b: Box) -> float:
    ix = max(0.0, min(a.x1, b.x1) - max(a.x0, b.x0))
    iy = max(0.0, min(a.y1, b.y1) - max(a.y0, b.y0))
    inter = ix * iy
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0


def match_detections(
    dets: list[Detection], gts: list[GroundTruth], cfg: EvalConfig
) -> tuple[list[bool], list[bool]]:
    """Greedy score-descending matching.

    Returns (per-detection TP flags in input order, per-GT matched flags).
    Ties in score keep the stable input order.
    """
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    tp = [False] * len(dets)
    matched = [False] * len(gts)
    for i in order:
        det = dets[i]
        best_iou, best_j = 0.0, -1
        for j, gt in enumerate(gts):
            if matched[j] or gt.image_id != det.image_id or gt.class_id != det.class_id:
                continue
            v = iou(det.box, gt.box)
            if v > best_iou:
                best_iou, best_j = v, j
        if best_j >= 0 and best_iou >= cfg.iou_threshold:
            tp[i] = True
            matched[best_j] = True
    return tp, matched


def average_precision(tp_flags, scores, total_gt: int) -> float:
    """All-point interpolated AP from ranked TP/FP flags."""
    if total_gt < 1:
        raise UndefinedClass("AP undefined without ground truth")
    if len(tp_flags) == 0:
        return 0.0
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    tp = np.cumsum([1.0 if tp_flags[i] else 0.0 for i in order])
    fp = np.cumsum([0.0 if tp_flags[i] else 1.0 for i in order])
    recall = tp / total_gt
    precision = tp / np.maximum(tp + fp, 1e-12)
    # precision envelope: p(r) = max over r' >= r
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    idx = np.where(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[idx + 1] - mrec[idx]) * mpre[idx + 1]))


def evaluate_predictions(
    dets: list[Detection], gts: list[GroundTruth], cfg: EvalConfig = EvalConfig()
) -> MapScore:
    if not gts:
        raise EmptyEvaluation("no ground truth boxes")
    tp, _ = match_detections(dets, gts, cfg)
    classes = sorted({g.class_id for g in gts})
    per_class = {}
    for c in classes:
        flags = [tp[i] for i, d in enumerate(dets) if d.class_id == c]
        scores = [d.score for d in dets if d.class_id == c]
        total = sum(1 for g in gts if g.class_id == c)
        per_class[c] = average_precision(flags, scores, total)
    return MapScore(per_class, float(np.mean(list(per_class.values()))))


def detections_to_json(dets: list[Detection]) -> list[dict]:
    return [
        {
            "image_id": d.image_id,
            "class_id": d.class_id,
            "box": d.box.to_list(),
            "score": d.score,
        }
        for d in dets
    ]


def detections_from_json(records) -> list[Detection]:
    return [
        Detection(r["image_id"], int(r["class_id"]), Box.from_list(r["box"]), float(r["score"]))
        for r in records
    ]


def load_detections(path) -> list[Detection]:
    with open(path, encoding="utf-8") as fh:
        return detections_from_json(json.load(fh))


def save_detections(dets: list[Detection], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(detections_to_json(dets), fh)
