"""Desk-scale builtin detector: per-class pools of normalized grayscale
templates scored by cross-correlation over a sliding-window scale pyramid.

Training crops every ground-truth box, resizes it to a 48x48 zero-mean
unit-norm template and appends it to the class pool (capped; the most
redundant template is evicted first).  Detection slides class-sized windows
at stride 8 over a scale pyramid, scores each window by its best pool
correlation (coarse 12x12 screen, then full-resolution rescoring and a local
alignment search), thresholds and applies NMS.
"""

from __future__ import annotations

import json
from pathlib import Path

import cv2
import numpy as np

from ..datastore import DatasetManifest, load_image, read_manifest
from ..errors import InvalidArgument, ModelCorrupt
from ..metrics import Box, Detection
from .base import (
    Detector,
    ModelHandle,
    TrainRequest,
    read_model_metadata,
    write_model_metadata,
)

SCALES = (0.5, 0.71, 1.0, 1.41, 2.0, 2.83)
WINDOW = 48
STRIDE = 8
POOL_CAP = 256
NMS_IOU = 0.4

_COARSE = 12  # coarse screening resolution (window / 4)
_TOPK = 12  # candidates kept per (class, scale) after coarse screening
_MAX_DIM = 1600  # cap on rescaled image side


def _to_gray(image: np.ndarray) -> np.ndarray:
    return cv2.cvtColor(image.astype(np.float32), cv2.COLOR_RGB2GRAY)


def _normalize(vec: np.ndarray):
    v = vec - vec.mean()
    n = float(np.linalg.norm(v))
    return (v / n, n) if n > 1e-8 else (None, 0.0)


def _crop_template(gray: np.ndarray, box: Box):
    h, w = gray.shape
    x0 = max(0, int(np.floor(box.x0)))
    y0 = max(0, int(np.floor(box.y0)))
    x1 = min(w, int(np.ceil(box.x1)))
    y1 = min(h, int(np.ceil(box.y1)))
    if x1 - x0 < 2 or y1 - y0 < 2:
        return None
    crop = gray[y0:y1, x0:x1]
    resized = cv2.resize(crop, (WINDOW, WINDOW), interpolation=cv2.INTER_AREA)
    norm, _ = _normalize(resized.astype(np.float64))
    if norm is None:
        return None
    return norm, (x1 - x0, y1 - y0)


class _Pool:
    """Per-class template pool."""

    def __init__(self):
        self.templates: dict[int, list[np.ndarray]] = {}
        self.sizes: dict[int, list[tuple[float, float]]] = {}

    def add(self, class_id: int, template: np.ndarray, size, cap: int):
        self.templates.setdefault(class_id, []).append(template)
        self.sizes.setdefault(class_id, []).append(size)
        while len(self.templates[class_id]) > cap:
            self._evict(class_id)

    def _evict(self, class_id: int):
        # drop the template most correlated with the rest of the pool
        flat = np.stack([t.ravel() for t in self.templates[class_id]])
        gram = flat @ flat.T
        np.fill_diagonal(gram, -np.inf)
        victim = int(np.argmax(gram.max(axis=1)))
        del self.templates[class_id][victim]
        del self.sizes[class_id][victim]

    def save(self, path: Path):
        arrays = {}
        for c, tmpls in self.templates.items():
            arrays[f"tmpl_{c}"] = np.stack(tmpls).astype(np.float32)
            arrays[f"size_{c}"] = np.array(self.sizes[c], dtype=np.float32)
        np.savez_compressed(path, **arrays)

    @classmethod
    def load(cls, path: Path) -> "_Pool":
        pool = cls()
        if not path.exists():
            raise ModelCorrupt(f"missing template pool at {path}")
        with np.load(path) as data:
            for key in data.files:
                if key.startswith("tmpl_"):
                    c = int(key[5:])
                    pool.templates[c] = [t.astype(np.float64) for t in data[key]]
                    pool.sizes[c] = [tuple(map(float, s)) for s in data[f"size_{c}"]]
        return pool

    def count(self, class_id: int) -> int:
        return len(self.templates.get(class_id, []))


class TemplatePoolDetector(Detector):
    def __init__(self, models_root, pool_cap: int = POOL_CAP,
                 scales=SCALES, stride: int = STRIDE, nms_iou: float = NMS_IOU):
        self.models_root = Path(models_root)
        self.pool_cap = pool_cap
        self.scales = tuple(scales)
        self.stride = stride
        self.nms_iou = nms_iou

    def _model_dir(self, model_id: str) -> Path:
        return self.models_root / model_id

    def fresh_model(self, model_id: str = "init") -> ModelHandle:
        handle = ModelHandle(model_id, "builtin-template", (),
                             self._model_dir(model_id))
        write_model_metadata(handle.storage_path, handle)
        _Pool().save(handle.storage_path / "pool.npz")
        return handle

    def load_pool(self, model: ModelHandle) -> _Pool:
        read_model_metadata(model.storage_path)
        return _Pool.load(Path(model.storage_path) / "pool.npz")

    def train(self, req: TrainRequest) -> ModelHandle:
        manifest = read_manifest(req.manifest_path)
        if not manifest.records:
            raise InvalidArgument("empty training set")
        pool = self.load_pool(req.init_model)
        for rec in manifest.records:
            gray = _to_gray(load_image(manifest.image_path(rec)))
            entry = _crop_template(gray, rec.box)
            if entry is not None:
                pool.add(rec.object_id, entry[0], entry[1], self.pool_cap)
        handle = req.init_model.child(
            req.out_model_id, req.step, self._model_dir(req.out_model_id)
        )
        write_model_metadata(handle.storage_path, handle)
        pool.save(handle.storage_path / "pool.npz")
        return handle

    def detect(self, model: ModelHandle, manifest_path, confidence_threshold: float):
        pool = self.load_pool(model)
        manifest = read_manifest(manifest_path)
        detections: list[Detection] = []
        for rec_image_id, path in _unique_images(manifest):
            gray = _to_gray(load_image(path)).astype(np.float64)
            for class_id in sorted(pool.templates):
                detections.extend(
                    self._detect_class(
                        gray, rec_image_id, class_id, pool, confidence_threshold
                    )
                )
        return detections

    def _detect_class(self, gray, image_id, class_id, pool, conf):
        templates = pool.templates[class_id]
        if not templates:
            return []
        tmat = np.stack([t.ravel() for t in templates])
        # quarter-resolution templates; TM_CCOEFF_NORMED normalizes internally
        tmat4 = [
            cv2.resize(t.astype(np.float32), (_COARSE, _COARSE),
                       interpolation=cv2.INTER_AREA)
            for t in templates
        ]
        sizes = np.array(pool.sizes[class_id])
        w0 = float(np.median(sizes[:, 0]))
        h0 = float(np.median(sizes[:, 1]))
        hh, ww = gray.shape

        candidates = []
        for s in self.scales:
            tw, th = w0 * s, h0 * s
            if tw < 8 or th < 8:
                continue
            rfx, rfy = WINDOW / tw, WINDOW / th
            rw, rh = int(round(ww * rfx)), int(round(hh * rfy))
            if rw < WINDOW or rh < WINDOW or max(rw, rh) > _MAX_DIM:
                continue
            small = cv2.resize(gray.astype(np.float32), (rw, rh),
                               interpolation=cv2.INTER_AREA).astype(np.float64)
            coarse = cv2.resize(small.astype(np.float32), (rw // 4, rh // 4),
                                interpolation=cv2.INTER_AREA)
            # dense stride-1 screen at quarter resolution; NCC falls off fast
            # with misalignment, so any coarser grid misses true windows
            maps = np.stack([
                np.nan_to_num(
                    cv2.matchTemplate(coarse, t12, cv2.TM_CCOEFF_NORMED)
                )
                for t12 in tmat4
            ])
            scores2d = maps.max(axis=0)
            tidx2d = maps.argmax(axis=0)
            for py, px in _peak_positions(scores2d, _TOPK):
                if scores2d[py, px] <= 0:
                    continue
                cy, cx = py * 4, px * 4
                refined = self._refine_resized(
                    small, templates[tidx2d[py, px]], cx, cy
                )
                if refined is None:
                    continue
                rx, ry = refined
                win = small[ry : ry + WINDOW, rx : rx + WINDOW]
                nwin, _ = _normalize(win.astype(np.float64))
                if nwin is None:
                    continue
                full = nwin.ravel() @ tmat.T
                tidx = int(np.argmax(full))
                score = float(full[tidx])
                candidates.append((score, rx / rfx, ry / rfy, tw, th, tidx, s))

        final = []
        candidates.sort(key=lambda c: -c[0])
        floor = confidence_threshold_floor(conf)
        # alignment can lift a score only slightly, so skip candidates that
        # cannot reach the threshold (but keep a few for weak-signal recall)
        kept = [c for c in candidates if c[0] >= floor - 0.05]
        kept.extend(c for c in candidates[:3] if c not in kept)
        for score, bx, by, tw, th, tidx, s in kept[: 4 * _TOPK]:
            # the object's extent is the window that matched, not the stored
            # template size (a small-render template can match a large window);
            # still try the template's own size when close, so a training
            # image re-detects its exact crop (NCC self-correlation 1)
            trials = [(tw, th)]
            ow, oh = sizes[tidx][0] * s, sizes[tidx][1] * s
            if 0.8 <= ow / tw <= 1.25 and 0.8 <= oh / th <= 1.25:
                trials.append((ow, oh))
            best = None
            for bw, bh in trials:
                aligned = self._refine_original(
                    gray, templates[tidx], bx, by, bw, bh
                )
                if aligned is not None and (best is None or aligned[2] > best[0][2]):
                    best = (aligned, bw, bh)
            if best is None:
                continue
            (ax, ay, ascore), bw, bh = best
            score = max(score, ascore)
            box = _clip_box(ax, ay, bw, bh, ww, hh)
            if box is None:
                continue
            score = float(np.clip(score, 0.0, 1.0))
            if score >= confidence_threshold_floor(conf):
                final.append(Detection(image_id, class_id, box, score))
        final = [d for d in final if d.score >= conf]
        return _nms(final, self.nms_iou)

    def _refine_resized(self, small, template, cx, cy):
        """Dense stride-1 search around (cx, cy) in the rescaled image,
        scored against a single template; returns the best window corner."""
        rh, rw = small.shape
        r = self.stride
        x0 = max(0, min(cx - r, rw - WINDOW))
        y0 = max(0, min(cy - r, rh - WINDOW))
        x1 = max(x0, min(rw - WINDOW, cx + r))
        y1 = max(y0, min(rh - WINDOW, cy + r))
        patch = small[y0 : y1 + WINDOW, x0 : x1 + WINDOW].astype(np.float32)
        res = np.nan_to_num(
            cv2.matchTemplate(patch, template.astype(np.float32), cv2.TM_CCOEFF_NORMED)
        )
        ny, nx = divmod(int(np.argmax(res)), res.shape[1])
        return x0 + nx, y0 + ny

    def _refine_original(self, gray, template, bx, by, bw, bh, radius=4):
        """Integer-offset alignment search at original resolution.

        A cross-correlation sweep with the upsampled template ranks the
        offsets; the exact crop-and-resize NCC is then computed only at the
        leading offsets, so a training image still re-detects its own crop
        with score exactly 1.
        """
        hh, ww = gray.shape
        ix, iy = int(round(bx)), int(round(by))
        iw, ih = int(round(bw)), int(round(bh))
        if iw < 2 or ih < 2:
            return None
        rx0, ry0 = max(0, ix - radius), max(0, iy - radius)
        rx1, ry1 = min(ww, ix + iw + radius), min(hh, iy + ih + radius)
        if rx1 - rx0 < iw or ry1 - ry0 < ih:
            return None
        region = gray[ry0:ry1, rx0:rx1].astype(np.float32)
        t_up = cv2.resize(template.astype(np.float32), (iw, ih),
                          interpolation=cv2.INTER_LINEAR)
        res = np.nan_to_num(cv2.matchTemplate(region, t_up, cv2.TM_CCOEFF_NORMED))
        order = np.argsort(-res.ravel())[:5]
        tvec = template.ravel()
        best = None
        for flat in order:
            dy, dx = divmod(int(flat), res.shape[1])
            x0, y0 = rx0 + dx, ry0 + dy
            crop = cv2.resize(
                gray[y0 : y0 + ih, x0 : x0 + iw].astype(np.float32),
                (WINDOW, WINDOW),
                interpolation=cv2.INTER_AREA,
            ).astype(np.float64)
            norm, _ = _normalize(crop)
            if norm is None:
                continue
            score = float(norm.ravel() @ tvec)
            if best is None or score > best[2]:
                best = (x0, y0, score)
        return best


def confidence_threshold_floor(conf: float) -> float:
    # small slack before the final threshold so alignment can lift borderline
    # scores; the hard cut is applied after refinement
    return max(0.0, conf - 0.05)


def _peak_positions(score_map: np.ndarray, k: int, suppress: int = 2):
    """Greedy local maxima of a 2-D score map with square suppression, so
    clustered responses around one object yield a single candidate."""
    work = score_map.copy()
    h, w = work.shape
    peaks = []
    for _ in range(k):
        flat = int(np.argmax(work))
        py, px = divmod(flat, w)
        if work[py, px] == -np.inf:
            break
        peaks.append((py, px))
        y0, y1 = max(0, py - suppress), min(h, py + suppress + 1)
        x0, x1 = max(0, px - suppress), min(w, px + suppress + 1)
        work[y0:y1, x0:x1] = -np.inf
    return peaks


def _clip_box(x, y, w, h, img_w, img_h):
    x0 = max(0.0, float(x))
    y0 = max(0.0, float(y))
    x1 = min(float(img_w), float(x) + float(w))
    y1 = min(float(img_h), float(y) + float(h))
    if x1 - x0 < 1 or y1 - y0 < 1:
        return None
    return Box(x0, y0, x1, y1)


def _nms(dets: list[Detection], iou_cut: float) -> list[Detection]:
    from ..metrics import iou as box_iou

    kept: list[Detection] = []
    for d in sorted(dets, key=lambda d: -d.score):
        if all(box_iou(d.box, k.box) <= iou_cut for k in kept):
            kept.append(d)
    return kept


def _unique_images(manifest: DatasetManifest):
    seen = {}
    for rec in manifest.records:
        if rec.image_id not in seen:
            seen[rec.image_id] = manifest.image_path(rec)
    return list(seen.items())
